use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dielectric_cli::spec::{MethodSpec, ModeSpec};
use dielectric_cli::{run, to_csv, CliResult, ExperimentSpec, Kind, RunOptions};

#[derive(Parser, Debug)]
#[command(name = "dielectric", version, about = "Mutual polarisation of dielectric spheres: solves and experiment sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one configuration.
    Solve(Flags),
    /// Iterations against the number of spheres.
    SweepN(Flags),
    /// Iterations against the dielectric ratio.
    SweepKappa(Flags),
    /// Iterations against the radii ratio.
    SweepRadii(Flags),
    /// Iterations against the minimum separation.
    SweepSeparation(Flags),
    /// Iterations against lmax at fixed separations.
    SweepLmax(Flags),
    /// Far-field error against discretisation error.
    FmmStudy(Flags),
    /// Solver wall time with the hierarchical matvec.
    Bench(Flags),
    /// Print the bundled spec of a kind.
    ShowSpec { kind: String },
}

#[derive(Args, Debug)]
struct Flags {
    /// TOML spec; defaults to the bundled spec of the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    lmax: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    tol: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<MethodArg>>,
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Box expansion degree.
    #[arg(long = "P")]
    p: Option<usize>,
    /// Tree depth; exclusive with --leaf-cap.
    #[arg(long = "D", conflicts_with = "leaf_cap")]
    d: Option<usize>,
    #[arg(long)]
    leaf_cap: Option<usize>,
    #[arg(long)]
    c_equiv: Option<f64>,
    /// Reference-solution cache directory (otherwise $DIELECTRIC_CACHE_DIR).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Accepted for interface stability; every algorithm here is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the CSV to stdout as well.
    #[arg(long)]
    print: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Gmres,
    Cg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Direct,
    Hierarchical,
}

fn load(kind: Kind, f: &Flags) -> CliResult<ExperimentSpec> {
    let mut spec = match &f.config {
        Some(p) => ExperimentSpec::from_path(p)?,
        None => ExperimentSpec::bundled(kind),
    };
    if spec.kind != kind {
        return Err(dielectric_cli::CliError::Schema {
            key: "kind".into(),
            message: format!("spec is `{}` but the subcommand is `{}`", spec.kind.name(), kind.name()),
        });
    }
    if let Some(o) = &f.output {
        spec.output.path = o.clone();
    }
    if let Some(l) = f.lmax {
        spec.solver.lmax = l;
    }
    if let Some(t) = &f.tol {
        spec.solver.tol = t.clone();
    }
    if let Some(m) = &f.method {
        spec.solver.method = m
            .iter()
            .map(|m| match m {
                MethodArg::Gmres => MethodSpec::Gmres,
                MethodArg::Cg => MethodSpec::Cg,
            })
            .collect();
    }
    if let Some(m) = f.mode {
        spec.matvec.mode = match m {
            ModeArg::Direct => ModeSpec::Direct,
            ModeArg::Hierarchical => ModeSpec::Hierarchical,
        };
        if matches!(m, ModeArg::Direct) {
            spec.matvec.p = None;
            spec.matvec.d = None;
            spec.matvec.leaf_cap = None;
        }
    }
    if f.p.is_some() {
        spec.matvec.p = f.p;
    }
    if f.d.is_some() {
        spec.matvec.d = f.d;
        spec.matvec.leaf_cap = None;
    }
    if f.leaf_cap.is_some() {
        spec.matvec.leaf_cap = f.leaf_cap;
        spec.matvec.d = None;
    }
    if let Some(c) = f.c_equiv {
        spec.solver.c_equiv = c;
    }
    spec.validate()?;
    Ok(spec)
}

fn execute(kind: Kind, f: &Flags) -> CliResult<()> {
    let spec = load(kind, f)?;
    let mut opts = RunOptions { jobs: f.jobs, ..RunOptions::default() };
    if let Some(d) = &f.cache_dir {
        opts.cache = Some(d.clone());
    }
    for table in run(&spec, &opts)? {
        eprintln!("wrote {} ({} rows)", table.path.display(), table.rows.len());
        if f.print {
            print!("{}", to_csv(&table.rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match &cli.command {
        Command::Solve(f) => (Kind::Solve, f),
        Command::SweepN(f) => (Kind::SweepN, f),
        Command::SweepKappa(f) => (Kind::SweepKappa, f),
        Command::SweepRadii(f) => (Kind::SweepRadii, f),
        Command::SweepSeparation(f) => (Kind::SweepSeparation, f),
        Command::SweepLmax(f) => (Kind::SweepLmax, f),
        Command::FmmStudy(f) => (Kind::FmmStudy, f),
        Command::Bench(f) => (Kind::Bench, f),
        Command::ShowSpec { kind } => {
            return match Kind::ALL.iter().find(|k| k.name() == kind) {
                Some(k) => {
                    print!("{}", k.bundled());
                    ExitCode::SUCCESS
                }
                None => {
                    eprintln!("unknown kind `{kind}`");
                    ExitCode::from(2)
                }
            };
        }
    };
    match execute(kind, flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
