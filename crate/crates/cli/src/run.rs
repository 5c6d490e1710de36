//! Experiment drivers: one per spec kind.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dielectric::hierarchical::FarFieldParams;
use dielectric::operators::{uniform_free_charge, MatvecMode, SingleLayer};
use dielectric::strategies::{
    cache_dir, discretisation_error, error_trace, first_below, reference_solution_in, relative_error,
    solve_with, write_solution, ErrorMeter, Normalisation, SolveRequest,
};
use dielectric::Configuration;

use crate::csv::{emit_csv, ResultRow};
use crate::error::CliResult;
use crate::spec::{ExperimentSpec, Kind};

/// Tolerance of the pure-discrete "true" solutions the sweeps measure against.
pub const TRUE_SOLUTION_TOL: f64 = 1e-13;
/// Tolerance of the high-degree reference in the far-field study.
pub const REFERENCE_TOL: f64 = 1e-13;
pub const REFERENCE_LMAX: usize = 20;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads for independent cells.
    pub jobs: usize,
    /// Reference-solution cache; `None` disables it.
    pub cache: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1, cache: Some(cache_dir()) }
    }
}

/// Rows destined for one CSV file.
#[derive(Debug, Clone)]
pub struct Table {
    pub path: PathBuf,
    pub rows: Vec<ResultRow>,
}

/// Runs the experiment and writes every table.
pub fn run(spec: &ExperimentSpec, opts: &RunOptions) -> CliResult<Vec<Table>> {
    let tables = compute(spec, opts)?;
    for t in &tables {
        emit_csv(&t.rows, &t.path)?;
    }
    Ok(tables)
}

/// Runs the experiment without writing anything.
pub fn compute(spec: &ExperimentSpec, opts: &RunOptions) -> CliResult<Vec<Table>> {
    spec.validate()?;
    let sweep = spec.sweep.clone().unwrap_or_default();
    let base = spec.output.path.clone();
    match spec.kind {
        Kind::Solve => Ok(vec![Table { path: base, rows: solve(spec)? }]),
        Kind::SweepN | Kind::SweepKappa | Kind::SweepRadii | Kind::SweepSeparation => {
            let cells = sweep
                .values
                .iter()
                .map(|&v| sweep_cell(spec, v, None))
                .collect::<CliResult<Vec<_>>>()?;
            Ok(vec![Table { path: base, rows: error_cells(spec, cells, opts)? }])
        }
        Kind::SweepLmax => {
            let mut out = Vec::new();
            for &sep in &sweep.separations {
                let cells = sweep
                    .values
                    .iter()
                    .map(|&l| sweep_cell(spec, sep, Some(l as usize)).map(|c| Cell { param: l, ..c }))
                    .collect::<CliResult<Vec<_>>>()?;
                let path = if sweep.separations.len() > 1 { suffixed(&base, &format!("sep{sep:e}")) } else { base.clone() };
                out.push(Table { path, rows: error_cells(spec, cells, opts)? });
            }
            Ok(out)
        }
        Kind::FmmStudy => per_lmax(spec, &base, |l| fmm_study(spec, l, opts)),
        Kind::Bench => per_lmax(spec, &base, |l| bench(spec, l, opts)),
    }
}

fn per_lmax(
    spec: &ExperimentSpec,
    base: &Path,
    mut f: impl FnMut(usize) -> CliResult<Vec<ResultRow>>,
) -> CliResult<Vec<Table>> {
    let lmaxes = lmax_list(spec);
    let mut out = Vec::new();
    for &l in &lmaxes {
        let path = if lmaxes.len() > 1 { suffixed(base, &format!("l{l}")) } else { base.to_path_buf() };
        out.push(Table { path, rows: f(l)? });
    }
    Ok(out)
}

fn lmax_list(spec: &ExperimentSpec) -> Vec<usize> {
    let mut v = vec![spec.solver.lmax];
    for l in spec.sweep.iter().flat_map(|s| s.lmax_values.iter().copied()) {
        if !v.contains(&l) {
            v.push(l);
        }
    }
    v
}

/// `dir/name.csv` becomes `dir/name-tag.csv`.
pub fn suffixed(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{tag}"),
    };
    path.with_file_name(name)
}

struct Cell {
    param: f64,
    config: Configuration,
    lmax: usize,
}

/// Geometry for one swept value.
fn sweep_cell(spec: &ExperimentSpec, value: f64, lmax: Option<usize>) -> CliResult<Cell> {
    let lmax = lmax.unwrap_or(spec.solver.lmax);
    let g = &spec.geometry;
    let config = match spec.kind {
        Kind::SweepN => {
            let s = value as usize;
            spec.configuration(Some([s, s, s]), None)?
        }
        Kind::SweepKappa => {
            let mut c = spec.configuration(None, None)?;
            for s in &mut c.spheres {
                s.kappa = value * c.kappa0;
            }
            c
        }
        Kind::SweepRadii => {
            let mut sub = spec.clone();
            let first = g.species[0];
            sub.geometry.species =
                vec![first, crate::spec::SpeciesSpec { radius: value, charge: -first.charge, ..first }];
            sub.configuration(None, None)?
        }
        Kind::SweepSeparation | Kind::SweepLmax => {
            let mut radii: Vec<f64> = g.species.iter().map(|s| s.radius).collect();
            radii.sort_by(|a, b| b.total_cmp(a));
            let reach = if radii.len() == 1 { 2.0 * radii[0] } else { radii[0] + radii[1] };
            spec.configuration(None, Some(reach + value))?
        }
        _ => unreachable!("not a sweep kind"),
    };
    let param = match spec.kind {
        Kind::SweepN => config.len() as f64,
        Kind::SweepRadii => {
            let r0 = g.species[0].radius;
            r0.max(value) / r0.min(value)
        }
        _ => value,
    };
    Ok(Cell { param, config, lmax })
}

/// Runs `f` over cells with up to `jobs` threads, preserving no order.
fn par_cells<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> CliResult<R> + Sync,
) -> CliResult<Vec<R>> {
    let next = AtomicUsize::new(0);
    let out = Mutex::new(Vec::new());
    let fail = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() || fail.lock().unwrap().is_some() {
                    break;
                }
                match f(&items[i]) {
                    Ok(r) => out.lock().unwrap().push(r),
                    Err(e) => *fail.lock().unwrap() = Some(e),
                }
            });
        }
    });
    match fail.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(out.into_inner().unwrap()),
    }
}

/// Iterations to reach each relative error target, per method.
fn error_cells(spec: &ExperimentSpec, cells: Vec<Cell>, opts: &RunOptions) -> CliResult<Vec<ResultRow>> {
    let rows = par_cells(&cells, opts.jobs, |cell| error_cell(spec, cell, opts))?;
    Ok(rows.into_iter().flatten().collect())
}

/// Residual tolerance used while tracing errors; by default the tolerance of
/// the true solution itself, so every error target is reachable.
pub fn tracing_tolerance(spec: &ExperimentSpec) -> f64 {
    spec.solver.residual_tol.unwrap_or(TRUE_SOLUTION_TOL)
}

fn error_cell(spec: &ExperimentSpec, cell: &Cell, opts: &RunOptions) -> CliResult<Vec<ResultRow>> {
    let truth = reference_solution_in(&cell.config, cell.lmax, TRUE_SOLUTION_TOL, opts.cache.as_deref())?;
    let meter = ErrorMeter::new(&cell.config, &truth, cell.lmax, Normalisation::Theorem)?;
    let v = SingleLayer::new(&cell.config, cell.lmax, spec.matvec_mode(cell.lmax))?;
    let mut rows = Vec::new();
    for method in spec.methods() {
        let mut req = SolveRequest::new(method, tracing_tolerance(spec));
        req.maxit = spec.solver.maxit;
        let (trace, res) = error_trace(&cell.config, &v, &req, &meter)?;
        for &tol in &spec.solver.tol {
            let hit = first_below(&trace, tol);
            rows.push(ResultRow {
                kind: spec.kind.name().into(),
                param: cell.param,
                solver: method.name().into(),
                tol,
                iterations: hit,
                rel_error: hit.map(|k| trace[k]),
                rel_residual: hit.map(|k| res.report.residual_history[k]),
                wall_time_s: res.report.wall_time,
            });
        }
    }
    Ok(rows)
}

fn solve(spec: &ExperimentSpec) -> CliResult<Vec<ResultRow>> {
    let config = spec.configuration(None, None)?;
    let lmax = spec.solver.lmax;
    let v = SingleLayer::new(&config, lmax, spec.matvec_mode(lmax))?;
    let sf = uniform_free_charge(&config, lmax);
    let mut rows = Vec::new();
    for method in spec.methods() {
        for &tol in &spec.solver.tol {
            let mut req = SolveRequest::new(method, tol);
            req.maxit = spec.solver.maxit;
            let res = solve_with(&config, &v, &sf, &req, None)?;
            if let Some(p) = &spec.output.solution {
                write_solution(p, &res.nu)?;
            }
            rows.push(ResultRow {
                kind: spec.kind.name().into(),
                param: config.len() as f64,
                solver: method.name().into(),
                tol,
                iterations: Some(res.report.iterations),
                rel_error: None,
                rel_residual: Some(res.report.final_residual()),
                wall_time_s: res.report.wall_time,
            });
        }
    }
    Ok(rows)
}

/// Far-field variants compared in the study, with their row labels.
fn far_field_variants(spec: &ExperimentSpec, lmax: usize) -> Vec<(String, FarFieldParams)> {
    let sweep = spec.sweep.clone().unwrap_or_default();
    let mut out = Vec::new();
    for &d in &sweep.depths {
        for &p in &sweep.degrees {
            out.push((format!("fmm-D{d}-P{p}"), FarFieldParams::with_depth(p, d)));
        }
    }
    for &cap in &sweep.leaf_caps {
        out.push((format!("fmm-cap{cap}-P{}", 2 * lmax), FarFieldParams::with_leaf_cap(2 * lmax, cap)));
    }
    out
}

/// Far-field error against the pure-discrete solution and discretisation error
/// against the high-degree reference, one lattice size per cell.
fn fmm_study(spec: &ExperimentSpec, lmax: usize, opts: &RunOptions) -> CliResult<Vec<ResultRow>> {
    let sweep = spec.sweep.clone().unwrap_or_default();
    let ref_lmax = sweep.reference_lmax.unwrap_or(REFERENCE_LMAX);
    let tol = spec.solver.tol[0];
    let method = spec.methods()[0];
    let sides: Vec<usize> = sweep.values.iter().map(|v| *v as usize).collect();
    let rows = par_cells(&sides, opts.jobs, |&s| {
        let config = spec.configuration(Some([s, s, s]), None)?;
        let n = config.len() as f64;
        let row = |solver: String, iterations, err, res: f64, wall| ResultRow {
            kind: spec.kind.name().into(),
            param: n,
            solver,
            tol,
            iterations: Some(iterations),
            rel_error: Some(err),
            rel_residual: Some(res),
            wall_time_s: wall,
        };
        let sf = uniform_free_charge(&config, lmax);
        let mut req = SolveRequest::new(method, tol);
        req.maxit = spec.solver.maxit;
        let direct = SingleLayer::new(&config, lmax, MatvecMode::Direct)?;
        let pure = solve_with(&config, &direct, &sf, &req, None)?;
        let reference = reference_solution_in(&config, ref_lmax, REFERENCE_TOL, opts.cache.as_deref())?;
        let disc = discretisation_error(&config, &pure, &reference)?;
        let mut rows = vec![row(
            "discretisation".into(),
            pure.report.iterations,
            disc,
            pure.report.final_residual(),
            pure.report.wall_time,
        )];
        for (label, params) in far_field_variants(spec, lmax) {
            let v = SingleLayer::new(&config, lmax, MatvecMode::Hierarchical(params))?;
            let approx = solve_with(&config, &v, &sf, &req, None)?;
            let err = relative_error(&config, &approx, &pure, Normalisation::Plain)?;
            rows.push(row(label, approx.report.iterations, err, approx.report.final_residual(), approx.report.wall_time));
        }
        Ok(rows)
    })?;
    Ok(rows.into_iter().flatten().collect())
}

/// Solver wall time with the hierarchical matvec.
fn bench(spec: &ExperimentSpec, lmax: usize, opts: &RunOptions) -> CliResult<Vec<ResultRow>> {
    let sweep = spec.sweep.clone().unwrap_or_default();
    let sides: Vec<usize> = sweep.values.iter().map(|v| *v as usize).collect();
    let rows = par_cells(&sides, opts.jobs, |&s| {
        let config = spec.configuration(Some([s, s, s]), None)?;
        let v = SingleLayer::new(&config, lmax, spec.matvec_mode(lmax))?;
        let sf = uniform_free_charge(&config, lmax);
        let mut rows = Vec::new();
        for method in spec.methods() {
            for &tol in &spec.solver.tol {
                let mut req = SolveRequest::new(method, tol);
                req.maxit = spec.solver.maxit;
                let res = solve_with(&config, &v, &sf, &req, None)?;
                rows.push(ResultRow {
                    kind: spec.kind.name().into(),
                    param: config.len() as f64,
                    solver: method.name().into(),
                    tol,
                    iterations: Some(res.report.iterations),
                    rel_error: None,
                    rel_residual: Some(res.report.final_residual()),
                    wall_time_s: res.report.wall_time,
                });
            }
        }
        Ok(rows)
    })?;
    Ok(rows.into_iter().flatten().collect())
}
