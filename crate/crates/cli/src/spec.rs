//! Experiment specifications in TOML.

use std::path::{Path, PathBuf};

use dielectric::hierarchical::FarFieldParams;
use dielectric::operators::MatvecMode;
use dielectric::strategies::Method;
use dielectric::{build_lattice, Configuration, Pattern, Species, Sphere};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Solve,
    SweepN,
    SweepKappa,
    SweepRadii,
    SweepSeparation,
    SweepLmax,
    FmmStudy,
    Bench,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Solve,
        Kind::SweepN,
        Kind::SweepKappa,
        Kind::SweepRadii,
        Kind::SweepSeparation,
        Kind::SweepLmax,
        Kind::FmmStudy,
        Kind::Bench,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Solve => "solve",
            Kind::SweepN => "sweep-n",
            Kind::SweepKappa => "sweep-kappa",
            Kind::SweepRadii => "sweep-radii",
            Kind::SweepSeparation => "sweep-separation",
            Kind::SweepLmax => "sweep-lmax",
            Kind::FmmStudy => "fmm-study",
            Kind::Bench => "bench",
        }
    }

    /// The spec shipped in `specs/` for this kind.
    pub fn bundled(self) -> &'static str {
        match self {
            Kind::Solve => include_str!("../specs/solve.toml"),
            Kind::SweepN => include_str!("../specs/sweep-n.toml"),
            Kind::SweepKappa => include_str!("../specs/sweep-kappa.toml"),
            Kind::SweepRadii => include_str!("../specs/sweep-radii.toml"),
            Kind::SweepSeparation => include_str!("../specs/sweep-separation.toml"),
            Kind::SweepLmax => include_str!("../specs/sweep-lmax.toml"),
            Kind::FmmStudy => include_str!("../specs/fmm-study.toml"),
            Kind::Bench => include_str!("../specs/bench.toml"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub geometry: GeometrySpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub matvec: MatvecSpec,
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default = "one")]
    pub kappa0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_dims: Option<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub species: Vec<SpeciesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spheres: Vec<SphereSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub radius: f64,
    pub kappa: f64,
    pub charge: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternSpec {
    Alternating,
    Striped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSpec {
    pub center: [f64; 3],
    pub radius: f64,
    pub kappa: f64,
    pub charge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub method: Vec<MethodSpec>,
    /// Residual tolerances for `solve` and `bench`; relative error targets for sweeps.
    pub tol: Vec<f64>,
    pub lmax: usize,
    #[serde(default)]
    pub x0: InitialGuess,
    #[serde(default = "one")]
    pub c_equiv: f64,
    /// Residual tolerance used while tracing errors in sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default = "default_maxit")]
    pub maxit: usize,
}

fn default_maxit() -> usize {
    2000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodSpec {
    Gmres,
    Cg,
}

impl From<MethodSpec> for Method {
    fn from(m: MethodSpec) -> Self {
        match m {
            MethodSpec::Gmres => Method::Gmres,
            MethodSpec::Cg => Method::Cg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    #[default]
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    #[default]
    Direct,
    Hierarchical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatvecSpec {
    #[serde(default)]
    pub mode: ModeSpec,
    /// Box expansion degree; defaults to 2·lmax.
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    /// Optional binary dump of ν for `solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Swept values; meaning depends on the kind.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    /// sweep-lmax: the fixed minimum separations.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub separations: Vec<f64>,
    /// fmm-study: tree depths and expansion degrees to combine.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub depths: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degrees: Vec<usize>,
    /// fmm-study: leaf capacities, each paired with P = 2·lmax.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leaf_caps: Vec<usize>,
    /// fmm-study: additional discretisation degrees beyond solver.lmax.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lmax_values: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_lmax: Option<usize>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn bundled(kind: Kind) -> Self {
        Self::from_toml(kind.bundled()).expect("bundled specs are valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("specs serialise")
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |key: &str, msg: String| Err(CliError::Schema { key: key.to_string(), message: msg });
        if self.solver.tol.is_empty() {
            return bad("solver.tol", "at least one tolerance is required".into());
        }
        if let Some(t) = self.solver.tol.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return bad("solver.tol", format!("tolerance {t} outside (0, 1)"));
        }
        if self.solver.method.is_empty() {
            return bad("solver.method", "at least one method is required".into());
        }
        if self.solver.lmax < 1 {
            return bad("solver.lmax", "lmax must be at least 1".into());
        }
        if !(self.solver.c_equiv > 0.0) {
            return bad("solver.c_equiv", "must be positive".into());
        }
        if self.solver.maxit == 0 {
            return bad("solver.maxit", "must be positive".into());
        }
        let m = &self.matvec;
        if m.d.is_some() && m.leaf_cap.is_some() {
            return bad("matvec", "D and leaf_cap are mutually exclusive".into());
        }
        if m.mode == ModeSpec::Direct && (m.p.is_some() || m.d.is_some() || m.leaf_cap.is_some()) {
            return bad("matvec", "P, D and leaf_cap only apply to hierarchical mode".into());
        }
        if m.mode == ModeSpec::Hierarchical && m.d.is_none() && m.leaf_cap.is_none() {
            return bad("matvec", "hierarchical mode needs D or leaf_cap".into());
        }
        if let Some(params) = self.far_field(self.solver.lmax) {
            params.validate().map_err(|e| CliError::Schema { key: "matvec".into(), message: e.to_string() })?;
        }
        self.validate_geometry()?;
        let sweep = self.sweep.clone().unwrap_or_default();
        let needs_values = !matches!(self.kind, Kind::Solve);
        if needs_values && sweep.values.is_empty() {
            return bad("sweep.values", format!("{} needs swept values", self.kind.name()));
        }
        match self.kind {
            Kind::SweepN | Kind::FmmStudy | Kind::Bench => {
                if let Some(v) = sweep.values.iter().find(|v| !(v.fract() == 0.0 && **v >= 1.0)) {
                    return bad("sweep.values", format!("lattice side {v} is not a positive integer"));
                }
            }
            Kind::SweepKappa | Kind::SweepRadii => {
                if let Some(v) = sweep.values.iter().find(|v| !(**v > 0.0)) {
                    return bad("sweep.values", format!("value {v} must be positive"));
                }
            }
            Kind::SweepSeparation => {
                if let Some(v) = sweep.values.iter().find(|v| !(**v > 0.0)) {
                    return bad("sweep.values", format!("separation {v} must be positive"));
                }
            }
            Kind::SweepLmax => {
                if let Some(v) = sweep.values.iter().find(|v| !(v.fract() == 0.0 && **v >= 1.0)) {
                    return bad("sweep.values", format!("lmax {v} is not a positive integer"));
                }
                if sweep.separations.is_empty() {
                    return bad("sweep.separations", "sweep-lmax needs at least one separation".into());
                }
            }
            Kind::Solve => {}
        }
        if self.kind == Kind::FmmStudy
            && (sweep.depths.is_empty() || sweep.degrees.is_empty())
            && sweep.leaf_caps.is_empty()
        {
            return bad("sweep", "fmm-study needs depths with degrees, or leaf caps".into());
        }
        if self.output.solution.is_some() && (self.solver.method.len() != 1 || self.solver.tol.len() != 1) {
            return bad("output.solution", "a solution dump needs exactly one method and one tolerance".into());
        }
        if self.kind == Kind::Bench && m.mode != ModeSpec::Hierarchical {
            return bad("matvec.mode", "bench measures the hierarchical matvec".into());
        }
        Ok(())
    }

    fn validate_geometry(&self) -> CliResult<()> {
        let g = &self.geometry;
        let bad = |key: &str, msg: String| Err(CliError::Schema { key: key.to_string(), message: msg });
        if !(g.kappa0 > 0.0 && g.kappa0.is_finite()) {
            return bad("geometry.kappa0", format!("{} must be positive", g.kappa0));
        }
        let lattice = g.lattice_dims.is_some() || g.edge.is_some() || !g.species.is_empty() || g.pattern.is_some();
        match (lattice, g.spheres.is_empty()) {
            (true, false) => return bad("geometry", "give either a lattice recipe or explicit spheres".into()),
            (false, true) => return bad("geometry", "no spheres and no lattice recipe".into()),
            _ => {}
        }
        for (i, s) in g.species.iter().enumerate() {
            if !(s.radius > 0.0) {
                return bad(&format!("geometry.species[{i}].radius"), format!("{} must be positive", s.radius));
            }
            if !(s.kappa > 0.0) {
                return bad(&format!("geometry.species[{i}].kappa"), format!("{} must be positive", s.kappa));
            }
        }
        for (i, s) in g.spheres.iter().enumerate() {
            if !(s.radius > 0.0) {
                return bad(&format!("geometry.spheres[{i}].radius"), format!("{} must be positive", s.radius));
            }
            if !(s.kappa > 0.0) {
                return bad(&format!("geometry.spheres[{i}].kappa"), format!("{} must be positive", s.kappa));
            }
        }
        if lattice {
            if g.species.is_empty() {
                return bad("geometry.species", "a lattice needs at least one species".into());
            }
            if g.edge.is_none() && self.kind != Kind::SweepSeparation && self.kind != Kind::SweepLmax {
                return bad("geometry.edge", "a lattice needs an edge length".into());
            }
            let sized_by_sweep = matches!(self.kind, Kind::SweepN | Kind::FmmStudy | Kind::Bench);
            if g.lattice_dims.is_none() && !sized_by_sweep {
                return bad("geometry.lattice_dims", "a lattice needs dimensions".into());
            }
        }
        Ok(())
    }

    pub fn far_field(&self, lmax: usize) -> Option<FarFieldParams> {
        let m = &self.matvec;
        if m.mode == ModeSpec::Direct {
            return None;
        }
        let p = m.p.unwrap_or(2 * lmax);
        Some(match (m.d, m.leaf_cap) {
            (Some(d), _) => FarFieldParams::with_depth(p, d),
            (None, c) => FarFieldParams::with_leaf_cap(p, c.unwrap_or(32)),
        })
    }

    pub fn matvec_mode(&self, lmax: usize) -> MatvecMode {
        self.far_field(lmax).map_or(MatvecMode::Direct, MatvecMode::Hierarchical)
    }

    pub fn methods(&self) -> Vec<Method> {
        self.solver.method.iter().map(|m| Method::from(*m)).collect()
    }

    /// Configuration of the geometry section with optional overrides.
    pub fn configuration(&self, dims: Option<[usize; 3]>, edge: Option<f64>) -> CliResult<Configuration> {
        let g = &self.geometry;
        let config = if g.spheres.is_empty() {
            let [nx, ny, nz] = dims.or(g.lattice_dims).ok_or_else(|| CliError::Schema {
                key: "geometry.lattice_dims".into(),
                message: "lattice dimensions missing".into(),
            })?;
            let edge = edge.or(g.edge).ok_or_else(|| CliError::Schema {
                key: "geometry.edge".into(),
                message: "edge missing".into(),
            })?;
            let species: Vec<Species> =
                g.species.iter().map(|s| Species { radius: s.radius, kappa: s.kappa, charge: s.charge }).collect();
            let pattern = match g.pattern.unwrap_or(PatternSpec::Alternating) {
                PatternSpec::Alternating => Pattern::Alternating,
                PatternSpec::Striped => Pattern::Striped,
            };
            build_lattice(nx, ny, nz, edge, &species, pattern)?.with_kappa0(g.kappa0)?
        } else {
            let spheres = g.spheres.iter().map(|s| Sphere::new(s.center, s.radius, s.kappa, s.charge)).collect();
            Configuration::new(spheres, g.kappa0)?
        };
        Ok(config)
    }
}
