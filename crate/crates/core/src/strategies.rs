//! End-to-end pipelines: right-hand side, Krylov solve, reconstruction of the
//! induced charge; plus reference solutions and error metrics.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Configuration, SignClass};
use crate::krylov::{cg_observed, gmres_observed, iteration_bound_cg, iteration_bound_gmres, LinearMap, SolveReport};
use crate::operators::{
    assemble_rhs, reconstruct_nu, triple_norm_dual, uniform_free_charge, ASymGalerkin, AStarGalerkin,
    ATildeGalerkin, CoeffVector, MatvecMode, Repr, SingleLayer, Space, TheoryConstants,
};

/// Environment variable naming the reference-solution cache directory.
pub const CACHE_ENV: &str = "DIELECTRIC_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Gmres,
    Cg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gmres => "gmres",
            Method::Cg => "cg",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrategyResult {
    /// Induced surface charge, full space, expansion coefficients.
    pub nu: CoeffVector,
    /// Surface potential unknown, reduced space, expansion coefficients.
    pub lambda: CoeffVector,
    /// Free charge used, full space, expansion coefficients.
    pub free_charge: CoeffVector,
    pub report: SolveReport,
    /// Set when the configuration is mixed-sign and the unsymmetrised fallback ran.
    pub outside_theory: bool,
    pub relative_error_vs_reference: Option<f64>,
    pub theorem_normalised_error: Option<f64>,
}

/// Everything a solve needs besides the geometry.
pub struct SolveRequest<'a> {
    pub method: Method,
    pub tol: f64,
    pub maxit: usize,
    pub x0: Option<&'a [f64]>,
    /// Theory constants to stamp R_ε / S_ε into the report, with the target ε.
    pub bounds: Option<(TheoryConstants, f64)>,
}

impl SolveRequest<'_> {
    pub fn new(method: Method, tol: f64) -> Self {
        Self { method, tol, maxit: 2000, x0: None, bounds: None }
    }
}

pub fn solve_gmres_strategy(config: &Configuration, lmax: usize, tol: f64, mode: MatvecMode) -> Result<StrategyResult> {
    let v = SingleLayer::new(config, lmax, mode)?;
    solve_with(config, &v, &uniform_free_charge(config, lmax), &SolveRequest::new(Method::Gmres, tol), None)
}

pub fn solve_cg_strategy(config: &Configuration, lmax: usize, tol: f64, mode: MatvecMode) -> Result<StrategyResult> {
    let v = SingleLayer::new(config, lmax, mode)?;
    solve_with(config, &v, &uniform_free_charge(config, lmax), &SolveRequest::new(Method::Cg, tol), None)
}

/// Runs one strategy on a prepared V. `observer(k, ν_k)` sees the induced
/// charge reconstructed from every iterate.
pub fn solve_with(
    config: &Configuration,
    v: &SingleLayer,
    sigma_f: &CoeffVector,
    req: &SolveRequest<'_>,
    mut observer: Option<&mut dyn FnMut(usize, &CoeffVector)>,
) -> Result<StrategyResult> {
    let (n, lmax) = (config.len(), v.lmax());
    sigma_f.expect(Space::Full, Repr::Expansion)?;
    let sigma_f = sigma_f.truncate_q(lmax);
    let mixed = config.sign_class() == SignClass::Mixed;
    if mixed && req.method == Method::Cg {
        return Err(Error::MixedSign);
    }
    if mixed {
        return solve_mixed(config, v, sigma_f, req, observer);
    }
    let b = assemble_rhs(config, v, &sigma_f)?;
    let to_lambda = |x: &[f64], scale: Option<&[f64]>| -> CoeffVector {
        let vals = match scale {
            Some(d) => x.iter().zip(d).map(|(a, s)| a / s).collect(),
            None => x.to_vec(),
        };
        CoeffVector { values: vals, n, lmax, space: Space::Reduced, repr: Repr::Expansion }
    };
    let (lambda, mut report) = match req.method {
        Method::Gmres => {
            let a = ATildeGalerkin::new(config, v)?;
            let mut obs = |k: usize, x: &[f64]| {
                if let Some(o) = observer.as_mut() {
                    if let Ok(nu) = reconstruct_nu(config, &to_lambda(x, None), &sigma_f) {
                        o(k, &nu);
                    }
                }
            };
            let (x, rep) = gmres_observed(&a, &b.values, req.tol, req.maxit, req.x0, &mut obs)?;
            (to_lambda(&x, None), rep)
        }
        Method::Cg => {
            let a = ASymGalerkin::new(config, v)?;
            let d = a.d_sqrt().to_vec();
            let rhs: Vec<f64> = b.values.iter().zip(&d).map(|(x, s)| x * s).collect();
            let y0: Option<Vec<f64>> = req.x0.map(|x| x.iter().zip(&d).map(|(a, s)| a * s).collect());
            let mut obs = |k: usize, y: &[f64]| {
                if let Some(o) = observer.as_mut() {
                    if let Ok(nu) = reconstruct_nu(config, &to_lambda(y, Some(&d)), &sigma_f) {
                        o(k, &nu);
                    }
                }
            };
            let (y, rep) = cg_observed(&a, &rhs, req.tol, req.maxit, y0.as_deref(), &mut obs)?;
            (to_lambda(&y, Some(&d)), rep)
        }
    };
    if let Some((c, eps)) = &req.bounds {
        report.bound_r_epsilon = iteration_bound_gmres(c, lmax, *eps).ok();
        report.bound_s_epsilon = iteration_bound_cg(c, lmax, *eps).ok();
    }
    let nu = reconstruct_nu(config, &lambda, &sigma_f)?;
    Ok(StrategyResult {
        nu,
        lambda,
        free_charge: sigma_f,
        report,
        outside_theory: false,
        relative_error_vs_reference: None,
        theorem_normalised_error: None,
    })
}

/// GMRES directly on A* ν = (4π/κ0)·Q σf. No convergence theory covers this.
fn solve_mixed(
    config: &Configuration,
    v: &SingleLayer,
    sigma_f: CoeffVector,
    req: &SolveRequest<'_>,
    mut observer: Option<&mut dyn FnMut(usize, &CoeffVector)>,
) -> Result<StrategyResult> {
    let (n, lmax) = (config.len(), v.lmax());
    let a = AStarGalerkin::new(config, v);
    let b = sigma_f.to_projection(v.radii()).scaled(4.0 * PI / config.kappa0);
    let wrap = |x: &[f64]| CoeffVector { values: x.to_vec(), n, lmax, space: Space::Full, repr: Repr::Expansion };
    let mut obs = |k: usize, x: &[f64]| {
        if let Some(o) = observer.as_mut() {
            o(k, &wrap(x));
        }
    };
    let (x, report) = gmres_observed(&a, &b.values, req.tol, req.maxit, req.x0, &mut obs)?;
    let nu = wrap(&x);
    // λ = V ν, restricted to ℓ ≥ 1.
    let mut pot = vec![0.0; a.dim()];
    v.apply_full(&x, &mut pot);
    let lambda = CoeffVector { values: pot, n, lmax, space: Space::Full, repr: Repr::Projection }
        .to_expansion(v.radii())
        .to_reduced();
    Ok(StrategyResult {
        nu,
        lambda,
        free_charge: sigma_f,
        report,
        outside_theory: true,
        relative_error_vs_reference: None,
        theorem_normalised_error: None,
    })
}

/// Relative dual-norm Galerkin residual of A* ν = (4π/κ0)·Q σf.
pub fn reconstruction_residual(config: &Configuration, v: &SingleLayer, result: &StrategyResult) -> Result<f64> {
    let a = AStarGalerkin::new(config, v);
    let radii = v.radii();
    let mut r = vec![0.0; a.dim()];
    a.apply(&result.nu.values, &mut r);
    let rhs = result.free_charge.to_projection(radii).scaled(4.0 * PI / config.kappa0);
    for (ri, bi) in r.iter_mut().zip(&rhs.values) {
        *ri -= bi;
    }
    let res = CoeffVector { values: r, ..rhs.clone() }.to_expansion(radii);
    let den = triple_norm_dual(&rhs.to_expansion(radii), radii)?;
    if den == 0.0 {
        return Err(Error::ZeroNormaliser);
    }
    Ok(triple_norm_dual(&res, radii)? / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalisation {
    /// |||ν − ν_ref|||* / |||ν_ref|||*.
    Plain,
    /// Denominator |||P0⊥ν_ref|||* + (4π/κ0)|||P0⊥Qσf|||*.
    Theorem,
}

/// Dual-norm error against a fixed reference, reusable across iterates.
#[derive(Debug, Clone)]
pub struct ErrorMeter {
    reference: CoeffVector,
    radii: Vec<f64>,
    denominator: f64,
}

impl ErrorMeter {
    pub fn new(config: &Configuration, reference: &StrategyResult, lmax: usize, norm: Normalisation) -> Result<Self> {
        let radii: Vec<f64> = config.spheres.iter().map(|s| s.radius).collect();
        let nu = reference.nu.truncate_q(lmax);
        let denominator = match norm {
            Normalisation::Plain => triple_norm_dual(&nu, &radii)?,
            Normalisation::Theorem => {
                let sf = reference.free_charge.truncate_q(lmax).project_p0_perp();
                triple_norm_dual(&nu.project_p0_perp(), &radii)?
                    + 4.0 * PI / config.kappa0 * triple_norm_dual(&sf, &radii)?
            }
        };
        if !(denominator > 0.0) {
            return Err(Error::ZeroNormaliser);
        }
        Ok(Self { reference: nu, radii, denominator })
    }

    pub fn error(&self, nu: &CoeffVector) -> Result<f64> {
        nu.expect(Space::Full, Repr::Expansion)?;
        let approx = nu.truncate_q(self.reference.lmax);
        let mut diff = approx;
        diff.axpy(-1.0, &self.reference);
        Ok(triple_norm_dual(&diff, &self.radii)? / self.denominator)
    }
}

pub fn relative_error(
    config: &Configuration,
    approx: &StrategyResult,
    reference: &StrategyResult,
    norm: Normalisation,
) -> Result<f64> {
    if reference.nu.n != approx.nu.n {
        return Err(Error::SpaceMismatch {
            expected: format!("N = {}", reference.nu.n),
            found: format!("N = {}", approx.nu.n),
        });
    }
    ErrorMeter::new(config, reference, approx.nu.lmax, norm)?.error(&approx.nu)
}

/// Error of every iterate against `meter`, indexed by iteration.
pub fn error_trace(
    config: &Configuration,
    v: &SingleLayer,
    req: &SolveRequest<'_>,
    meter: &ErrorMeter,
) -> Result<(Vec<f64>, StrategyResult)> {
    let mut trace = Vec::new();
    let mut obs = |k: usize, nu: &CoeffVector| {
        trace.resize(k + 1, f64::NAN);
        trace[k] = meter.error(nu).unwrap_or(f64::NAN);
    };
    let sf = uniform_free_charge(config, v.lmax());
    let res = solve_with(config, v, &sf, req, Some(&mut obs))?;
    Ok((trace, res))
}

/// First iteration whose error is below `target`.
pub fn first_below(trace: &[f64], target: f64) -> Option<usize> {
    trace.iter().position(|e| *e < target)
}

/// |||ν − ν_ref|||* / |||ν_ref|||* with ν zero-padded to the reference degree,
/// so the unresolved tail of the reference counts as error.
pub fn discretisation_error(config: &Configuration, approx: &StrategyResult, reference: &StrategyResult) -> Result<f64> {
    let radii: Vec<f64> = config.spheres.iter().map(|s| s.radius).collect();
    let mut diff = approx.nu.truncate_q(reference.nu.lmax);
    diff.axpy(-1.0, &reference.nu);
    let den = triple_norm_dual(&reference.nu, &radii)?;
    if den == 0.0 {
        return Err(Error::ZeroNormaliser);
    }
    Ok(triple_norm_dual(&diff, &radii)? / den)
}

/// Largest N²·K² accepted for a direct-mode reference solve.
pub const REFERENCE_MAX_WORK: f64 = 2e11;

/// High-accuracy pure-discrete solution, cached on disk.
pub fn reference_solution(config: &Configuration, lmax_ref: usize, tol: f64) -> Result<StrategyResult> {
    reference_solution_in(config, lmax_ref, tol, Some(&cache_dir()))
}

pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV).map_or_else(|| std::env::temp_dir().join("dielectric-cache"), PathBuf::from)
}

pub fn reference_solution_in(config: &Configuration, lmax_ref: usize, tol: f64, dir: Option<&Path>) -> Result<StrategyResult> {
    let k = ((lmax_ref + 1) * (lmax_ref + 1)) as f64;
    let n = config.len() as f64;
    if n * n * k * k > REFERENCE_MAX_WORK {
        return Err(Error::ResourceGuard(format!(
            "reference solve with N = {n} at lmax = {lmax_ref} exceeds the direct-mode budget"
        )));
    }
    let key = config_digest(config, lmax_ref, tol);
    let sf = uniform_free_charge(config, lmax_ref);
    if let Some(dir) = dir {
        let (pn, pl) = (dir.join(format!("{key}.nu.bin")), dir.join(format!("{key}.lambda.bin")));
        if pn.exists() && pl.exists() {
            let nu = read_solution(&pn)?;
            let lambda = read_solution(&pl)?;
            if nu.n == config.len() && nu.lmax == lmax_ref {
                return Ok(StrategyResult {
                    nu,
                    lambda,
                    free_charge: sf,
                    report: SolveReport {
                        iterations: 0,
                        residual_history: vec![tol],
                        converged: true,
                        wall_time: 0.0,
                        bound_r_epsilon: None,
                        bound_s_epsilon: None,
                    },
                    outside_theory: config.sign_class() == SignClass::Mixed,
                    relative_error_vs_reference: None,
                    theorem_normalised_error: None,
                });
            }
        }
    }
    let v = SingleLayer::new(config, lmax_ref, MatvecMode::Direct)?;
    let mut req = SolveRequest::new(Method::Gmres, tol);
    req.maxit = 1000;
    let res = solve_with(config, &v, &sf, &req, None)?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        write_solution(&dir.join(format!("{key}.nu.bin")), &res.nu)?;
        write_solution(&dir.join(format!("{key}.lambda.bin")), &res.lambda)?;
    }
    Ok(res)
}

/// SHA-256 over every input that determines a reference solution.
pub fn config_digest(config: &Configuration, lmax: usize, tol: f64) -> String {
    let mut h = Sha256::new();
    h.update(b"dielectric-reference-v1");
    h.update((config.len() as u64).to_le_bytes());
    h.update(config.kappa0.to_le_bytes());
    for s in &config.spheres {
        for c in s.center {
            h.update(c.to_le_bytes());
        }
        h.update(s.radius.to_le_bytes());
        h.update(s.kappa.to_le_bytes());
        h.update(s.charge.to_le_bytes());
    }
    h.update((lmax as u64).to_le_bytes());
    h.update(tol.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

const MAGIC: &[u8; 8] = b"DSPHSOL\0";
const FORMAT_VERSION: u32 = 1;

/// Layout (little-endian): magic[8], version u32, N u64, lmax u32,
/// space u8 (0 full, 1 reduced), repr u8 (0 expansion, 1 projection),
/// 2 pad bytes, count u64, then `count` f64 in (sphere, ℓ, m) order.
pub fn write_solution(path: &Path, x: &CoeffVector) -> Result<()> {
    let mut buf = Vec::with_capacity(36 + 8 * x.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(x.n as u64).to_le_bytes());
    buf.extend_from_slice(&(x.lmax as u32).to_le_bytes());
    buf.push(match x.space {
        Space::Full => 0,
        Space::Reduced => 1,
    });
    buf.push(match x.repr {
        Repr::Expansion => 0,
        Repr::Projection => 1,
    });
    buf.extend_from_slice(&[0, 0]);
    buf.extend_from_slice(&(x.len() as u64).to_le_bytes());
    for v in &x.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    fs::File::create(&tmp)?.write_all(&buf)?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_solution(path: &Path) -> Result<CoeffVector> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 36 || &buf[..8] != MAGIC {
        return Err(Error::Format("missing magic header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = u64_at(12) as usize;
    let lmax = u32_at(20) as usize;
    let space = match buf[24] {
        0 => Space::Full,
        1 => Space::Reduced,
        t => return Err(Error::Format(format!("unknown space tag {t}"))),
    };
    let repr = match buf[25] {
        0 => Repr::Expansion,
        1 => Repr::Projection,
        t => return Err(Error::Format(format!("unknown representation tag {t}"))),
    };
    let count = u64_at(28) as usize;
    if buf.len() != 36 + 8 * count {
        return Err(Error::Format(format!("expected {count} values, file holds {} bytes", buf.len())));
    }
    let values = buf[36..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    CoeffVector::from_values(values, n, lmax, space, repr).map_err(|e| Error::Format(e.to_string()))
}
