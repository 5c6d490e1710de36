//! GMRES and CG over abstract linear maps, plus the iteration bounds that
//! make the solver N-independent.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::operators::TheoryConstants;

/// Something that can be applied to a vector.
pub trait LinearMap {
    fn dim(&self) -> usize;
    /// y ← A x. `y` is fully overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn is_symmetric(&self) -> bool {
        false
    }
}

impl<T: LinearMap + ?Sized> LinearMap for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn is_symmetric(&self) -> bool {
        (**self).is_symmetric()
    }
}

/// Closure-backed map, handy for tests and small adapters.
pub struct FnMap<F> {
    pub dim: usize,
    pub symmetric: bool,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> LinearMap for FnMap<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Matvec-bearing iterations, the initial residual excluded.
    pub iterations: usize,
    /// ‖b − A x_k‖ / ‖b‖ for k = 0..=iterations.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Seconds spent in the solver loop.
    pub wall_time: f64,
    pub bound_r_epsilon: Option<usize>,
    pub bound_s_epsilon: Option<usize>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(map: &dyn LinearMap, rhs: &[f64], x0: Option<&[f64]>, tol: f64) -> Result<()> {
    if rhs.len() != map.dim() || x0.is_some_and(|x| x.len() != map.dim()) {
        return Err(Error::Domain(format!(
            "dimension mismatch: operator {} vs right-hand side {}",
            map.dim(),
            rhs.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    Ok(())
}

pub fn gmres(map: &dyn LinearMap, rhs: &[f64], tol: f64, maxit: usize, x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
    gmres_inner(map, rhs, tol, maxit, x0, None)
}

/// Full GMRES with modified Gram–Schmidt and Givens rotations.
///
/// `observer(k, x_k)` sees every iterate, including x_0. Forming the iterates
/// costs O(k·n) per step, so only pass a real observer when needed.
pub fn gmres_observed(
    map: &dyn LinearMap,
    rhs: &[f64],
    tol: f64,
    maxit: usize,
    x0: Option<&[f64]>,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveReport)> {
    gmres_inner(map, rhs, tol, maxit, x0, Some(observer))
}

fn gmres_inner(
    map: &dyn LinearMap,
    rhs: &[f64],
    tol: f64,
    maxit: usize,
    x0: Option<&[f64]>,
    mut observer: Option<&mut dyn FnMut(usize, &[f64])>,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(map, rhs, x0, tol)?;
    let start = Instant::now();
    let n = map.dim();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let bnorm = norm(rhs);
    let mut r = vec![0.0; n];
    map.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let beta = norm(&r);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut history = vec![beta / scale];
    if let Some(obs) = observer.as_mut() {
        obs(0, &x);
    }
    if beta / scale <= tol || beta == 0.0 {
        return Ok((x, report(0, history, true, start)));
    }

    let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
    // Columns of the rotated Hessenberg matrix, stored upper triangular.
    let mut hcols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut w = vec![0.0; n];
    let mut converged = false;
    let mut k = 0;
    while k < maxit.min(n.max(1)) {
        map.apply(&basis[k], &mut w);
        let mut h = vec![0.0; k + 2];
        for (j, v) in basis.iter().enumerate() {
            let hj = dot(&w, v);
            h[j] = hj;
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= hj * vi;
            }
        }
        let hnext = norm(&w);
        h[k + 1] = hnext;
        for j in 0..k {
            let t = cs[j] * h[j] + sn[j] * h[j + 1];
            h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
            h[j] = t;
        }
        let denom = h[k].hypot(h[k + 1]);
        let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[k] / denom, h[k + 1] / denom) };
        h[k] = denom;
        h[k + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g.push(-s * g[k]);
        g[k] *= c;
        h.truncate(k + 1);
        hcols.push(h);
        k += 1;
        let res = g[k].abs() / scale;
        // Minimal residual: never increases in exact arithmetic, clamp round-off.
        history.push(res.min(*history.last().unwrap()));
        let breakdown = hnext <= 1e-14 * beta;
        let done = res <= tol || breakdown;
        let last = done || k == maxit.min(n);
        if last || observer.is_some() {
            let y = back_substitute(&hcols, &g[..k]);
            let mut xk = x.clone();
            for (yj, v) in y.iter().zip(&basis) {
                for (xi, vi) in xk.iter_mut().zip(v) {
                    *xi += yj * vi;
                }
            }
            if let Some(obs) = observer.as_mut() {
                obs(k, &xk);
            }
            if last {
                converged = done;
                x = xk;
                break;
            }
        }
        basis.push(w.iter().map(|v| v / hnext).collect());
    }
    Ok((x, report(k, history, converged, start)))
}

fn back_substitute(cols: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let mut y = g.to_vec();
    for i in (0..k).rev() {
        for j in i + 1..k {
            y[i] -= cols[j][i] * y[j];
        }
        y[i] /= cols[i][i];
    }
    y
}

fn report(iterations: usize, residual_history: Vec<f64>, converged: bool, start: Instant) -> SolveReport {
    SolveReport {
        iterations,
        residual_history,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        bound_r_epsilon: None,
        bound_s_epsilon: None,
    }
}

pub fn cg(map: &dyn LinearMap, rhs: &[f64], tol: f64, maxit: usize, x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
    cg_observed(map, rhs, tol, maxit, x0, &mut |_, _| {})
}

/// Conjugate gradients. Fails on non-positive curvature.
pub fn cg_observed(
    map: &dyn LinearMap,
    rhs: &[f64],
    tol: f64,
    maxit: usize,
    x0: Option<&[f64]>,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(map, rhs, x0, tol)?;
    if !map.is_symmetric() {
        return Err(Error::Domain("conjugate gradients need a map flagged symmetric".into()));
    }
    let start = Instant::now();
    let n = map.dim();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let bnorm = norm(rhs);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut r = vec![0.0; n];
    map.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let mut rr = dot(&r, &r);
    let mut history = vec![rr.sqrt() / scale];
    observer(0, &x);
    if history[0] <= tol || rr == 0.0 {
        return Ok((x, report(0, history, true, start)));
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut k = 0;
    let mut converged = false;
    while k < maxit {
        map.apply(&p, &mut ap);
        let curv = dot(&p, &ap);
        if !(curv > 0.0) {
            return Err(Error::NotPositiveDefinite { curvature: curv, iteration: k + 1 });
        }
        let alpha = rr / curv;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        k += 1;
        history.push(rr_new.sqrt() / scale);
        observer(k, &x);
        if rr_new.sqrt() / scale <= tol {
            converged = true;
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Ok((x, report(k, history, converged, start)))
}

/// 2·((√κ − 1)/(√κ + 1))^k.
pub fn chebyshev_envelope(kappa_bound: f64, k: usize) -> f64 {
    let s = kappa_bound.max(1.0).sqrt();
    2.0 * ((s - 1.0) / (s + 1.0)).powi(k as i32)
}

fn bound_from(kappa_bound: f64, target: f64) -> Result<usize> {
    if !(kappa_bound.is_finite() && kappa_bound >= 1.0) {
        return Err(Error::Domain(format!("condition bound {kappa_bound} must be at least 1")));
    }
    if !(target > 0.0) {
        return Err(Error::Domain(format!("bound target {target} must be positive")));
    }
    if target >= 1.0 || kappa_bound == 1.0 {
        return Ok(1);
    }
    let s = kappa_bound.sqrt();
    let q = ((s - 1.0) / (s + 1.0)).ln();
    Ok(((target.ln() / q).ceil() as usize).max(1))
}

/// R_ε for GMRES on the reduced Galerkin system.
pub fn iteration_bound_gmres(c: &TheoryConstants, lmax: usize, epsilon: f64) -> Result<usize> {
    let eps_tilde = epsilon / c.max_contrast;
    bound_from(c.c_a_tilde / c.alpha0, eps_tilde / (lmax as f64 * c.upsilon_gmres))
}

/// S_ε for CG on the symmetrised system; uses the same constants as R_ε.
pub fn iteration_bound_cg(c: &TheoryConstants, lmax: usize, epsilon: f64) -> Result<usize> {
    iteration_bound_gmres(c, lmax, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: Vec<f64>) -> FnMap<impl Fn(&[f64], &mut [f64])> {
        FnMap {
            dim: d.len(),
            symmetric: true,
            f: move |x: &[f64], y: &mut [f64]| {
                for i in 0..x.len() {
                    y[i] = d[i] * x[i];
                }
            },
        }
    }

    #[test]
    fn identity_in_one_step() {
        let m = diag(vec![1.0; 5]);
        let b = [1.0, -2.0, 3.0, 0.5, 0.0];
        let (x, r) = gmres(&m, &b, 1e-12, 50, None).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(x.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-14));
        let (_, r) = cg(&m, &b, 1e-12, 50, None).unwrap();
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn two_by_two_diagonals() {
        let (x, r) = gmres(&diag(vec![1.0, 2.0]), &[1.0, 1.0], 1e-12, 10, None).unwrap();
        assert!(r.iterations <= 2 && r.converged);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
        let (x, r) = cg(&diag(vec![1.0, 4.0]), &[1.0, 1.0], 1e-12, 10, None).unwrap();
        assert!(r.iterations <= 2 && r.converged);
        assert!((x[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let (x, r) = gmres(&diag(vec![3.0; 4]), &[0.0; 4], 1e-10, 10, None).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cg_detects_indefinite() {
        let err = cg(&diag(vec![1.0, -1.0]), &[1.0, 1.0], 1e-12, 10, None).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn nonsymmetric_history_is_monotone() {
        let n = 30;
        let m = FnMap {
            dim: n,
            symmetric: false,
            f: move |x: &[f64], y: &mut [f64]| {
                for i in 0..n {
                    y[i] = (2.0 + i as f64 * 0.1) * x[i] + if i + 1 < n { 0.7 * x[i + 1] } else { 0.0 };
                }
            },
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let (x, r) = gmres(&m, &b, 1e-11, 100, None).unwrap();
        assert!(r.converged);
        assert!(r.residual_history.windows(2).all(|w| w[1] <= w[0]));
        let mut ax = vec![0.0; n];
        m.apply(&x, &mut ax);
        let res: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(res / norm(&b) < 1e-10);
    }

    #[test]
    fn observer_sees_every_iterate() {
        let mut seen = Vec::new();
        let m = diag(vec![1.0, 2.0, 3.0]);
        let (_, r) = gmres_observed(&m, &[1.0, 1.0, 1.0], 1e-12, 10, None, &mut |k, _| seen.push(k)).unwrap();
        assert_eq!(seen, (0..=r.iterations).collect::<Vec<_>>());
    }

    #[test]
    fn envelope_values() {
        assert_eq!(chebyshev_envelope(1.0, 3), 0.0);
        assert!((chebyshev_envelope(4.0, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert!(chebyshev_envelope(9.0, 4) < chebyshev_envelope(9.0, 3));
    }

    #[test]
    fn bound_formula_example() {
        let c = TheoryConstants {
            c_a_tilde: 4.0,
            beta_a_tilde: 1.0,
            alpha0: 1.0,
            upsilon_gmres: 10.0,
            c_equiv: 1.0,
            c_v: 1.0,
            max_contrast: 1.0,
        };
        assert_eq!(iteration_bound_gmres(&c, 5, 1e-6).unwrap(), 17);
        let well = TheoryConstants { c_a_tilde: 1.0001, ..c };
        assert!(iteration_bound_gmres(&well, 5, 1e-6).unwrap() <= 3);
    }
}
