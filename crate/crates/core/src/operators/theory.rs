use nalgebra::{DMatrix, SymmetricEigen};

use crate::dense::{reduce, single_layer_matrix};
use crate::error::{Error, Result};
use crate::geometry::{Configuration, SignClass};
use crate::harmonics::{degrees, BlockMethod};

use super::single_layer::{MatvecMode, SingleLayer};

/// Constants entering the N-independent iteration bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    /// Continuity constant of Ã.
    pub c_a_tilde: f64,
    /// Inf-sup constant of Ã.
    pub beta_a_tilde: f64,
    /// Lower spectral bound of Ã^sym.
    pub alpha0: f64,
    pub upsilon_gmres: f64,
    pub c_equiv: f64,
    pub c_v: f64,
    /// max |κ − κ0|/κ0.
    pub max_contrast: f64,
}

pub fn compute_theory_constants(config: &Configuration, c_equiv: f64, c_v: f64) -> Result<TheoryConstants> {
    if config.is_empty() {
        return Err(Error::InvalidConfig("configuration has no spheres".into()));
    }
    if !(c_v > 0.0 && c_equiv > 0.0) {
        return Err(Error::Domain(format!("constants must be positive (c_equiv = {c_equiv}, c_V = {c_v})")));
    }
    let k0 = config.kappa0;
    let contrasts = config.contrasts();
    let abs: Vec<f64> = contrasts.iter().map(|c| c.abs()).collect();
    let max_c = abs.iter().copied().fold(0.0, f64::max);
    let min_c = abs.iter().copied().fold(f64::INFINITY, f64::min);

    let alpha0 = match config.sign_class() {
        SignClass::AllGreater => 1.0,
        SignClass::AllLess => config.spheres.iter().map(|s| s.kappa / k0).fold(f64::INFINITY, f64::min),
        SignClass::Mixed => return Err(Error::MixedSign),
    };

    let mut beta_num = f64::INFINITY;
    for s in &config.spheres {
        let v = if s.kappa > k0 { (s.kappa - k0) / k0 } else { (s.kappa / k0) * (k0 - s.kappa) / k0 };
        beta_num = beta_num.min(v);
    }
    let beta = beta_num / max_c;
    let c_a = 1.0 + max_c * c_equiv / c_v.sqrt();

    let r3: Vec<f64> = config.spheres.iter().map(|s| s.radius.powi(3)).collect();
    let r3_ratio = r3.iter().copied().fold(0.0, f64::max) / r3.iter().copied().fold(f64::INFINITY, f64::min);
    // |κ−κ0| and |κ−κ0|/κ0 have the same extreme ratio.
    let upsilon = 2.0 * c_a / beta * r3_ratio * (max_c / min_c).sqrt() / min_c;

    Ok(TheoryConstants {
        c_a_tilde: c_a,
        beta_a_tilde: beta,
        alpha0,
        upsilon_gmres: upsilon,
        c_equiv,
        c_v,
        max_contrast: max_c,
    })
}

/// Reduced dimension up to which c_V is computed from a dense eigendecomposition.
const DENSE_LIMIT: usize = 2000;
const LANCZOS_STEPS: usize = 160;

/// Smallest value of ⟨x, V x⟩ / |||x|||*² over the reduced discrete space.
///
/// Exact (dense) for small problems. Above that the smallest Ritz value of a
/// fully reorthogonalised Lanczos run stands in; it is an attained Rayleigh
/// quotient and so bounds the true minimum from above.
pub fn estimate_c_v(config: &Configuration, lmax: usize) -> Result<f64> {
    if lmax == 0 {
        return Err(Error::Domain("the reduced space is empty for lmax = 0".into()));
    }
    let n = config.len();
    let deg: Vec<usize> = degrees(lmax).into_iter().skip(1).collect();
    let k = deg.len();
    // W^{-1/2} with dual weights r³/ℓ.
    let w: Vec<f64> = config
        .spheres
        .iter()
        .flat_map(|s| deg.iter().map(move |&l| (l as f64 / s.radius.powi(3)).sqrt()))
        .collect();
    let m = n * k;
    if m <= DENSE_LIMIT {
        let v = reduce(&single_layer_matrix(config, lmax, BlockMethod::Analytic)?, n, lmax);
        let s = DMatrix::from_fn(m, m, |i, j| w[i] * 0.5 * (v[(i, j)] + v[(j, i)]) * w[j]);
        let e = SymmetricEigen::new(s).eigenvalues;
        return Ok(e.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let op = SingleLayer::new(config, lmax, MatvecMode::Direct)?;
    let apply = |x: &[f64]| {
        let wx: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
        let mut y = vec![0.0; m];
        op.apply_reduced(&wx, &mut y);
        y.iter_mut().zip(&w).for_each(|(a, b)| *a *= b);
        y
    };
    Ok(lanczos_min(m, LANCZOS_STEPS, apply))
}

fn lanczos_min(m: usize, steps: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let mut q: Vec<Vec<f64>> = Vec::new();
    let start: Vec<f64> = (0..m).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract()).collect();
    let nrm = start.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.push(start.iter().map(|v| v / nrm).collect());
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..steps.min(m) {
        let mut w = apply(&q[j]);
        let a: f64 = w.iter().zip(&q[j]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for _ in 0..2 {
            for qi in &q {
                let c: f64 = w.iter().zip(qi).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(qi).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b < 1e-12 || j + 1 == steps.min(m) {
            break;
        }
        beta.push(b);
        q.push(w.iter().map(|v| v / b).collect());
    }
    let t = alpha.len();
    let mut tm = DMatrix::zeros(t, t);
    for i in 0..t {
        tm[(i, i)] = alpha[i];
        if i + 1 < t {
            tm[(i, i + 1)] = beta[i];
            tm[(i + 1, i)] = beta[i];
        }
    }
    SymmetricEigen::new(tm).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Sphere;

    fn lone(kappa: f64) -> Configuration {
        Configuration::new(vec![Sphere::new([0.0; 3], 1.0, kappa, 1.0)], 1.0).unwrap()
    }

    #[test]
    fn alpha0_by_sign() {
        assert_eq!(compute_theory_constants(&lone(10.0), 1.0, 1.0 / 3.0).unwrap().alpha0, 1.0);
        let low = Configuration::new(
            vec![Sphere::new([0.0; 3], 1.0, 0.5, 1.0), Sphere::new([3.0, 0.0, 0.0], 1.0, 0.5, 1.0)],
            1.0,
        )
        .unwrap();
        assert_eq!(compute_theory_constants(&low, 1.0, 0.3).unwrap().alpha0, 0.5);
    }

    #[test]
    fn beta_for_uniform_kappa() {
        let c = compute_theory_constants(&lone(10.0), 1.0, 0.25).unwrap();
        assert!((c.beta_a_tilde - 1.0).abs() < 1e-15);
        assert!((c.c_a_tilde - 19.0).abs() < 1e-14);
    }

    #[test]
    fn mixed_sign_has_no_alpha0() {
        let c = Configuration::new(
            vec![Sphere::new([0.0; 3], 1.0, 3.0, 1.0), Sphere::new([3.0, 0.0, 0.0], 1.0, 0.5, 1.0)],
            1.0,
        )
        .unwrap();
        assert!(compute_theory_constants(&c, 1.0, 0.3).is_err());
    }

    #[test]
    fn c_v_single_sphere() {
        assert!((estimate_c_v(&lone(10.0), 1).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn c_v_decoupling_and_monotonicity() {
        let pair = |d: f64| {
            Configuration::new(
                vec![Sphere::new([0.0; 3], 1.0, 10.0, 1.0), Sphere::new([d, 0.0, 0.0], 1.0, 10.0, 1.0)],
                1.0,
            )
            .unwrap()
        };
        let far = estimate_c_v(&pair(1e4), 3).unwrap();
        assert!((far - 1.0 / 3.0).abs() < 1e-6);
        let near = estimate_c_v(&pair(2.0001), 4).unwrap();
        let mid = estimate_c_v(&pair(3.0), 4).unwrap();
        assert!(near < mid);
    }

    #[test]
    fn lanczos_finds_smallest_of_diagonal() {
        let d: Vec<f64> = (0..300).map(|i| 1.0 + i as f64 * 0.01).collect();
        let e = lanczos_min(300, 120, |x| x.iter().zip(&d).map(|(a, b)| a * b).collect());
        assert!((e - 1.0).abs() < 1e-6);
    }
}
