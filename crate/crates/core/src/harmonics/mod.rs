//! Real spherical harmonics, quadrature on the sphere and the translation
//! machinery that couples expansions living on different spheres.
//!
//! Conventions: harmonics are real, L²(S²)-orthonormal and carry no
//! Condon–Shortley phase. For reference, with u = (x, y, z) on the unit sphere:
//!
//! ```text
//! Y_00  = 1/√(4π)
//! Y_1-1 = √(3/4π)·y      Y_10 = √(3/4π)·z      Y_11 = √(3/4π)·x
//! Y_2-2 = √(15/4π)·xy    Y_2-1 = √(15/4π)·yz   Y_20 = √(5/16π)·(3z²−1)
//! Y_21  = √(15/4π)·xz    Y_22  = √(15/16π)·(x²−y²)
//! ```
//!
//! Within a sphere the coefficient of (ℓ, m) sits at index ℓ² + ℓ + m.

mod plan;
mod quadrature;
mod solid;
mod translation;

pub use plan::{TranslationPlan, DEFAULT_CACHE_BYTES};
pub use quadrature::{gauss_legendre, project_onto_sphere, quadrature_rule, QuadratureRule};
pub use solid::{
    irregular_solid, regular_solid, stencil, translation_matrix, Stencil, TranslationKind,
};
pub use translation::{
    local_to_projection_scale, multipole_scale, translation_block, BlockMethod,
    TranslationBlock,
};

use crate::error::{Error, Result};

/// Highest degree supported by the Legendre recurrences.
pub const MAX_DEGREE: usize = 64;

/// Degree/order pair of a real spherical harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShIndex {
    pub l: usize,
    pub m: i64,
}

impl ShIndex {
    pub fn new(l: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(Error::Domain(format!("order {m} exceeds degree {l}")));
        }
        Ok(Self { l, m })
    }

    /// Position within a per-sphere block.
    #[inline]
    pub fn flat(self) -> usize {
        sh_index(self.l, self.m)
    }

    pub fn from_flat(k: usize) -> Self {
        let l = (k as f64).sqrt() as usize;
        let l = if (l + 1) * (l + 1) <= k { l + 1 } else if l * l > k { l - 1 } else { l };
        Self { l, m: k as i64 - (l * l + l) as i64 }
    }
}

/// Flat index of (ℓ, m) within one sphere.
#[inline]
pub fn sh_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Number of harmonics with degree ≤ lmax.
#[inline]
pub fn sh_count(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 1)
}

/// Degree of every flat index up to lmax.
pub fn degrees(lmax: usize) -> Vec<usize> {
    (0..=lmax).flat_map(|l| std::iter::repeat(l).take(2 * l + 1)).collect()
}

/// Homogeneous real harmonic polynomials |v|^ℓ Y_ℓm(v/|v|) for ℓ ≤ lmax.
///
/// Works for any vector, including zero, without dividing by |v|.
pub fn homogeneous_sh(v: [f64; 3], lmax: usize, out: &mut [f64]) {
    assert!(lmax <= MAX_DEGREE, "degree {lmax} above supported maximum");
    assert!(out.len() >= sh_count(lmax));
    let [x, y, z] = v;
    let rho2 = x * x + y * y + z * z;
    let inv_sqrt_4pi = 0.5 / std::f64::consts::PI.sqrt();
    let sqrt2 = std::f64::consts::SQRT_2;

    // (x + iy)^m carries the azimuthal factor and the sin^m θ weight.
    let mut cm = 1.0;
    let mut sm = 0.0;
    // q_m^m of the reduced recurrence.
    let mut qmm = inv_sqrt_4pi;
    for m in 0..=lmax {
        if m > 0 {
            let (c, s) = (cm * x - sm * y, cm * y + sm * x);
            cm = c;
            sm = s;
            qmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        let mut q_lm2 = 0.0;
        let mut q_lm1 = qmm;
        for l in m..=lmax {
            let q = if l == m {
                qmm
            } else if l == m + 1 {
                ((2 * m + 3) as f64).sqrt() * z * qmm
            } else {
                let lf = l as f64;
                let mf = m as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                    .sqrt();
                a * (z * q_lm1 - b * rho2 * q_lm2)
            };
            if l > m {
                q_lm2 = q_lm1;
                q_lm1 = q;
            }
            if m == 0 {
                out[sh_index(l, 0)] = q;
            } else {
                out[sh_index(l, m as i64)] = sqrt2 * q * cm;
                out[sh_index(l, -(m as i64))] = sqrt2 * q * sm;
            }
        }
    }
}

/// All real harmonics up to lmax at a unit vector (no validation).
pub fn real_sh_all(u: [f64; 3], lmax: usize, out: &mut [f64]) {
    homogeneous_sh(u, lmax, out);
}

/// Single real harmonic at a unit vector.
pub fn eval_real_sh(idx: ShIndex, u: [f64; 3]) -> Result<f64> {
    let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!("evaluation point has norm {n}, expected 1")));
    }
    if idx.m.unsigned_abs() as usize > idx.l {
        return Err(Error::Domain(format!("order {} exceeds degree {}", idx.m, idx.l)));
    }
    let mut buf = vec![0.0; sh_count(idx.l)];
    homogeneous_sh(u, idx.l, &mut buf);
    Ok(buf[idx.flat()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn closed_forms_low_degree() {
        let u = [0.36, -0.48, 0.8];
        let [x, y, z] = u;
        let mut y_all = vec![0.0; 9];
        real_sh_all(u, 2, &mut y_all);
        let c1 = (3.0 / (4.0 * PI)).sqrt();
        let c2 = (15.0 / (4.0 * PI)).sqrt();
        let expect = [
            0.5 / PI.sqrt(),
            c1 * y,
            c1 * z,
            c1 * x,
            c2 * x * y,
            c2 * y * z,
            (5.0 / (16.0 * PI)).sqrt() * (3.0 * z * z - 1.0),
            c2 * x * z,
            (15.0 / (16.0 * PI)).sqrt() * (x * x - y * y),
        ];
        for (a, b) in y_all.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn frozen_values() {
        let y00 = eval_real_sh(ShIndex::new(0, 0).unwrap(), [0.6, 0.0, 0.8]).unwrap();
        assert!((y00 - 0.28209479).abs() < 1e-8);
        let y10 = eval_real_sh(ShIndex::new(1, 0).unwrap(), [0.0, 0.0, 1.0]).unwrap();
        assert!((y10 - 0.48860251).abs() < 1e-8);
    }

    #[test]
    fn rejects_non_unit_argument() {
        assert!(eval_real_sh(ShIndex { l: 1, m: 0 }, [0.0, 0.0, 1.1]).is_err());
        assert!(ShIndex::new(1, 2).is_err());
    }

    #[test]
    fn flat_index_round_trip() {
        for k in 0..sh_count(12) {
            assert_eq!(ShIndex::from_flat(k).flat(), k);
        }
        assert_eq!(ShIndex::from_flat(8), ShIndex { l: 2, m: 2 });
    }

    #[test]
    fn homogeneous_scaling() {
        let v = [0.3, -1.2, 0.7];
        let r = (0.09f64 + 1.44 + 0.49).sqrt();
        let u = [v[0] / r, v[1] / r, v[2] / r];
        let mut a = vec![0.0; sh_count(9)];
        let mut b = vec![0.0; sh_count(9)];
        homogeneous_sh(v, 9, &mut a);
        real_sh_all(u, 9, &mut b);
        for (k, l) in degrees(9).into_iter().enumerate() {
            assert!((a[k] - r.powi(l as i32) * b[k]).abs() < 1e-12 * r.powi(l as i32));
        }
    }
}
