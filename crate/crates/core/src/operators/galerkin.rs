use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Configuration, SignClass};
use crate::harmonics::{degrees, sh_count};
use crate::krylov::LinearMap;

use super::coeff::{CoeffVector, Repr, Space};
use super::single_layer::SingleLayer;

/// +1 when every κ exceeds κ0, −1 when every κ is below it.
pub fn sign_of(config: &Configuration) -> Result<f64> {
    match config.sign_class() {
        SignClass::AllGreater => Ok(1.0),
        SignClass::AllLess => Ok(-1.0),
        SignClass::Mixed => Err(Error::MixedSign),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagonalRole {
    /// ℓ/r.
    Dtn,
    /// |κ−κ0|/κ0 · ℓ/r, acting on expansion coefficients.
    DtnKappa,
    /// Square root of `DtnKappa`.
    DtnKappaSqrt,
    /// |κ−κ0|/κ0|^½ · r² · (ℓ/r)^½: the similarity matrix in the pairing convention.
    DtnKappaMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    pub role: DiagonalRole,
    pub inverse: bool,
    pub space: Space,
    pub lmax: usize,
    pub values: Vec<f64>,
}

impl DiagonalOperator {
    pub fn inverted(&self) -> Self {
        let mut out = self.clone();
        out.inverse = !self.inverse;
        out.values = self.values.iter().map(|v| if *v == 0.0 { 0.0 } else { 1.0 / v }).collect();
        out
    }

    pub fn apply_slice(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.values) {
            *yi = d * xi;
        }
    }

    pub fn apply(&self, x: &CoeffVector) -> Result<CoeffVector> {
        if x.space != self.space || x.lmax != self.lmax || x.len() != self.values.len() {
            return Err(Error::SpaceMismatch {
                expected: format!("{:?}, lmax = {}, {} entries", self.space, self.lmax, self.values.len()),
                found: format!("{:?}, lmax = {}, {} entries", x.space, x.lmax, x.len()),
            });
        }
        let mut out = x.clone();
        self.apply_slice(&x.values, &mut out.values);
        Ok(out)
    }
}

/// Diagonal DtN-type operator in the given layout. ℓ = 0 entries are 0.
pub fn dtn_kappa_diagonal(config: &Configuration, lmax: usize, space: Space, role: DiagonalRole) -> DiagonalOperator {
    let skip = if space == Space::Reduced { 1 } else { 0 };
    let deg: Vec<usize> = degrees(lmax).into_iter().skip(skip).collect();
    let mut values = Vec::with_capacity(config.len() * deg.len());
    for s in &config.spheres {
        let c = ((s.kappa - config.kappa0) / config.kappa0).abs();
        let r = s.radius;
        for &l in &deg {
            let dtn = l as f64 / r;
            values.push(match role {
                DiagonalRole::Dtn => dtn,
                DiagonalRole::DtnKappa => c * dtn,
                DiagonalRole::DtnKappaSqrt => (c * dtn).sqrt(),
                DiagonalRole::DtnKappaMatrix => r * r * (c * dtn).sqrt(),
            });
        }
    }
    DiagonalOperator { role, inverse: false, space, lmax, values }
}

/// Interior DtN map: multiplies (i, ℓ, m) by ℓ/r_i. Zero on constants.
pub fn apply_dtn(config: &Configuration, x: &CoeffVector) -> Result<CoeffVector> {
    x.expect_compatible(config.len(), x.lmax)?;
    if x.repr != Repr::Expansion {
        return Err(Error::SpaceMismatch { expected: "Expansion".into(), found: format!("{:?}", x.repr) });
    }
    dtn_kappa_diagonal(config, x.lmax, x.space, DiagonalRole::Dtn).apply(x)
}

/// Convenience: one-off V application (builds the engine each call).
pub fn apply_v(config: &Configuration, x: &CoeffVector, mode: super::MatvecMode) -> Result<CoeffVector> {
    SingleLayer::new(config, x.lmax, mode)?.apply(x)
}

fn diag_r2(config: &Configuration, lmax: usize, space: Space) -> Vec<f64> {
    let k = space.per_sphere(lmax);
    config.spheres.iter().flat_map(|s| std::iter::repeat(s.radius * s.radius).take(k)).collect()
}

/// Galerkin form of Ã on reduced expansion coefficients: G x + s·V·D x.
#[derive(Debug)]
pub struct ATildeGalerkin<'a> {
    v: &'a SingleLayer,
    g: Vec<f64>,
    d: Vec<f64>,
    sign: f64,
}

impl<'a> ATildeGalerkin<'a> {
    pub fn new(config: &Configuration, v: &'a SingleLayer) -> Result<Self> {
        let sign = sign_of(config)?;
        let lmax = v.lmax();
        Ok(Self {
            v,
            g: diag_r2(config, lmax, Space::Reduced),
            d: dtn_kappa_diagonal(config, lmax, Space::Reduced, DiagonalRole::DtnKappa).values,
            sign,
        })
    }
}

impl LinearMap for ATildeGalerkin<'_> {
    fn dim(&self) -> usize {
        self.g.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let dx: Vec<f64> = x.iter().zip(&self.d).map(|(a, b)| a * b).collect();
        self.v.apply_reduced(&dx, y);
        for i in 0..y.len() {
            y[i] = self.g[i] * x[i] + self.sign * y[i];
        }
    }
}

/// Galerkin form of Ã^sym: G x + s·D^½·V·D^½ x. Symmetric positive definite.
#[derive(Debug)]
pub struct ASymGalerkin<'a> {
    v: &'a SingleLayer,
    g: Vec<f64>,
    d_sqrt: Vec<f64>,
    sign: f64,
}

impl<'a> ASymGalerkin<'a> {
    pub fn new(config: &Configuration, v: &'a SingleLayer) -> Result<Self> {
        let sign = sign_of(config)?;
        let lmax = v.lmax();
        Ok(Self {
            v,
            g: diag_r2(config, lmax, Space::Reduced),
            d_sqrt: dtn_kappa_diagonal(config, lmax, Space::Reduced, DiagonalRole::DtnKappaSqrt).values,
            sign,
        })
    }

    pub fn d_sqrt(&self) -> &[f64] {
        &self.d_sqrt
    }
}

impl LinearMap for ASymGalerkin<'_> {
    fn dim(&self) -> usize {
        self.g.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let dx: Vec<f64> = x.iter().zip(&self.d_sqrt).map(|(a, b)| a * b).collect();
        self.v.apply_reduced(&dx, y);
        for i in 0..y.len() {
            y[i] = self.g[i] * x[i] + self.sign * self.d_sqrt[i] * y[i];
        }
    }
    fn is_symmetric(&self) -> bool {
        true
    }
}

/// Galerkin form of A* on the full space: G x − C·DtN·V x with C = (κ0−κ)/κ0.
#[derive(Debug)]
pub struct AStarGalerkin<'a> {
    v: &'a SingleLayer,
    g: Vec<f64>,
    cd: Vec<f64>,
}

impl<'a> AStarGalerkin<'a> {
    pub fn new(config: &Configuration, v: &'a SingleLayer) -> Self {
        let c: Vec<f64> = config.spheres.iter().map(|s| (config.kappa0 - s.kappa) / config.kappa0).collect();
        Self::with_contrasts(config, v, &c)
    }

    /// Per-sphere contrasts supplied directly (zero contrast allowed).
    pub fn with_contrasts(config: &Configuration, v: &'a SingleLayer, contrasts: &[f64]) -> Self {
        let lmax = v.lmax();
        let deg = degrees(lmax);
        let mut cd = Vec::with_capacity(config.len() * deg.len());
        for (s, c) in config.spheres.iter().zip(contrasts) {
            for &l in &deg {
                cd.push(c * l as f64 / s.radius);
            }
        }
        Self { v, g: diag_r2(config, lmax, Space::Full), cd }
    }
}

impl LinearMap for AStarGalerkin<'_> {
    fn dim(&self) -> usize {
        self.g.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.v.apply_full(x, y);
        for i in 0..y.len() {
            y[i] = self.g[i] * x[i] - self.cd[i] * y[i];
        }
    }
}

fn operator_form(map: &dyn LinearMap, config: &Configuration, x: &CoeffVector, space: Space) -> Result<CoeffVector> {
    x.expect(space, Repr::Expansion)?;
    x.expect_compatible(config.len(), x.lmax)?;
    let mut out = x.clone();
    map.apply(&x.values, &mut out.values);
    let g = diag_r2(config, x.lmax, space);
    for (o, gi) in out.values.iter_mut().zip(g) {
        *o /= gi;
    }
    Ok(out)
}

/// Ã x in the operator sense (expansion in, expansion out).
pub fn apply_a_tilde(config: &Configuration, v: &SingleLayer, x: &CoeffVector) -> Result<CoeffVector> {
    operator_form(&ATildeGalerkin::new(config, v)?, config, x, Space::Reduced)
}

/// Ã^sym x in the operator sense.
pub fn apply_a_sym(config: &Configuration, v: &SingleLayer, x: &CoeffVector) -> Result<CoeffVector> {
    operator_form(&ASymGalerkin::new(config, v)?, config, x, Space::Reduced)
}

/// A* ν in the operator sense on the full space.
pub fn apply_a_star_full(config: &Configuration, v: &SingleLayer, x: &CoeffVector) -> Result<CoeffVector> {
    operator_form(&AStarGalerkin::new(config, v), config, x, Space::Full)
}

pub fn apply_a_star_with_contrasts(
    config: &Configuration,
    v: &SingleLayer,
    contrasts: &[f64],
    x: &CoeffVector,
) -> Result<CoeffVector> {
    if contrasts.len() != config.len() {
        return Err(Error::Domain(format!("{} contrasts for {} spheres", contrasts.len(), config.len())));
    }
    operator_form(&AStarGalerkin::with_contrasts(config, v, contrasts), config, x, Space::Full)
}

/// Uniform density q_i/(4π r_i²) on every sphere, as full-space expansion coefficients.
pub fn uniform_free_charge(config: &Configuration, lmax: usize) -> CoeffVector {
    let mut out = CoeffVector::zeros(config.len(), lmax, Space::Full, Repr::Expansion);
    for (i, s) in config.spheres.iter().enumerate() {
        out.set(i, 0, 0, s.free_charge_density() * (4.0 * PI).sqrt());
    }
    out
}

/// (4π/κ0)·(V Q σf, Y_ℓm) for ℓ ≥ 1, as a reduced projection vector.
pub fn assemble_rhs(config: &Configuration, v: &SingleLayer, sigma_f: &CoeffVector) -> Result<CoeffVector> {
    sigma_f.expect(Space::Full, Repr::Expansion)?;
    let q = sigma_f.truncate_q(v.lmax());
    let full = v.apply(&q)?;
    Ok(full.to_reduced().scaled(4.0 * PI / config.kappa0))
}

/// ν = ((κ0−κ)/κ0)·DtN λ + (4π/κ0)·Q σf, as full-space expansion coefficients.
pub fn reconstruct_nu(config: &Configuration, lambda: &CoeffVector, sigma_f: &CoeffVector) -> Result<CoeffVector> {
    lambda.expect(Space::Reduced, Repr::Expansion)?;
    sigma_f.expect(Space::Full, Repr::Expansion)?;
    lambda.expect_compatible(config.len(), lambda.lmax)?;
    let lmax = lambda.lmax;
    let mut nu = sigma_f.truncate_q(lmax).scaled(4.0 * PI / config.kappa0);
    let deg = degrees(lmax);
    let k = sh_count(lmax);
    for (i, s) in config.spheres.iter().enumerate() {
        let c = (config.kappa0 - s.kappa) / config.kappa0;
        let lam = lambda.block(i);
        let blk = nu.block_mut(i);
        for idx in 1..k {
            blk[idx] += c * deg[idx] as f64 / s.radius * lam[idx - 1];
        }
    }
    Ok(nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Sphere;
    use crate::operators::MatvecMode;

    fn one(kappa: f64) -> Configuration {
        Configuration::new(vec![Sphere::new([0.0; 3], 1.0, kappa, 1.0)], 1.0).unwrap()
    }

    fn y1(lmax: usize, space: Space) -> CoeffVector {
        let mut x = CoeffVector::zeros(1, lmax, space, Repr::Expansion);
        x.set(0, 1, -1, 1.0);
        x
    }

    #[test]
    fn dtn_scalings() {
        let c = one(10.0);
        let y = apply_dtn(&c, &y1(2, Space::Reduced)).unwrap();
        assert!((y.get(0, 1, -1) - 1.0).abs() < 1e-15);
        let c2 = Configuration::new(vec![Sphere::new([0.0; 3], 2.0, 10.0, 1.0)], 1.0).unwrap();
        let mut x = CoeffVector::zeros(1, 2, Space::Reduced, Repr::Expansion);
        x.set(0, 2, 1, 3.0);
        assert!((apply_dtn(&c2, &x).unwrap().get(0, 2, 1) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_sphere_eigenvalues() {
        for (kappa, expect) in [(10.0, 4.0), (0.5, 1.0 - 0.5 / 3.0)] {
            let c = one(kappa);
            let v = SingleLayer::new(&c, 2, MatvecMode::Direct).unwrap();
            let x = y1(2, Space::Reduced);
            let a = apply_a_tilde(&c, &v, &x).unwrap();
            let s = apply_a_sym(&c, &v, &x).unwrap();
            assert!((a.get(0, 1, -1) - expect).abs() < 1e-14);
            assert!((s.get(0, 1, -1) - expect).abs() < 1e-14);
        }
        let c = one(10.0);
        let v = SingleLayer::new(&c, 2, MatvecMode::Direct).unwrap();
        let a = apply_a_star_full(&c, &v, &y1(2, Space::Full)).unwrap();
        assert!((a.get(0, 1, -1) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn zero_contrast_is_identity() {
        let c = Configuration::new(
            vec![Sphere::new([0.0; 3], 1.0, 3.0, 1.0), Sphere::new([0.0, 3.0, 0.0], 0.7, 3.0, 1.0)],
            1.0,
        )
        .unwrap();
        let v = SingleLayer::new(&c, 3, MatvecMode::Direct).unwrap();
        let mut x = CoeffVector::zeros(2, 3, Space::Full, Repr::Expansion);
        x.values.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).sin());
        let y = apply_a_star_with_contrasts(&c, &v, &[0.0, 0.0], &x).unwrap();
        assert!(y.values.iter().zip(&x.values).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn mixed_sign_rejected() {
        let c = Configuration::new(
            vec![Sphere::new([0.0; 3], 1.0, 3.0, 1.0), Sphere::new([0.0, 3.0, 0.0], 1.0, 0.5, 1.0)],
            1.0,
        )
        .unwrap();
        let v = SingleLayer::new(&c, 2, MatvecMode::Direct).unwrap();
        assert!(matches!(ATildeGalerkin::new(&c, &v), Err(Error::MixedSign)));
        assert!(matches!(ASymGalerkin::new(&c, &v), Err(Error::MixedSign)));
    }

    #[test]
    fn rhs_of_lone_sphere_vanishes_and_scales_with_background() {
        let c = one(10.0);
        let v = SingleLayer::new(&c, 3, MatvecMode::Direct).unwrap();
        let b = assemble_rhs(&c, &v, &uniform_free_charge(&c, 3)).unwrap();
        assert!(b.values.iter().all(|x| x.abs() < 1e-15));

        let pair = Configuration::new(
            vec![Sphere::new([0.0; 3], 1.0, 10.0, 1.0), Sphere::new([2.5, 0.0, 0.0], 1.0, 10.0, 1.0)],
            1.0,
        )
        .unwrap();
        let v = SingleLayer::new(&pair, 3, MatvecMode::Direct).unwrap();
        let sf = uniform_free_charge(&pair, 3);
        let b1 = assemble_rhs(&pair, &v, &sf).unwrap();
        assert!(b1.get(0, 1, 1).abs() > 1e-3);
        let doubled = pair.clone().with_kappa0(2.0).unwrap();
        let b2 = assemble_rhs(&doubled, &v, &sf).unwrap();
        for (a, b) in b1.values.iter().zip(&b2.values) {
            assert!((a - 2.0 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_map_is_symmetric() {
        let c = Configuration::new(
            vec![
                Sphere::new([0.0; 3], 1.0, 5.0, 1.0),
                Sphere::new([2.6, 0.3, 0.0], 0.6, 8.0, -1.0),
                Sphere::new([0.2, 2.9, 1.0], 1.3, 2.0, 1.0),
            ],
            1.0,
        )
        .unwrap();
        let v = SingleLayer::new(&c, 3, MatvecMode::Direct).unwrap();
        let a = ASymGalerkin::new(&c, &v).unwrap();
        let n = a.dim();
        let x: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).sin()).collect();
        let z: Vec<f64> = (0..n).map(|i| (0.7 * i as f64 + 1.0).cos()).collect();
        let (mut ax, mut az) = (vec![0.0; n], vec![0.0; n]);
        a.apply(&x, &mut ax);
        a.apply(&z, &mut az);
        let l: f64 = ax.iter().zip(&z).map(|(p, q)| p * q).sum();
        let r: f64 = az.iter().zip(&x).map(|(p, q)| p * q).sum();
        assert!((l - r).abs() < 1e-12 * l.abs().max(1.0));
    }
}
