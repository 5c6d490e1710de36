use crate::error::{Error, Result};
use crate::harmonics::{sh_count, sh_index};

/// Which degrees a vector carries per sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    /// ℓ ∈ [0, lmax], (lmax+1)² entries per sphere.
    Full,
    /// ℓ ∈ [1, lmax], (lmax+1)² − 1 entries per sphere.
    Reduced,
}

/// How the entries relate to the underlying function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Repr {
    /// Coefficients of the spherical-harmonic expansion.
    Expansion,
    /// L² pairings with the basis functions, i.e. r_i² × expansion.
    Projection,
}

impl Space {
    pub fn per_sphere(self, lmax: usize) -> usize {
        match self {
            Space::Full => sh_count(lmax),
            Space::Reduced => sh_count(lmax) - 1,
        }
    }

    /// Offset of the first stored degree within a full block.
    fn skip(self) -> usize {
        match self {
            Space::Full => 0,
            Space::Reduced => 1,
        }
    }
}

/// Per-sphere spherical-harmonic data, ordered by (sphere, ℓ, m).
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    pub values: Vec<f64>,
    pub n: usize,
    pub lmax: usize,
    pub space: Space,
    pub repr: Repr,
}

impl CoeffVector {
    pub fn zeros(n: usize, lmax: usize, space: Space, repr: Repr) -> Self {
        Self { values: vec![0.0; n * space.per_sphere(lmax)], n, lmax, space, repr }
    }

    pub fn from_values(values: Vec<f64>, n: usize, lmax: usize, space: Space, repr: Repr) -> Result<Self> {
        let expected = n * space.per_sphere(lmax);
        if values.len() != expected {
            return Err(Error::SpaceMismatch {
                expected: format!("{expected} entries ({space:?}, N = {n}, lmax = {lmax})"),
                found: format!("{} entries", values.len()),
            });
        }
        Ok(Self { values, n, lmax, space, repr })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn per_sphere(&self) -> usize {
        self.space.per_sphere(self.lmax)
    }

    /// Position of (i, ℓ, m); None for ℓ = 0 in the reduced space.
    pub fn position(&self, i: usize, l: usize, m: i64) -> Option<usize> {
        if l > self.lmax || (l == 0 && self.space == Space::Reduced) {
            return None;
        }
        Some(i * self.per_sphere() + sh_index(l, m) - self.space.skip())
    }

    pub fn get(&self, i: usize, l: usize, m: i64) -> f64 {
        self.position(i, l, m).map_or(0.0, |p| self.values[p])
    }

    pub fn set(&mut self, i: usize, l: usize, m: i64, v: f64) {
        let p = self.position(i, l, m).expect("coefficient outside the stored space");
        self.values[p] = v;
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let k = self.per_sphere();
        &self.values[i * k..(i + 1) * k]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let k = self.per_sphere();
        &mut self.values[i * k..(i + 1) * k]
    }

    /// Degree of every stored entry of one sphere block.
    pub fn block_degrees(&self) -> Vec<usize> {
        let skip = self.space.skip();
        crate::harmonics::degrees(self.lmax).into_iter().skip(skip).collect()
    }

    pub fn expect(&self, space: Space, repr: Repr) -> Result<()> {
        if self.space != space || self.repr != repr {
            return Err(Error::SpaceMismatch {
                expected: format!("{space:?}/{repr:?}"),
                found: format!("{:?}/{:?}", self.space, self.repr),
            });
        }
        Ok(())
    }

    pub fn expect_compatible(&self, n: usize, lmax: usize) -> Result<()> {
        if self.n != n || self.lmax != lmax {
            return Err(Error::SpaceMismatch {
                expected: format!("N = {n}, lmax = {lmax}"),
                found: format!("N = {}, lmax = {}", self.n, self.lmax),
            });
        }
        Ok(())
    }

    fn rescaled(&self, radii: &[f64], power: i32, repr: Repr) -> Self {
        assert_eq!(radii.len(), self.n);
        let mut out = self.clone();
        out.repr = repr;
        let k = self.per_sphere();
        for (i, r) in radii.iter().enumerate() {
            let f = r.powi(power);
            for v in &mut out.values[i * k..(i + 1) * k] {
                *v *= f;
            }
        }
        out
    }

    /// Expansion → projection (× r_i²). Identity if already a projection.
    pub fn to_projection(&self, radii: &[f64]) -> Self {
        match self.repr {
            Repr::Projection => self.clone(),
            Repr::Expansion => self.rescaled(radii, 2, Repr::Projection),
        }
    }

    /// Projection → expansion (÷ r_i²). Identity if already an expansion.
    pub fn to_expansion(&self, radii: &[f64]) -> Self {
        match self.repr {
            Repr::Expansion => self.clone(),
            Repr::Projection => self.rescaled(radii, -2, Repr::Expansion),
        }
    }

    /// Reduced → full with zero ℓ = 0 entries; copies a full vector.
    pub fn to_full(&self) -> Self {
        if self.space == Space::Full {
            return self.clone();
        }
        let mut out = Self::zeros(self.n, self.lmax, Space::Full, self.repr);
        let k = self.per_sphere();
        for i in 0..self.n {
            out.values[i * (k + 1) + 1..(i + 1) * (k + 1)].copy_from_slice(self.block(i));
        }
        out
    }

    /// Full → reduced by dropping ℓ = 0; copies a reduced vector.
    pub fn to_reduced(&self) -> Self {
        if self.space == Space::Reduced {
            return self.clone();
        }
        let k = self.per_sphere();
        let mut out = Self::zeros(self.n, self.lmax, Space::Reduced, self.repr);
        for i in 0..self.n {
            out.values[i * (k - 1)..(i + 1) * (k - 1)].copy_from_slice(&self.block(i)[1..]);
        }
        out
    }

    /// P0: keep only the per-sphere constants.
    pub fn project_p0(&self) -> Self {
        let mut out = Self::zeros(self.n, self.lmax, self.space, self.repr);
        if self.space == Space::Full {
            let k = self.per_sphere();
            for i in 0..self.n {
                out.values[i * k] = self.values[i * k];
            }
        }
        out
    }

    /// P0⊥: remove the per-sphere constants.
    pub fn project_p0_perp(&self) -> Self {
        let mut out = self.clone();
        if self.space == Space::Full {
            let k = self.per_sphere();
            for i in 0..self.n {
                out.values[i * k] = 0.0;
            }
        }
        out
    }

    /// Change the degree cut-off: drops degrees above `lmax`, zero-pads below.
    pub fn truncate_q(&self, lmax: usize) -> Self {
        let mut out = Self::zeros(self.n, lmax, self.space, self.repr);
        let skip = self.space.skip();
        let common = sh_count(lmax.min(self.lmax)) - skip;
        let (ka, kb) = (self.per_sphere(), out.per_sphere());
        for i in 0..self.n {
            out.values[i * kb..i * kb + common].copy_from_slice(&self.values[i * ka..i * ka + common]);
        }
        out
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        assert_eq!(self.values.len(), x.values.len());
        for (y, xv) in self.values.iter_mut().zip(&x.values) {
            *y += a * xv;
        }
    }
}

/// Weights w with |||x|||² = Σ w x² for expansion coefficients: r² at ℓ = 0, r·ℓ otherwise.
fn energy_weight(l: usize, r: f64) -> f64 {
    if l == 0 {
        r * r
    } else {
        r * l as f64
    }
}

/// |||x||| for an expansion vector.
pub fn triple_norm(x: &CoeffVector, radii: &[f64]) -> Result<f64> {
    weighted_norm(x, radii, |l, r| energy_weight(l, r))
}

/// Discrete dual norm |||x|||*: inverse weights applied to the L² pairings,
/// which for expansion coefficients gives r² at ℓ = 0 and r³/ℓ otherwise.
pub fn triple_norm_dual(x: &CoeffVector, radii: &[f64]) -> Result<f64> {
    weighted_norm(x, radii, |l, r| r.powi(4) / energy_weight(l, r))
}

fn weighted_norm(x: &CoeffVector, radii: &[f64], w: impl Fn(usize, f64) -> f64) -> Result<f64> {
    if x.repr != Repr::Expansion {
        return Err(Error::SpaceMismatch { expected: "Expansion".into(), found: format!("{:?}", x.repr) });
    }
    if radii.len() != x.n {
        return Err(Error::SpaceMismatch { expected: format!("{} radii", x.n), found: format!("{}", radii.len()) });
    }
    let deg = x.block_degrees();
    let mut s = 0.0;
    for (i, r) in radii.iter().enumerate() {
        for (v, &l) in x.block(i).iter().zip(&deg) {
            s += w(l, *r) * v * v;
        }
    }
    Ok(s.sqrt())
}
