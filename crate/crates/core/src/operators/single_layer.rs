use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::harmonics::{
    degrees, local_to_projection_scale, multipole_scale, sh_count, TranslationKind, TranslationPlan,
    DEFAULT_CACHE_BYTES,
};
use crate::hierarchical::{FarFieldParams, Octree};

use super::coeff::{CoeffVector, Repr, Space};

/// Largest ensemble accepted by the all-pairs engine.
pub const DIRECT_MAX_SPHERES: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatvecMode {
    /// Every sphere pair through an exact translation.
    Direct,
    /// Octree far field with the given depth rule and expansion degree.
    Hierarchical(FarFieldParams),
}

#[derive(Debug)]
enum Engine {
    Direct(TranslationPlan),
    Tree(Box<Octree>),
}

/// Galerkin matrix of V: expansion coefficients in, L² pairings out.
#[derive(Debug)]
pub struct SingleLayer {
    n: usize,
    lmax: usize,
    radii: Vec<f64>,
    engine: Engine,
    /// Per-sphere, per-entry scalings (source multipole, target projection, self term).
    src_scale: Vec<f64>,
    dst_scale: Vec<f64>,
    self_term: Vec<f64>,
}

impl SingleLayer {
    pub fn new(config: &Configuration, lmax: usize, mode: MatvecMode) -> Result<Self> {
        if config.is_empty() {
            return Err(Error::InvalidConfig("configuration has no spheres".into()));
        }
        let n = config.len();
        let engine = match mode {
            MatvecMode::Direct => {
                if n > DIRECT_MAX_SPHERES {
                    return Err(Error::ResourceGuard(format!(
                        "direct matvec limited to {DIRECT_MAX_SPHERES} spheres, got {n}; use the hierarchical mode"
                    )));
                }
                let mut items = Vec::with_capacity(n * n.saturating_sub(1));
                for (i, t) in config.spheres.iter().enumerate() {
                    for (j, s) in config.spheres.iter().enumerate() {
                        if i != j {
                            let v = [t.center[0] - s.center[0], t.center[1] - s.center[1], t.center[2] - s.center[2]];
                            items.push((i as u32, j as u32, v));
                        }
                    }
                }
                Engine::Direct(TranslationPlan::new(
                    TranslationKind::MultipoleToLocal,
                    lmax,
                    lmax,
                    &items,
                    DEFAULT_CACHE_BYTES,
                ))
            }
            MatvecMode::Hierarchical(params) => Engine::Tree(Box::new(Octree::build(config, lmax, params)?)),
        };
        let radii: Vec<f64> = config.spheres.iter().map(|s| s.radius).collect();
        let deg = degrees(lmax);
        let k = deg.len();
        let mut src_scale = Vec::with_capacity(n * k);
        let mut dst_scale = Vec::with_capacity(n * k);
        let mut self_term = Vec::with_capacity(n * k);
        for &r in &radii {
            for &l in &deg {
                src_scale.push(multipole_scale(l, r));
                dst_scale.push(local_to_projection_scale(l, r));
                self_term.push(r * r * r / (2 * l + 1) as f64);
            }
        }
        Ok(Self { n, lmax, radii, engine, src_scale, dst_scale, self_term })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn octree(&self) -> Option<&Octree> {
        match &self.engine {
            Engine::Tree(t) => Some(t),
            Engine::Direct(_) => None,
        }
    }

    /// Full-space expansion coefficients → full-space pairings.
    pub fn apply_full(&self, x: &[f64], y: &mut [f64]) {
        let total = self.n * sh_count(self.lmax);
        assert_eq!(x.len(), total);
        assert_eq!(y.len(), total);
        let m: Vec<f64> = x.iter().zip(&self.src_scale).map(|(a, b)| a * b).collect();
        let mut local = vec![0.0; total];
        match &self.engine {
            Engine::Direct(plan) => plan.apply(&m, &mut local),
            Engine::Tree(tree) => tree.apply_off_diagonal(&m, &mut local),
        }
        for i in 0..total {
            y[i] = self.dst_scale[i] * local[i] + self.self_term[i] * x[i];
        }
    }

    /// Reduced-space expansion coefficients → reduced-space pairings.
    pub fn apply_reduced(&self, x: &[f64], y: &mut [f64]) {
        let k = sh_count(self.lmax);
        let mut full = vec![0.0; self.n * k];
        for i in 0..self.n {
            full[i * k + 1..(i + 1) * k].copy_from_slice(&x[i * (k - 1)..(i + 1) * (k - 1)]);
        }
        let mut out = vec![0.0; self.n * k];
        self.apply_full(&full, &mut out);
        for i in 0..self.n {
            y[i * (k - 1)..(i + 1) * (k - 1)].copy_from_slice(&out[i * k + 1..(i + 1) * k]);
        }
    }

    /// V applied to an expansion vector; the result is a projection in the same space.
    pub fn apply(&self, x: &CoeffVector) -> Result<CoeffVector> {
        x.expect_compatible(self.n, self.lmax)?;
        if x.repr != Repr::Expansion {
            return Err(Error::SpaceMismatch { expected: "Expansion".into(), found: format!("{:?}", x.repr) });
        }
        let mut out = CoeffVector::zeros(self.n, self.lmax, x.space, Repr::Projection);
        match x.space {
            Space::Full => self.apply_full(&x.values, &mut out.values),
            Space::Reduced => self.apply_reduced(&x.values, &mut out.values),
        }
        Ok(out)
    }
}
