//! Sphere ensembles and the geometric assumptions the solver relies on.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
    /// Dielectric constant inside the sphere.
    pub kappa: f64,
    /// Total free charge, spread uniformly over the surface.
    pub charge: f64,
}

impl Sphere {
    pub fn new(center: [f64; 3], radius: f64, kappa: f64, charge: f64) -> Self {
        Self { center, radius, kappa, charge }
    }

    pub fn distance_to(&self, other: &Sphere) -> f64 {
        let d = [
            self.center[0] - other.center[0],
            self.center[1] - other.center[1],
            self.center[2] - other.center[2],
        ];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    /// Surface gap to another sphere (negative when they overlap).
    pub fn separation(&self, other: &Sphere) -> f64 {
        self.distance_to(other) - self.radius - other.radius
    }

    /// Uniform free surface charge density q / (4π r²).
    pub fn free_charge_density(&self) -> f64 {
        self.charge / (4.0 * std::f64::consts::PI * self.radius * self.radius)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub spheres: Vec<Sphere>,
    pub kappa0: f64,
}

impl Configuration {
    /// Validated constructor.
    pub fn new(spheres: Vec<Sphere>, kappa0: f64) -> Result<Self> {
        let c = Self { spheres, kappa0 };
        c.check_scalars()?;
        if let Some((i, j)) = first_overlap(&c.spheres) {
            return Err(Error::Overlap { i, j });
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.spheres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spheres.is_empty()
    }

    pub fn with_kappa0(mut self, kappa0: f64) -> Result<Self> {
        self.kappa0 = kappa0;
        self.check_scalars()?;
        Ok(self)
    }

    pub fn sign_class(&self) -> SignClass {
        let above = self.spheres.iter().filter(|s| s.kappa > self.kappa0).count();
        if above == self.spheres.len() {
            SignClass::AllGreater
        } else if above == 0 {
            SignClass::AllLess
        } else {
            SignClass::Mixed
        }
    }

    /// (κ_i − κ0)/κ0 per sphere.
    pub fn contrasts(&self) -> Vec<f64> {
        self.spheres.iter().map(|s| (s.kappa - self.kappa0) / self.kappa0).collect()
    }

    fn check_scalars(&self) -> Result<()> {
        if !(self.kappa0 > 0.0 && self.kappa0.is_finite()) {
            return Err(Error::InvalidConfig(format!("background constant {} must be positive", self.kappa0)));
        }
        for (i, s) in self.spheres.iter().enumerate() {
            if !(s.radius > 0.0 && s.radius.is_finite()) {
                return Err(Error::InvalidConfig(format!("sphere {i}: radius {} must be positive", s.radius)));
            }
            if !(s.kappa > 0.0 && s.kappa.is_finite()) {
                return Err(Error::InvalidConfig(format!("sphere {i}: dielectric constant {} must be positive", s.kappa)));
            }
            if s.kappa == self.kappa0 {
                return Err(Error::InvalidConfig(format!(
                    "sphere {i}: dielectric constant equals the background constant"
                )));
            }
            if s.center.iter().any(|c| !c.is_finite()) || !s.charge.is_finite() {
                return Err(Error::InvalidConfig(format!("sphere {i}: non-finite data")));
            }
        }
        Ok(())
    }
}

fn first_overlap(spheres: &[Sphere]) -> Option<(usize, usize)> {
    for i in 0..spheres.len() {
        for j in i + 1..spheres.len() {
            if spheres[i].separation(&spheres[j]) <= 0.0 {
                return Some((i, j));
            }
        }
    }
    None
}

/// Position of the dielectric constants relative to the background.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignClass {
    AllGreater,
    AllLess,
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub min_radius: f64,
    pub max_radius: f64,
    /// Smallest surface gap; +∞ for a single sphere.
    pub min_separation: f64,
    pub min_kappa: f64,
    pub max_kappa: f64,
    pub sign: SignClass,
}

pub fn validate(config: &Configuration) -> Result<AssumptionReport> {
    if config.is_empty() {
        return Err(Error::InvalidConfig("configuration has no spheres".into()));
    }
    config.check_scalars()?;
    let s = &config.spheres;
    let mut min_sep = f64::INFINITY;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let d = s[i].separation(&s[j]);
            if d <= 0.0 {
                return Err(Error::Overlap { i, j });
            }
            min_sep = min_sep.min(d);
        }
    }
    let fold = |f: fn(&Sphere) -> f64| {
        s.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (min_radius, max_radius) = fold(|x| x.radius);
    let (min_kappa, max_kappa) = fold(|x| x.kappa);
    Ok(AssumptionReport {
        min_radius,
        max_radius,
        min_separation: min_sep,
        min_kappa,
        max_kappa,
        sign: config.sign_class(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Species {
    pub radius: f64,
    pub kappa: f64,
    pub charge: f64,
}

/// How species are distributed over lattice sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// 3D checkerboard by parity of i + j + k.
    Alternating,
    /// Layers by parity of the slowest index k.
    Striped,
}

/// Cubic lattice with background constant 1, sites at (i, j, k)·edge, i fastest.
///
/// Parity p ∈ {0, 1} picks species p mod len. With a single species the
/// charge sign flips with the parity instead.
pub fn build_lattice(
    nx: usize,
    ny: usize,
    nz: usize,
    edge: f64,
    species: &[Species],
    pattern: Pattern,
) -> Result<Configuration> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidConfig("lattice dimensions must be at least 1".into()));
    }
    if species.is_empty() {
        return Err(Error::InvalidConfig("at least one species is required".into()));
    }
    let n = nx * ny * nz;
    if n > 1 {
        let mut radii: Vec<f64> = species.iter().map(|s| s.radius).collect();
        radii.sort_by(|a, b| b.total_cmp(a));
        let worst = if species.len() == 1 { 2.0 * radii[0] } else { radii[0] + radii[1] };
        if !(edge > worst) {
            return Err(Error::InvalidConfig(format!(
                "lattice edge {edge} does not separate spheres of radii summing to {worst}"
            )));
        }
    }
    let mut spheres = Vec::with_capacity(n);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let parity = match pattern {
                    Pattern::Alternating => (i + j + k) % 2,
                    Pattern::Striped => k % 2,
                };
                let sp = species[parity % species.len()];
                let charge = if species.len() == 1 && parity == 1 { -sp.charge } else { sp.charge };
                let center = [i as f64 * edge, j as f64 * edge, k as f64 * edge];
                spheres.push(Sphere::new(center, sp.radius, sp.kappa, charge));
            }
        }
    }
    let c = Configuration { spheres, kappa0: 1.0 };
    c.check_scalars()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Species {
        Species { radius: 1.0, kappa: 10.0, charge: 1.0 }
    }

    #[test]
    fn single_species_lattice_of_125() {
        let c = build_lattice(5, 5, 5, 2.5, &[unit()], Pattern::Alternating).unwrap();
        assert_eq!(c.len(), 125);
        let r = validate(&c).unwrap();
        assert!((r.min_separation - 0.5).abs() < 1e-12);
        assert_eq!(r.sign, SignClass::AllGreater);
        let total: f64 = c.spheres.iter().map(|s| s.charge).sum();
        assert_eq!(total, 1.0);
        assert_eq!(c.spheres[1].charge, -1.0);
        assert_eq!(c.spheres[1].center, [2.5, 0.0, 0.0]);
    }

    #[test]
    fn two_species_lattice() {
        let sp = [
            Species { radius: 3.0, kappa: 10.0, charge: -1.0 },
            Species { radius: 2.0, kappa: 5.0, charge: 1.0 },
        ];
        let c = build_lattice(8, 8, 8, 7.0, &sp, Pattern::Alternating).unwrap();
        assert_eq!(c.len(), 512);
        let r = validate(&c).unwrap();
        assert!((r.min_separation - 2.0).abs() < 1e-12);
        assert_eq!((r.min_radius, r.max_radius), (2.0, 3.0));
        assert!(build_lattice(2, 1, 1, 4.9, &sp, Pattern::Alternating).is_err());
    }

    #[test]
    fn single_sphere_has_infinite_separation() {
        let c = build_lattice(1, 1, 1, 0.1, &[unit()], Pattern::Alternating).unwrap();
        assert_eq!(validate(&c).unwrap().min_separation, f64::INFINITY);
    }

    #[test]
    fn near_touching_pair() {
        let c = Configuration::new(
            vec![Sphere::new([0.0; 3], 1.0, 2.0, 0.0), Sphere::new([2.0001, 0.0, 0.0], 1.0, 2.0, 0.0)],
            1.0,
        )
        .unwrap();
        assert!((validate(&c).unwrap().min_separation - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn mixed_sign_detected() {
        let c = Configuration::new(
            vec![Sphere::new([0.0; 3], 1.0, 2.0, 0.0), Sphere::new([3.0, 0.0, 0.0], 1.0, 0.5, 0.0)],
            1.0,
        )
        .unwrap();
        assert_eq!(validate(&c).unwrap().sign, SignClass::Mixed);
    }

    #[test]
    fn rejects_bad_input() {
        let s = |r, k| Sphere::new([0.0; 3], r, k, 0.0);
        assert!(Configuration::new(vec![s(-1.0, 2.0)], 1.0).is_err());
        assert!(Configuration::new(vec![s(1.0, 1.0)], 1.0).is_err());
        assert!(Configuration::new(vec![s(1.0, 2.0)], 0.0).is_err());
        let pair = vec![Sphere::new([0.0; 3], 1.0, 2.0, 0.0), Sphere::new([2.0, 0.0, 0.0], 1.0, 2.0, 0.0)];
        assert!(matches!(Configuration::new(pair, 1.0), Err(Error::Overlap { i: 0, j: 1 })));
    }
}
