use std::f64::consts::PI;

use super::quadrature::graded_theta_rule;
use super::solid::{translation_matrix, TranslationKind};
use super::{degrees, real_sh_all, sh_count};
use crate::error::{Error, Result};
use crate::geometry::{Configuration, Sphere};

/// How a block of V between two spheres is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockMethod {
    /// Multipole expansion of the source potential, translated to the target.
    Analytic,
    /// Nested surface quadrature of the Coulomb kernel. Oracle only.
    Quadrature,
}

/// Dense coupling block of the single-layer operator between two spheres.
///
/// `entries[t * K + s]` = (V Y^source_s, Y^target_t)_{L²(∂Ω_target)}.
#[derive(Debug, Clone)]
pub struct TranslationBlock {
    pub source: usize,
    pub target: usize,
    pub lmax: usize,
    pub entries: Vec<f64>,
}

impl TranslationBlock {
    pub fn dim(&self) -> usize {
        sh_count(self.lmax)
    }

    pub fn get(&self, t: usize, s: usize) -> f64 {
        self.entries[t * self.dim() + s]
    }
}

/// Multipole coefficient (Î basis) produced by a unit density Y_ℓm on a sphere of radius r.
#[inline]
pub fn multipole_scale(l: usize, r: f64) -> f64 {
    r.powi(l as i32 + 2) / (4.0 * PI * (2 * l + 1) as f64).sqrt()
}

/// Projection (f, Y_λκ) of the local term R̂_λκ(x − center) over a sphere of radius r.
#[inline]
pub fn local_to_projection_scale(l: usize, r: f64) -> f64 {
    r.powi(l as i32 + 2) * (4.0 * PI / (2 * l + 1) as f64).sqrt()
}

/// Block of V mapping densities on sphere `source` to pairings on sphere `target`.
///
/// `source == target` yields the diagonal self block r³/(2ℓ+1).
pub fn translation_block(
    config: &Configuration,
    source: usize,
    target: usize,
    lmax: usize,
    method: BlockMethod,
) -> Result<TranslationBlock> {
    let n = config.spheres.len();
    if source >= n || target >= n {
        return Err(Error::Domain(format!("sphere index out of range (N = {n})")));
    }
    let src = &config.spheres[source];
    let tgt = &config.spheres[target];
    if source != target && src.distance_to(tgt) <= src.radius + tgt.radius {
        return Err(Error::Overlap { i: source, j: target });
    }
    let entries = match method {
        BlockMethod::Analytic => analytic_entries(src, tgt, lmax, source == target),
        BlockMethod::Quadrature => quadrature_entries(src, tgt, lmax, source == target),
    };
    Ok(TranslationBlock { source, target, lmax, entries })
}

fn analytic_entries(src: &Sphere, tgt: &Sphere, lmax: usize, same: bool) -> Vec<f64> {
    let k = sh_count(lmax);
    let deg = degrees(lmax);
    let mut out = vec![0.0; k * k];
    if same {
        let r = src.radius;
        for (i, &l) in deg.iter().enumerate() {
            out[i * k + i] = r * r * r / (2 * l + 1) as f64;
        }
        return out;
    }
    let a = sub(tgt.center, src.center);
    let t = translation_matrix(TranslationKind::MultipoleToLocal, lmax, lmax, a);
    for (row, &lt) in deg.iter().enumerate() {
        let ft = local_to_projection_scale(lt, tgt.radius);
        for (col, &ls) in deg.iter().enumerate() {
            out[row * k + col] = ft * t[row * k + col] * multipole_scale(ls, src.radius);
        }
    }
    out
}

/// Orthonormal frame whose third axis is `e`.
fn frame(e: [f64; 3]) -> [[f64; 3]; 3] {
    let helper = if e[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = dot(helper, e);
    let e1 = normalise([helper[0] - d * e[0], helper[1] - d * e[1], helper[2] - d * e[2]]);
    let e2 = cross(e, e1);
    [e1, e2, e]
}

/// Points on a sphere in a frame with its pole along `axis`, refined towards the pole.
fn polar_nodes(axis: [f64; 3], h0: f64, n_phi: usize) -> Vec<([f64; 3], f64)> {
    let [e1, e2, e3] = frame(axis);
    let (theta, wt) = graded_theta_rule(h0, 16);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(theta.len() * n_phi);
    for (th, w) in theta.iter().zip(&wt) {
        let (s, c) = th.sin_cos();
        for p in 0..n_phi {
            let (sp, cp) = (p as f64 * dphi).sin_cos();
            let u = [
                s * cp * e1[0] + s * sp * e2[0] + c * e3[0],
                s * cp * e1[1] + s * sp * e2[1] + c * e3[1],
                s * cp * e1[2] + s * sp * e2[2] + c * e3[2],
            ];
            nodes.push((u, w * s * dphi));
        }
    }
    nodes
}

/// Outer rule over the target, inner rule over the source re-oriented at
/// every outer node so its pole faces the evaluation point. The kernel is
/// then axisymmetric in the inner frame and azimuthal resolution only has to
/// cover the harmonics themselves; θ panels are refined geometrically
/// towards the pole to resolve the near-singularity.
fn quadrature_entries(src: &Sphere, tgt: &Sphere, lmax: usize, same: bool) -> Vec<f64> {
    let k = sh_count(lmax);
    let (ri, rj) = (tgt.radius, src.radius);
    let gap = if same { 0.0 } else { src.distance_to(tgt) - ri - rj };
    let outer_axis = if same { [0.0, 0.0, 1.0] } else { normalise(sub(src.center, tgt.center)) };
    let h_outer = if same { PI / 4.0 } else { 0.25 * gap / ri };
    let outer = polar_nodes(outer_axis, h_outer, 2 * lmax + 2);

    let mut out = vec![0.0; k * k];
    let mut yt = vec![0.0; k];
    let mut ys = vec![0.0; k];
    let mut pot = vec![0.0; k];
    for (u, w) in &outer {
        let x = add(tgt.center, scale(*u, ri));
        let rel = sub(x, src.center);
        let rho = norm(rel);
        let dist = rho - rj;
        let h_inner = if dist.abs() < 1e-12 { PI / 4.0 } else { 0.25 * dist / rj };
        pot.fill(0.0);
        for (v, wv) in polar_nodes(scale(rel, 1.0 / rho), h_inner, lmax + 2) {
            let y = add(src.center, scale(v, rj));
            let kern = 1.0 / (4.0 * PI * norm(sub(x, y)));
            real_sh_all(v, lmax, &mut ys);
            let f = kern * wv * rj * rj;
            for (p, s) in pot.iter_mut().zip(&ys) {
                *p += f * s;
            }
        }
        real_sh_all(*u, lmax, &mut yt);
        let wo = w * ri * ri;
        for t in 0..k {
            let a = wo * yt[t];
            for s in 0..k {
                out[t * k + s] += a * pot[s];
            }
        }
    }
    out
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn normalise(a: [f64; 3]) -> [f64; 3] {
    scale(a, 1.0 / norm(a))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::sh_index;

    fn pair(d: f64, ri: f64, rj: f64) -> Configuration {
        Configuration::new(
            vec![
                Sphere::new([0.0, 0.0, 0.0], ri, 10.0, 1.0),
                Sphere::new([d * 0.6, -d * 0.48, d * 0.64], rj, 10.0, -1.0),
            ],
            1.0,
        )
        .unwrap()
    }

    fn rel_frobenius(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn monopole_mean_value() {
        let c = pair(2.5, 1.0, 1.0);
        let b = translation_block(&c, 1, 0, 3, BlockMethod::Analytic).unwrap();
        assert!((b.get(0, 0) - 0.4).abs() < 1e-14);
    }

    #[test]
    fn decays_with_distance() {
        let near = translation_block(&pair(3.0, 1.0, 1.0), 1, 0, 2, BlockMethod::Analytic).unwrap();
        let far = translation_block(&pair(3e9, 1.0, 1.0), 1, 0, 2, BlockMethod::Analytic).unwrap();
        let mx = |b: &TranslationBlock| b.entries.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(mx(&far) < 1e-6 * mx(&near));
    }

    #[test]
    fn analytic_matches_quadrature_at_moderate_separation() {
        let c = pair(2.5, 1.0, 1.0);
        let a = translation_block(&c, 1, 0, 3, BlockMethod::Analytic).unwrap();
        let q = translation_block(&c, 1, 0, 3, BlockMethod::Quadrature).unwrap();
        assert!(rel_frobenius(&a.entries, &q.entries) < 1e-10);
    }

    #[test]
    fn self_block_matches_quadrature() {
        let c = pair(2.5, 1.3, 1.0);
        let a = translation_block(&c, 0, 0, 3, BlockMethod::Analytic).unwrap();
        let q = translation_block(&c, 0, 0, 3, BlockMethod::Quadrature).unwrap();
        assert!(rel_frobenius(&a.entries, &q.entries) < 1e-10);
        assert!((a.get(sh_index(1, 0), sh_index(1, 0)) - 1.3f64.powi(3) / 3.0).abs() < 1e-14);
    }

    #[test]
    fn reciprocity() {
        let c = pair(2.7, 1.2, 0.8);
        let ab = translation_block(&c, 1, 0, 4, BlockMethod::Analytic).unwrap();
        let ba = translation_block(&c, 0, 1, 4, BlockMethod::Analytic).unwrap();
        let k = ab.dim();
        for t in 0..k {
            for s in 0..k {
                assert!((ab.get(t, s) - ba.get(s, t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn overlap_is_rejected() {
        let c = Configuration {
            spheres: vec![
                Sphere::new([0.0; 3], 1.0, 2.0, 0.0),
                Sphere::new([1.5, 0.0, 0.0], 1.0, 2.0, 0.0),
            ],
            kappa0: 1.0,
        };
        assert!(translation_block(&c, 0, 1, 2, BlockMethod::Analytic).is_err());
    }
}
