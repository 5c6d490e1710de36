use std::f64::consts::PI;

use super::{real_sh_all, sh_count};
use crate::geometry::Sphere;

/// Gauss–Legendre nodes and weights on [−1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, t);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Tensor rule on the unit sphere.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

/// Gauss–Legendre in cos θ times the uniform azimuthal rule, exact up to `order`.
pub fn quadrature_rule(order: usize) -> QuadratureRule {
    let order = order.max(1);
    let n_theta = order / 2 + 1;
    let n_phi = order + 1;
    let (z, wz) = gauss_legendre(n_theta);
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    let dphi = 2.0 * PI / n_phi as f64;
    for (zi, wi) in z.iter().zip(&wz) {
        let s = (1.0 - zi * zi).max(0.0).sqrt();
        for k in 0..n_phi {
            let phi = k as f64 * dphi;
            nodes.push([s * phi.cos(), s * phi.sin(), *zi]);
            weights.push(wi * dphi);
        }
    }
    QuadratureRule { nodes, weights, degree: order }
}

/// L² pairings (f, Y^i_ℓm) over the surface of `sphere`, Jacobian r² included.
///
/// `f` receives points in space. The result is exact when `f` restricted to
/// the sphere is a spherical polynomial of degree ≤ order − lmax.
pub fn project_onto_sphere<F>(f: F, sphere: &Sphere, lmax: usize, order: usize) -> Vec<f64>
where
    F: Fn([f64; 3]) -> f64,
{
    let rule = quadrature_rule(order.max(2 * lmax));
    let r = sphere.radius;
    let c = sphere.center;
    let k = sh_count(lmax);
    let mut out = vec![0.0; k];
    let mut y = vec![0.0; k];
    for (u, w) in rule.nodes.iter().zip(&rule.weights) {
        let x = [c[0] + r * u[0], c[1] + r * u[1], c[2] + r * u[2]];
        let fw = f(x) * w * r * r;
        real_sh_all(*u, lmax, &mut y);
        for (o, yi) in out.iter_mut().zip(&y) {
            *o += fw * yi;
        }
    }
    out
}

/// Composite Gauss–Legendre rule on θ ∈ [0, π], geometrically refined
/// towards θ = 0 where the smallest panel has width `h0`.
pub(crate) fn graded_theta_rule(h0: f64, points_per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(points_per_panel);
    let mut breaks = vec![0.0];
    let mut h = h0.clamp(1e-14, PI / 4.0);
    let mut t = 0.0;
    while t + h < PI * 0.999 {
        t += h;
        breaks.push(t);
        h *= 2.0;
    }
    breaks.push(PI);
    // Split the coarse tail so no panel is wider than π/4.
    let mut refined = vec![0.0];
    for pair in breaks.windows(2) {
        let pieces = ((pair[1] - pair[0]) / (PI / 4.0)).ceil().max(1.0) as usize;
        for p in 1..=pieces {
            refined.push(pair[0] + (pair[1] - pair[0]) * p as f64 / pieces as f64);
        }
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for pair in refined.windows(2) {
        let half = 0.5 * (pair[1] - pair[0]);
        let mid = 0.5 * (pair[1] + pair[0]);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}
