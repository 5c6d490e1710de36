use dielectric::dense::{
    a_sym_matrix, a_tilde_matrix, dtn_kappa_sqrt_matrix, similarity_residual, single_layer_matrix, solve, DenseMap,
};
use dielectric::harmonics::{translation_block, BlockMethod};
use dielectric::hierarchical::FarFieldParams;
use dielectric::krylov::{cg_observed, gmres};
use dielectric::operators::{
    assemble_rhs, uniform_free_charge, ASymGalerkin, ATildeGalerkin, MatvecMode, SingleLayer,
};
use dielectric::strategies::{
    discretisation_error, error_trace, first_below, reference_solution_in, relative_error, solve_gmres_strategy,
    ErrorMeter, Method, Normalisation, SolveRequest,
};
use dielectric::krylov::LinearMap;
use dielectric::{build_lattice, Configuration, Pattern, Species, Sphere};
use nalgebra::{DMatrix, DVector};

fn mixed_radii_pair(sep: f64) -> Configuration {
    Configuration::new(
        vec![Sphere::new([0.0; 3], 1.0, 10.0, 1.0), Sphere::new([1.7 + sep, 0.2, -0.1], 0.7, 4.0, -1.0)],
        1.0,
    )
    .unwrap()
}

#[test]
fn analytic_blocks_match_quadrature_when_close() {
    for (sep, lmax) in [(1e-3, 4), (0.05, 6), (1.0, 6)] {
        let c = mixed_radii_pair(sep);
        let a = translation_block(&c, 0, 1, lmax, BlockMethod::Analytic).unwrap();
        let q = translation_block(&c, 0, 1, lmax, BlockMethod::Quadrature).unwrap();
        let k = a.dim();
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for t in 0..k {
            for s in 0..k {
                num += (a.get(t, s) - q.get(t, s)).powi(2);
                den += a.get(t, s).powi(2);
            }
        }
        assert!((num / den).sqrt() < 1e-8, "sep {sep} lmax {lmax}: {}", (num / den).sqrt());
    }
}

#[test]
fn reciprocity_of_blocks() {
    let c = mixed_radii_pair(0.3);
    let ab = translation_block(&c, 0, 1, 4, BlockMethod::Analytic).unwrap();
    let ba = translation_block(&c, 1, 0, 4, BlockMethod::Analytic).unwrap();
    for t in 0..ab.dim() {
        for s in 0..ab.dim() {
            assert!((ab.get(t, s) - ba.get(s, t)).abs() < 1e-13 * (1.0 + ab.get(t, s).abs()));
        }
    }
}

fn lattice(n: usize, edge: f64, kappa: f64) -> Configuration {
    build_lattice(n, n, n, edge, &[Species { radius: 1.0, kappa, charge: 1.0 }], Pattern::Alternating).unwrap()
}

fn dense_apply(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

#[test]
fn matrix_free_operators_match_dense() {
    let c = mixed_radii_pair(0.2);
    let lmax = 3;
    let v = SingleLayer::new(&c, lmax, MatvecMode::Direct).unwrap();
    let vd = single_layer_matrix(&c, lmax, BlockMethod::Analytic).unwrap();
    let a = ATildeGalerkin::new(&c, &v).unwrap();
    let s = ASymGalerkin::new(&c, &v).unwrap();
    let ad = a_tilde_matrix(&c, &vd, lmax).unwrap();
    let sd = a_sym_matrix(&c, &vd, lmax).unwrap();
    let x: Vec<f64> = (0..a.dim()).map(|i| (i as f64 * 0.9).cos()).collect();
    for (map, dense) in [(&a as &dyn LinearMap, &ad), (&s as &dyn LinearMap, &sd)] {
        let mut y = vec![0.0; x.len()];
        map.apply(&x, &mut y);
        let r = dense_apply(dense, &x);
        let err = y.iter().zip(&r).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let nrm = r.iter().map(|q| q * q).sum::<f64>().sqrt();
        assert!(err < 1e-12 * nrm);
    }
    assert!(similarity_residual(&ad, &sd, &dtn_kappa_sqrt_matrix(&c, lmax)) < 1e-12);
}

#[test]
fn krylov_solvers_match_lu() {
    let c = lattice(2, 2.5, 10.0);
    let lmax = 3;
    let vd = single_layer_matrix(&c, lmax, BlockMethod::Analytic).unwrap();
    let ad = a_tilde_matrix(&c, &vd, lmax).unwrap();
    let sd = a_sym_matrix(&c, &vd, lmax).unwrap();
    let b: Vec<f64> = (0..ad.nrows()).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
    let exact = solve(&ad, &b).unwrap();
    let (x, rep) = gmres(&DenseMap { matrix: ad.clone(), symmetric: false }, &b, 1e-13, 500, None).unwrap();
    assert!(rep.converged);
    let err = x.iter().zip(&exact).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(err < 1e-9 * exact.iter().map(|v| v.abs()).fold(0.0, f64::max));

    // CG decreases the energy-norm error monotonically.
    let exact = solve(&sd, &b).unwrap();
    let mut energies = Vec::new();
    let map = DenseMap { matrix: sd.clone(), symmetric: true };
    let mut obs = |_k: usize, xk: &[f64]| {
        let e: Vec<f64> = xk.iter().zip(&exact).map(|(p, q)| p - q).collect();
        energies.push(dense_apply(&sd, &e).iter().zip(&e).map(|(p, q)| p * q).sum::<f64>().sqrt());
    };
    let (_, rep) = cg_observed(&map, &b, 1e-12, 500, None, &mut obs).unwrap();
    assert!(rep.converged);
    for w in energies.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-10), "{} then {}", w[0], w[1]);
    }
}

#[test]
fn rhs_vanishes_for_isolated_spheres() {
    let c = Configuration::new(
        vec![Sphere::new([0.0; 3], 1.0, 10.0, 1.0), Sphere::new([1e7, 0.0, 0.0], 1.0, 10.0, -1.0)],
        1.0,
    )
    .unwrap();
    let v = SingleLayer::new(&c, 3, MatvecMode::Direct).unwrap();
    let b = assemble_rhs(&c, &v, &uniform_free_charge(&c, 3)).unwrap();
    assert!(b.values.iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn hierarchical_solution_tracks_direct() {
    let c = lattice(4, 2.5, 10.0);
    let lmax = 3;
    let direct = solve_gmres_strategy(&c, lmax, 1e-11, MatvecMode::Direct).unwrap();
    let mut last = f64::INFINITY;
    for p in [4, 8, 16] {
        let far = solve_gmres_strategy(&c, lmax, 1e-11, MatvecMode::Hierarchical(FarFieldParams::with_depth(p, 3)))
            .unwrap();
        let e = relative_error(&c, &far, &direct, Normalisation::Plain).unwrap();
        assert!(e < last, "P = {p}: {e} after {last}");
        last = e;
    }
    assert!(last < 1e-5, "{last}");
}

#[test]
fn error_trace_reaches_truth() {
    let c = lattice(3, 2.5, 10.0);
    let lmax = 3;
    let dir = tempfile::tempdir().unwrap();
    let truth = reference_solution_in(&c, lmax, 1e-13, Some(dir.path())).unwrap();
    let meter = ErrorMeter::new(&c, &truth, lmax, Normalisation::Theorem).unwrap();
    let v = SingleLayer::new(&c, lmax, MatvecMode::Direct).unwrap();
    for m in [Method::Gmres, Method::Cg] {
        let (trace, _) = error_trace(&c, &v, &SolveRequest::new(m, 1e-13), &meter).unwrap();
        assert!((trace[0] - 1.0).abs() < 0.5, "zero iterate error {}", trace[0]);
        let k6 = first_below(&trace, 1e-6).unwrap();
        let k9 = first_below(&trace, 1e-9).unwrap();
        assert!(k6 < k9);
    }
    // Padding the coarse solution to a finer degree makes the refinement visible.
    let fine = reference_solution_in(&c, 6, 1e-13, Some(dir.path())).unwrap();
    let e3 = discretisation_error(&c, &truth, &fine).unwrap();
    let coarse = reference_solution_in(&c, 1, 1e-13, Some(dir.path())).unwrap();
    let e1 = discretisation_error(&c, &coarse, &fine).unwrap();
    assert!(e3 < e1 && e3 > 0.0);
}
