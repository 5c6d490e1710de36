use dielectric::operators::{
    triple_norm, triple_norm_dual, CoeffVector, MatvecMode, Repr, SingleLayer, Space,
};
use dielectric::strategies::{read_solution, write_solution};
use dielectric::{validate, Configuration, Sphere};
use proptest::prelude::*;

fn sphere() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.2f64..1.5, 0.1f64..50.0, -2.0f64..2.0)
}

/// Spheres on a line with random radii and gaps, so they never overlap.
fn chain(max: usize) -> impl Strategy<Value = Configuration> {
    prop::collection::vec((sphere(), 0.01f64..3.0, -1.0f64..1.0, -1.0f64..1.0), 1..=max).prop_map(|items| {
        let mut x = 0.0;
        let mut prev_r = 0.0;
        let spheres = items
            .into_iter()
            .enumerate()
            .map(|(i, ((r, k, q), gap, y, z))| {
                if i > 0 {
                    x += prev_r + gap + r;
                }
                prev_r = r;
                Sphere::new([x, y * 0.01, z * 0.01], r, k, q)
            })
            .collect();
        Configuration::new(spheres, 1.0).unwrap()
    })
}

fn radii(c: &Configuration) -> Vec<f64> {
    c.spheres.iter().map(|s| s.radius).collect()
}

fn random_vec(n: usize, lmax: usize, space: Space, seed: &[f64]) -> CoeffVector {
    let mut v = CoeffVector::zeros(n, lmax, space, Repr::Expansion);
    for (i, x) in v.values.iter_mut().enumerate() {
        *x = seed[i % seed.len()] * (1.0 + (i as f64 * 0.37).sin());
    }
    v
}

fn rotate(p: [f64; 3], a: f64) -> [f64; 3] {
    let (s, c) = a.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn min_separation_is_rigid_and_order_free(c in chain(6), shift in prop::array::uniform3(-10.0f64..10.0), angle in 0.0f64..6.3) {
        let base = validate(&c).unwrap().min_separation;
        let mut moved = c.clone();
        moved.spheres.reverse();
        for s in &mut moved.spheres {
            let p = rotate(s.center, angle);
            s.center = [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]];
        }
        let other = validate(&moved).unwrap().min_separation;
        if base.is_finite() {
            prop_assert!((base - other).abs() <= 1e-9 * base.max(1.0));
        } else {
            prop_assert!(other.is_infinite());
        }
    }

    #[test]
    fn norms_are_homogeneous_and_dual(c in chain(4), lmax in 1usize..5, seed in prop::collection::vec(-1.0f64..1.0, 1..8), a in -5.0f64..5.0) {
        let r = radii(&c);
        let x = random_vec(c.len(), lmax, Space::Full, &seed);
        let y = random_vec(c.len(), lmax, Space::Full, &seed.iter().rev().copied().collect::<Vec<_>>());
        let nx = triple_norm(&x, &r).unwrap();
        prop_assert!((triple_norm(&x.scaled(a), &r).unwrap() - a.abs() * nx).abs() <= 1e-12 * (1.0 + nx));
        // |(x, y)_L²| ≤ |||x||| · |||y|||*.
        let pairing = x.to_projection(&r).dot(&y);
        prop_assert!(pairing.abs() <= nx * triple_norm_dual(&y, &r).unwrap() * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn projectors_split_identity(c in chain(4), lmax in 1usize..5, seed in prop::collection::vec(-1.0f64..1.0, 1..8)) {
        let x = random_vec(c.len(), lmax, Space::Full, &seed);
        let p = x.project_p0();
        let q = x.project_p0_perp();
        let mut sum = p.clone();
        sum.axpy(1.0, &q);
        prop_assert_eq!(&sum.values, &x.values);
        prop_assert_eq!(p.project_p0().values, p.values.clone());
        prop_assert!(q.project_p0().values.iter().all(|v| *v == 0.0));
        let r = radii(&c);
        let back = x.to_projection(&r).to_expansion(&r);
        for (a, b) in back.values.iter().zip(&x.values) {
            prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn single_layer_is_symmetric_positive(c in chain(4), lmax in 1usize..5, seed in prop::collection::vec(-1.0f64..1.0, 1..8)) {
        let v = SingleLayer::new(&c, lmax, MatvecMode::Direct).unwrap();
        let x = random_vec(c.len(), lmax, Space::Full, &seed);
        let y = random_vec(c.len(), lmax, Space::Full, &[0.3, -0.7, 1.1]);
        let vx = v.apply(&x).unwrap();
        let vy = v.apply(&y).unwrap();
        let (a, b) = (vx.dot(&y), vy.dot(&x));
        prop_assert!((a - b).abs() <= 1e-10 * (a.abs() + b.abs() + 1e-300), "{} vs {}", a, b);
        if x.values.iter().any(|v| *v != 0.0) {
            prop_assert!(vx.dot(&x) > 0.0);
        }
    }

    #[test]
    fn binary_round_trip(n in 1usize..5, lmax in 0usize..5, reduced in any::<bool>(), seed in prop::collection::vec(-1e6f64..1e6, 1..8)) {
        let space = if reduced && lmax > 0 { Space::Reduced } else { Space::Full };
        let x = random_vec(n, lmax, space, &seed).to_projection(&vec![1.5; n]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_solution(&p, &x).unwrap();
        let y = read_solution(&p).unwrap();
        prop_assert_eq!(y.values, x.values);
        prop_assert_eq!((y.n, y.lmax, y.space, y.repr), (x.n, x.lmax, x.space, x.repr));
    }
}
