use emcl::emcl::FeatureMatrix;
use emcl::linalg::{numerical_rank, RANK_REL_TOL};
use emcl::synthetic::{class_variance, generate, pca_reconstruct, SyntheticSpec};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = SyntheticSpec> {
    (
        2usize..=4,
        1usize..=10,
        0usize..=8,
        any::<u64>(),
        0.0..1.0f64,
    )
        .prop_map(|(c, per_class, extra, seed, offset)| SyntheticSpec {
            num_classes: c,
            per_class,
            signal_dim: c,
            ambient_dim: c + extra,
            modality_offset: offset,
            seed,
            ..SyntheticSpec::default()
        })
}

fn data() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..=20, 1usize..=10).prop_flat_map(|(n, d)| {
        prop::collection::vec(-3.0..3.0f64, n * d).prop_map(move |v| DMatrix::from_vec(n, d, v))
    })
}

/// Error energy discarded by a rank-k fit, from the eigenvalues of the centered
/// Gram matrix rather than an SVD.
fn discarded_energy(x: &DMatrix<f64>, k: usize) -> f64 {
    let mean = x.row_mean();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    let mut e: Vec<f64> = SymmetricEigen::new(c.transpose() * &c)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e.iter().skip(k).map(|v| v.max(0.0)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn generator_is_deterministic(s in spec()) {
        prop_assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
    }

    #[test]
    fn variances_are_translation_invariant(s in spec(), shift in prop::collection::vec(-50.0..50.0f64, 12)) {
        let b = generate(&s).unwrap();
        let x = b.features.as_matrix();
        let moved = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] + shift[j]);
        let a = class_variance(&b.features, &b.labels).unwrap();
        let m = class_variance(&FeatureMatrix::new(moved).unwrap(), &b.labels).unwrap();
        prop_assert!((a.intra - m.intra).abs() < 1e-8 * (1.0 + a.intra));
        prop_assert!((a.inter - m.inter).abs() < 1e-8 * (1.0 + a.inter));
    }

    #[test]
    fn pca_rank_is_at_most_k_plus_mean(x in data(), k in 1usize..=10) {
        let k = k.min(x.nrows().min(x.ncols()));
        let r = pca_reconstruct(&FeatureMatrix::new(x).unwrap(), k).unwrap();
        prop_assert!(numerical_rank(r.as_matrix(), RANK_REL_TOL).unwrap() <= k + 1);
    }

    #[test]
    fn pca_error_matches_discarded_energy(x in data(), k in 1usize..=10) {
        let k = k.min(x.nrows().min(x.ncols()));
        let r = pca_reconstruct(&FeatureMatrix::new(x.clone()).unwrap(), k).unwrap();
        let err = (r.as_matrix() - &x).norm_squared();
        prop_assert!((err - discarded_energy(&x, k)).abs() < 1e-9 * (1.0 + x.norm_squared()));
    }
}
