use emcl::emcl::FeatureMatrix;
use emcl::gmm::gmm_fit;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn data() -> impl Strategy<Value = (FeatureMatrix, usize, u64)> {
    (8usize..=80, 1usize..=4, 1usize..=4, any::<u64>()).prop_flat_map(|(n, d, k, seed)| {
        prop::collection::vec(-10.0..10.0f64, n * d).prop_map(move |v| {
            (
                FeatureMatrix::new(DMatrix::from_vec(n, d, v)).unwrap(),
                k,
                seed,
            )
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn log_likelihood_never_decreases((x, k, seed) in data()) {
        let fit = gmm_fit(&x, k, 30, seed).unwrap();
        for w in fit.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn separated_mixture_recovers_cluster_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let values: Vec<f64> = (0..200)
        .map(|i| if i < 100 { -5.0 } else { 5.0 } + noise.sample(&mut rng))
        .collect();
    let x = FeatureMatrix::from_row_slice(200, 1, &values).unwrap();
    let fit = gmm_fit(&x, 2, 50, 3).unwrap();
    let mut means: Vec<f64> = fit.params.means.iter().map(|m| m[0]).collect();
    means.sort_by(f64::total_cmp);
    let neg = values[..100].iter().sum::<f64>() / 100.0;
    let pos = values[100..].iter().sum::<f64>() / 100.0;
    assert!((means[0] - neg).abs() < 0.05, "{} vs {neg}", means[0]);
    assert!((means[1] - pos).abs() < 0.05, "{} vs {pos}", means[1]);
}
