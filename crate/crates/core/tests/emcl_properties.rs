use emcl::emcl::{
    e_step, emcl_iterate, init_bases, m_step, normalize_bases, reconstruct, BasisMatrix,
    EmclConfig, FeatureMatrix, InitialState, Kernel,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v) * scale)
}

/// (X, λ, σ) with X of shape n×d and λ of shape n×k.
fn triple() -> impl Strategy<Value = (FeatureMatrix, BasisMatrix, f64)> {
    (1usize..=32, 2usize..=96, 1usize..=16, 0.05..5.0f64).prop_flat_map(|(b, d, k, sigma)| {
        (matrix(2 * b, d, 3.0), matrix(2 * b, k, 3.0), Just(sigma)).prop_map(|(x, l, s)| {
            (
                FeatureMatrix::new(x).unwrap(),
                BasisMatrix::new(l).unwrap(),
                s,
            )
        })
    })
}

fn batch() -> impl Strategy<Value = (FeatureMatrix, InitialState, EmclConfig)> {
    (
        1usize..=12,
        2usize..=32,
        1usize..=8,
        1usize..=6,
        0.3..3.0f64,
        any::<u64>(),
    )
        .prop_flat_map(|(b, d, k, iters, sigma, seed)| {
            matrix(2 * b, d, 2.0).prop_map(move |x| {
                let cfg = EmclConfig {
                    k,
                    iters,
                    sigma,
                    seed,
                    ..EmclConfig::default()
                };
                let state = InitialState::cold_start(k, 2 * b, cfg.alpha, seed).unwrap();
                (FeatureMatrix::new(x).unwrap(), state, cfg)
            })
        })
}

/// Singular values via the eigenvalues of the Gram matrix, independent of
/// the SVD used inside the library.
fn gram_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let mut s: Vec<f64> = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .map(|&e| e.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn responsibilities_are_row_stochastic((x, bases, sigma) in triple()) {
        let cfg = EmclConfig { k: bases.k(), sigma, ..EmclConfig::default() };
        let y = e_step(&x, &bases, &cfg).unwrap();
        for row in y.as_matrix().row_iter() {
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.sum() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn polynomial_kernel_responsibilities_are_row_stochastic((x, bases, _) in triple()) {
        let cfg = EmclConfig { k: bases.k(), kernel: Kernel::polynomial(), ..EmclConfig::default() };
        let y = e_step(&x, &bases, &cfg).unwrap();
        for row in y.as_matrix().row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn reconstruction_rank_is_at_most_k((x, state, cfg) in batch()) {
        let out = emcl_iterate(&x, &state, &cfg).unwrap();
        let s = gram_singular_values(out.reconstructed.as_matrix());
        for &v in s.iter().skip(cfg.k) {
            prop_assert!(v <= 1e-6 * s[0]);
        }
    }

    #[test]
    fn sample_permutation_is_equivariant((x, state, cfg) in batch(), rot in any::<usize>()) {
        let n = x.rows();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let px = FeatureMatrix::new(DMatrix::from_fn(n, x.cols(), |i, j| x.as_matrix()[(perm[i], j)])).unwrap();
        let a = emcl_iterate(&x, &state, &cfg).unwrap().reconstructed;
        let b = emcl_iterate(&px, &state, &cfg).unwrap().reconstructed;
        for (i, &src) in perm.iter().enumerate() {
            for j in 0..x.cols() {
                prop_assert!((b.as_matrix()[(i, j)] - a.as_matrix()[(src, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn iteration_is_deterministic((x, state, cfg) in batch()) {
        let a = emcl_iterate(&x, &state, &cfg).unwrap();
        let b = emcl_iterate(&x, &state, &cfg).unwrap();
        prop_assert_eq!(a.reconstructed, b.reconstructed);
        prop_assert_eq!(a.state, b.state);
    }

    #[test]
    fn loop_matches_manual_steps((x, state, cfg) in batch()) {
        let out = emcl_iterate(&x, &state, &cfg).unwrap();
        let mut bases = init_bases(&state, x.rows()).unwrap();
        let mut y = None;
        for _ in 0..cfg.iters {
            let r = e_step(&x, &bases, &cfg).unwrap();
            bases = normalize_bases(&m_step(&x, &r, &cfg).unwrap());
            y = Some(r);
        }
        let manual = reconstruct(&bases, &y.unwrap()).unwrap();
        prop_assert_eq!(out.reconstructed, manual);
        prop_assert_eq!(out.lambda_changes.len(), cfg.iters);
    }

    #[test]
    fn frozen_state_is_bitwise_unchanged((x, state, cfg) in batch()) {
        let frozen = state.frozen();
        let out = emcl_iterate(&x, &frozen, &cfg).unwrap();
        prop_assert_eq!(&out.state, &frozen);
        prop_assert_eq!(out.state.m.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        frozen.m.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn normalized_bases_are_unit_or_dead((x, state, cfg) in batch()) {
        let out = emcl_iterate(&x, &state, &cfg).unwrap();
        for (k, col) in out.bases.as_matrix().column_iter().enumerate() {
            if out.bases.dead_subspaces().contains(&k) {
                continue;
            }
            prop_assert!((col.norm() - 1.0).abs() < 1e-12);
        }
    }
}
