use emcl::contrastive::SimilarityMatrix;
use emcl::retrieval::{compute_report, evaluate_both, rank_matrix, Direction, RECALL_KS};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Square similarity with a random one-to-one ground truth.
fn scored() -> impl Strategy<Value = (DMatrix<f64>, Vec<usize>)> {
    (1usize..=24).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0..1.0f64, n * n)
                .prop_map(move |v| DMatrix::from_vec(n, n, v)),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

fn sim(m: DMatrix<f64>) -> SimilarityMatrix {
    SimilarityMatrix::new(m, 0.01).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn recall_is_monotone_in_k((s, gt) in scored()) {
        let r = compute_report(&rank_matrix(&sim(s), &gt).unwrap(), Direction::TextToVideo).unwrap();
        let values: Vec<f64> = RECALL_KS.iter().map(|&k| r.recall_at(k).unwrap()).collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(values.iter().all(|&v| (0.0..=100.0).contains(&v)));
    }

    #[test]
    fn ranks_are_within_bounds((s, gt) in scored()) {
        let n = s.ncols();
        let ranks = rank_matrix(&sim(s), &gt).unwrap();
        prop_assert!(ranks.iter().all(|&r| (1..=n).contains(&r)));
    }

    #[test]
    fn directions_are_dual((s, gt) in scored()) {
        let (t2v, v2t) = evaluate_both(&sim(s.clone()), &gt).unwrap();
        let mut inverse = vec![0; gt.len()];
        for (q, &g) in gt.iter().enumerate() {
            inverse[g] = q;
        }
        let (v2t_swapped, t2v_swapped) = evaluate_both(&sim(s.transpose()), &inverse).unwrap();
        prop_assert_eq!(t2v.recall, t2v_swapped.recall);
        prop_assert_eq!(t2v.median_rank, t2v_swapped.median_rank);
        prop_assert_eq!(v2t.recall, v2t_swapped.recall);
        prop_assert_eq!(v2t.median_rank, v2t_swapped.median_rank);
    }

    #[test]
    fn strictly_increasing_transforms_leave_reports_unchanged((s, gt) in scored(), which in 0usize..3) {
        let f = |v: f64| match which {
            0 => v.exp(),
            1 => 3.0 * v - 7.0,
            _ => v.powi(3) + v,
        };
        let a = evaluate_both(&sim(s.clone()), &gt).unwrap();
        let b = evaluate_both(&sim(s.map(f)), &gt).unwrap();
        prop_assert_eq!(a, b);
    }
}
