use proptest::prelude::*;

use msfbcsp::harness::{median_range, wilcoxon_signed_rank};
use msfbcsp::lda::ProbabilityMatrix;
use msfbcsp::pipeline::{decide, fuse};

fn probs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, n)
}

proptest! {
    #[test]
    fn fusion_stays_on_simplex((a, b) in (1usize..30).prop_flat_map(|n| (probs(n), probs(n)))) {
        let p_n = ProbabilityMatrix::from_class0(a);
        let p_p = ProbabilityMatrix::from_class0(b);
        let out = fuse(&p_n, Some(&p_p)).unwrap();
        for r in out.rows() {
            prop_assert!((0.0..=1.0).contains(&r[0]));
            prop_assert!((r[0] + r[1] - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn fusion_keeps_agreed_decisions((a, b) in (1usize..30).prop_flat_map(|n| (probs(n), probs(n)))) {
        let p_n = ProbabilityMatrix::from_class0(a);
        let p_p = ProbabilityMatrix::from_class0(b);
        let fused = decide(&fuse(&p_n, Some(&p_p)).unwrap());
        for ((f, n), p) in fused.iter().zip(decide(&p_n)).zip(decide(&p_p)) {
            if n == p {
                prop_assert_eq!(*f, n);
            }
        }
    }

    #[test]
    fn median_within_range(v in prop::collection::vec(0.0f64..100.0, 1..60)) {
        let r = median_range(&v).unwrap();
        prop_assert!(r.min <= r.median && r.median <= r.max);
    }

    #[test]
    fn wilcoxon_is_symmetric(pairs in prop::collection::vec((0u8..10, 0u8..10), 1..40)) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let a = wilcoxon_signed_rank(&x, &y).unwrap();
        let b = wilcoxon_signed_rank(&y, &x).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.p_value));
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        prop_assert_eq!(a.n_eff, b.n_eff);
    }
}
