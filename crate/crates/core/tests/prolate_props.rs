use proptest::prelude::*;
use slepbeam::slepian::{generalized_prolate, prolate_kernel, prolate_matrix, ProlateSpec};
use slepbeam::linalg::symmetric_eigen;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_is_time_bandwidth(w in 0.001f64..0.5, m in 1usize..200) {
        let b = prolate_matrix(w, m).unwrap();
        let want = 2.0 * w * m as f64;
        prop_assert!((b.trace() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn eigenvalues_lie_in_unit_interval(w in 0.001f64..0.5, m in 2usize..96) {
        let (vals, _) = symmetric_eigen(&prolate_matrix(w, m).unwrap());
        for v in vals {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "{v}");
        }
    }

    #[test]
    fn lag_scaling(w in 0.01f64..0.25, s in 0.2f64..2.0, lags in prop::collection::vec(-20.0f64..20.0, 2..24)) {
        // s * B(s * lags, W / s) == B(lags, W)
        prop_assume!(w / s <= 0.5);
        let a = generalized_prolate(&ProlateSpec { normalized_lags: lags.clone(), half_bandwidth: w }).unwrap();
        let scaled = ProlateSpec { normalized_lags: lags.iter().map(|l| l * s).collect(), half_bandwidth: w / s };
        let b = generalized_prolate(&scaled).unwrap() * s;
        prop_assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn shifting_lags_leaves_matrix_unchanged(w in 0.01f64..0.5, shift in -50.0f64..50.0, m in 2usize..32) {
        let base = ProlateSpec::uniform(w, m);
        let moved = ProlateSpec { normalized_lags: base.normalized_lags.iter().map(|l| l + shift).collect(), half_bandwidth: w };
        let d = generalized_prolate(&base).unwrap() - generalized_prolate(&moved).unwrap();
        prop_assert!(d.amax() < 1e-9);
    }
}

#[test]
fn kernel_is_continuous_at_zero() {
    for w in [0.05, 0.25, 0.5] {
        let at = prolate_kernel(w, 0.0);
        assert_eq!(at, 2.0 * w);
        assert!((prolate_kernel(w, 1e-7) - at).abs() < 1e-10);
    }
}

#[test]
fn uniform_spec_matches_classical_matrix() {
    let a = prolate_matrix(0.17, 40).unwrap();
    let b = generalized_prolate(&ProlateSpec::uniform(0.17, 40)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_aliased_bandwidth() {
    assert!(prolate_matrix(0.6, 8).is_err());
    assert!(prolate_matrix(0.2, 0).is_err());
}
