use crtx_core::theory::{
    bound_report, conditions_hold, expected_reduction, matched_k, monte_carlo_reduction, BoundParams, ErrorSampling,
};
use proptest::prelude::*;

fn grid() -> impl Iterator<Item = BoundParams> {
    (0..=16).flat_map(|i| {
        let t = 2.0 + 0.5 * i as f64;
        (3..=100).map(move |n| BoundParams::new(t, matched_k(t), n, 1.0).unwrap())
    })
}

#[test]
fn reduction_positive_on_the_whole_grid() {
    let mut cells = 0;
    for p in grid() {
        assert!(expected_reduction(&p) > 0.0, "{p:?}");
        cells += 1;
    }
    assert_eq!(cells, 17 * 98);
}

#[test]
fn first_condition_rows_are_positive() {
    for p in grid().filter(|p| conditions_hold(p).k_is_t_minus_one) {
        assert!(expected_reduction(&p) > 0.0);
    }
    assert!(grid().any(|p| conditions_hold(&p).k_is_t_minus_one));
}

#[test]
fn hand_values() {
    let r = expected_reduction(&BoundParams::new(2.0, 1, 1, 1.0).unwrap());
    assert!((r - 3.0).abs() < 1e-12);
    let c = conditions_hold(&BoundParams::new(5.0, 4, 10, 1.0).unwrap());
    assert!((c.asymptotic_lhs - 4.0 / 48.0).abs() < 1e-12);
    assert!((c.asymptotic_rhs - 332.0 / 576.0).abs() < 1e-12);
    assert!(c.asymptotic);
    assert!(!conditions_hold(&BoundParams::new(3.0, 1, 10, 1.0).unwrap()).asymptotic);
}

#[test]
fn near_degenerate_interval() {
    let p = BoundParams::new(1.0001, 1, 10, 1.0).unwrap();
    let mc = monte_carlo_reduction(&p, 1000, ErrorSampling::Lattice, 3).unwrap();
    assert!((mc.estimate - 10.0).abs() < 1e-2, "{mc:?}");
    assert!(mc.standard_error < 1e-3);
}

#[test]
fn continuous_sampling_is_biased_against_the_closed_form() {
    // Continuous draws have E[e^2] = (t^2 + t + 1)/3, not the right-endpoint sum.
    let p = BoundParams::new(6.0, 5, 20, 1.0).unwrap();
    let mc = monte_carlo_reduction(&p, 4000, ErrorSampling::Continuous, 11).unwrap();
    let continuous_mean = 20.0 * (36.0 + 6.0 + 1.0) / 3.0 - 20.0;
    assert!((mc.estimate - continuous_mean).abs() < 4.0 * mc.standard_error);
    assert!((mc.estimate - expected_reduction(&p)).abs() > 4.0 * mc.standard_error);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    // Larger k shrinks the subtracted residual, so R cannot fall.
    #[test]
    fn reduction_non_decreasing_in_k(t in 1.01f64..20.0, n in 1usize..200, k in 1usize..30) {
        let a = expected_reduction(&BoundParams::new(t, k, n, 1.0).unwrap());
        let b = expected_reduction(&BoundParams::new(t, k + 1, n, 1.0).unwrap());
        prop_assert!(b >= a);
    }

    #[test]
    fn monte_carlo_sign_matches_when_resolved(t in 1.5f64..12.0, n in 1usize..60, k in 1usize..6, seed in any::<u64>()) {
        let p = BoundParams::new(t, k, n, 1.0).unwrap();
        let rep = bound_report(&p, 200, ErrorSampling::Lattice, seed).unwrap();
        if rep.analytic.abs() > 3.0 * rep.monte_carlo.standard_error && rep.analytic.abs() > 1e-9 {
            prop_assert_eq!(rep.monte_carlo.estimate > 0.0, rep.analytic > 0.0, "{:?}", rep);
        }
    }

    #[test]
    fn monte_carlo_is_seeded(t in 1.5f64..12.0, n in 1usize..40, seed in any::<u64>()) {
        let p = BoundParams::new(t, matched_k(t), n, 1.0).unwrap();
        prop_assert_eq!(
            monte_carlo_reduction(&p, 100, ErrorSampling::Lattice, seed).unwrap(),
            monte_carlo_reduction(&p, 100, ErrorSampling::Lattice, seed).unwrap()
        );
    }
}
