use proptest::prelude::*;
use sparsectl::bounds::{
    distance_estimate, h0_series, h_tail, k_max_bound, kantorovich_check, mysovskikh_check, ProblemConstants,
};

fn partial_sum(delta: f64, from: u32, terms: u32) -> f64 {
    (from..from + terms).map(|l| delta.powf(2f64.powi(l as i32))).sum()
}

#[test]
fn h0_matches_direct_partial_sums() {
    for delta in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let direct = partial_sum(delta, 0, 12);
        assert!((h0_series(delta).unwrap() - direct).abs() <= 1e-15, "delta {delta}");
    }
}

#[test]
fn tail_recurrence() {
    for delta in [0.3, 0.5] {
        for j in 0..=6u32 {
            let lhs = h_tail(j + 1, delta).unwrap();
            let rhs = h_tail(j, delta).unwrap() - delta.powf(2f64.powi(j as i32));
            assert!((lhs - rhs).abs() <= 1e-15, "j {j}, delta {delta}");
        }
    }
}

#[test]
fn distance_beyond_k_max_uses_tails() {
    let (mu, l, s) = (1.0, 1.0, 1.3);
    let k_max = k_max_bound(mu, l, s).unwrap();
    let v = l * s / (mu * mu) - k_max as f64 / 2.0;
    for extra in 0..4u64 {
        let d = distance_estimate(k_max + extra, mu, l, s).unwrap();
        let expected = 2.0 * mu / l * h_tail(extra as u32, v / 2.0).unwrap();
        assert!((d - expected).abs() <= 1e-15);
    }
}

fn constants(l_const: f64, s: f64) -> ProblemConstants {
    ProblemConstants { mu0: 1.0, mu: 1.0, l_const, rho: 1.0, s }
}

proptest! {
    #[test]
    fn checks_are_monotone_in_s(l in 0.1..4.0f64, s in 0.0..2.0f64, shrink in 0.0..1.0f64) {
        let smaller = s * shrink;
        if kantorovich_check(&constants(l, s)).unwrap().condition_holds {
            prop_assert!(kantorovich_check(&constants(l, smaller)).unwrap().condition_holds);
        }
        if mysovskikh_check(&constants(l, s)).unwrap().condition_holds {
            prop_assert!(mysovskikh_check(&constants(l, smaller)).unwrap().condition_holds);
        }
    }

    #[test]
    fn k_max_monotonicity(mu in 0.1..3.0f64, l in 0.1..3.0f64, s in 0.0..5.0f64, f in 1.0..3.0f64) {
        let base = k_max_bound(mu, l, s).unwrap();
        prop_assert!(k_max_bound(mu, l, s * f).unwrap() >= base);
        prop_assert!(k_max_bound(mu, l * f, s).unwrap() >= base);
        prop_assert!(k_max_bound(mu * f, l, s).unwrap() <= base);
    }

    #[test]
    fn tail_is_nonincreasing(delta in 0.0..0.99f64, j in 0u32..8) {
        prop_assert!(h_tail(j + 1, delta).unwrap() <= h_tail(j, delta).unwrap());
    }
}
