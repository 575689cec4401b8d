//! Property tests for the structural invariants the optimizer relies on.

use aoii::closed_form::{
    average_penalty, h_margin, sigma_zero, stationary_distribution, update_rate, value_function,
    DEFAULT_EPS_TAIL,
};
use aoii::model::{transition_distribution, Action, SourceChannelParams, Threshold};
use aoii::optimizer::{find_threshold, solve, SolverOptions};
use aoii::{apps, PenaltySpec};
use proptest::prelude::*;

fn arb_params() -> impl Strategy<Value = SourceChannelParams> {
    (
        0.05f64..0.95,
        0.5f64..=1.0,
        0.3f64..=1.0,
        0.02f64..=1.0,
    )
        .prop_filter_map("admissible", |(alpha, beta, p_s, delta)| {
            SourceChannelParams::new(alpha, beta, p_s, delta).ok()
        })
}

fn arb_penalty() -> impl Strategy<Value = PenaltySpec> {
    prop_oneof![
        Just(apps::linear_f()),
        Just(apps::error_f()),
        Just(apps::weibull_f(&apps::WeibullParams::paper(), 1e-3).unwrap()),
        Just(apps::video_f(&apps::VideoParams::paper()).unwrap()),
        Just(apps::fire_f(&apps::FireParams::paper()).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_rows_are_distributions(p in arb_params(), s in 0u64..200) {
        for action in [Action::Idle, Action::Transmit] {
            let dist = transition_distribution(s, action, &p);
            let total: f64 = dist.iter().map(|(_, pr)| pr).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(dist.iter().all(|(_, pr)| *pr >= 0.0));
        }
        // State 0 ignores the action; elsewhere transmission strictly helps.
        let idle = transition_distribution(s, Action::Idle, &p);
        let tx = transition_distribution(s, Action::Transmit, &p);
        if s == 0 {
            prop_assert_eq!(idle, tx);
        } else {
            prop_assert!(tx[1].1 - idle[1].1 > 0.0);
        }
    }

    #[test]
    fn activity_margin_changes_sign_once_and_grows_to_the_crossing(
        p in arb_params(),
        f in arb_penalty(),
        lambda in 0.0f64..20.0,
    ) {
        // The threshold search needs (a) a single sign change of H and (b)
        // non-decreasing values up to and including the first positive index.
        // Above the crossing H may dip (the lumped top state of a saturating
        // penalty bends it) without affecting the search.
        let cap = f.s_thresh().unwrap_or(40);
        let mut crossed = false;
        let mut prev = f64::NEG_INFINITY;
        for n in 1..=cap {
            let h = h_margin(n, lambda, &p, &f, DEFAULT_EPS_TAIL).unwrap();
            if crossed {
                prop_assert!(h > 0.0, "H({n}) = {h} dips back below zero");
            } else {
                prop_assert!(
                    h >= prev - 1e-9 * prev.abs().max(1.0),
                    "H({n}) = {h} < H({}) = {prev} before the crossing", n - 1
                );
                prev = h;
                crossed = h > 0.0;
            }
        }
    }

    #[test]
    fn update_rate_is_strictly_decreasing(p in arb_params()) {
        prop_assert!((update_rate(Threshold::At(1), &p) - p.vartheta()).abs() < 1e-12);
        let mut prev = 1.0; // C(Always)
        for n in 1..=40 {
            let c = update_rate(Threshold::At(n), &p);
            prop_assert!(c < prev, "C({n}) = {c} >= {prev}");
            prop_assert!(c > 0.0);
            prev = c;
        }
    }

    #[test]
    fn stationary_masses_sum_to_one(p in arb_params(), n in 1u64..25) {
        let f = apps::linear_f();
        // Cap large enough for the slowest geometric tail in the strategy.
        let d = stationary_distribution(Threshold::At(n), &p, &f, 2000).unwrap();
        prop_assert!((d.total_mass() - 1.0).abs() < 1e-9);
        let c = update_rate(Threshold::At(n), &p);
        prop_assert!((d.mass_from(n) - c).abs() < 1e-9);
    }

    #[test]
    fn threshold_search_is_monotone_in_lambda(
        p in arb_params(),
        f in arb_penalty(),
        lo in 0.0f64..10.0,
        gap in 0.0f64..10.0,
    ) {
        let opts = SolverOptions::default();
        let n_lo = find_threshold(lo, &p, &f, &opts).unwrap();
        let n_hi = find_threshold(lo + gap, &p, &f, &opts).unwrap();
        prop_assert!(n_lo <= n_hi, "{n_lo:?} > {n_hi:?}");
    }

    #[test]
    fn search_result_is_consistent_with_the_activity_rule(
        p in arb_params(),
        f in arb_penalty(),
        lambda in 0.0f64..15.0,
    ) {
        let opts = SolverOptions::default();
        let bound = lambda / (p.beta() - p.a());
        match find_threshold(lambda, &p, &f, &opts).unwrap() {
            Threshold::Always => {
                let v1 = value_function(1, Threshold::At(1), lambda, &p, &f, opts.eps_tail).unwrap();
                prop_assert!(v1 > bound);
            }
            Threshold::At(n) => {
                let v_n = value_function(n, Threshold::At(n), lambda, &p, &f, opts.eps_tail).unwrap();
                let v_n1 = value_function(n + 1, Threshold::At(n), lambda, &p, &f, opts.eps_tail).unwrap();
                prop_assert!(v_n <= bound + 1e-9, "V(n)={v_n} bound={bound}");
                prop_assert!(v_n1 > bound - 1e-9, "V(n+1)={v_n1} bound={bound}");
            }
            Threshold::Never => {
                // Idling even at the top state beats paying the multiplier.
                let s = f.s_thresh().unwrap();
                let v_top = value_function(s, Threshold::At(s), lambda, &p, &f, opts.eps_tail).unwrap();
                prop_assert!(v_top <= bound + 1e-9);
            }
        }
    }

    #[test]
    fn solver_meets_the_budget_and_brackets_it(p in arb_params(), f in arb_penalty()) {
        let sol = solve(&p, &f, &SolverOptions::default()).unwrap();
        let delta = p.delta();
        prop_assert!(sol.achieved_rate <= delta + 1e-3);
        prop_assert!(sol.policy.c_low >= delta - 1e-9 || sol.policy.is_pure());
        prop_assert!(sol.policy.c_high <= delta + 1e-9);
        prop_assert!((0.0..=1.0).contains(&sol.policy.mu));
        prop_assert!((0.0..=1.0).contains(&sol.policy.q_boundary));
        if !sol.policy.is_pure() {
            prop_assert!((sol.achieved_rate - delta).abs() < 1e-9);
            // Adjacent components.
            let succ = match sol.policy.n_low {
                Threshold::Always => Threshold::At(1),
                Threshold::At(n) => match f.s_thresh() {
                    Some(s) if n >= s => Threshold::Never,
                    _ => Threshold::At(n + 1),
                },
                Threshold::Never => Threshold::Never,
            };
            prop_assert_eq!(succ, sol.policy.n_high);
        }
    }

    #[test]
    fn average_penalty_is_monotone_in_the_threshold_for_error(p in arb_params()) {
        // Lower thresholds transmit more and can only reduce the error.
        let f = apps::error_f();
        let mut prev = 0.0;
        for n in 1..=10u64 {
            let e = average_penalty(Threshold::At(n), &p, &f, DEFAULT_EPS_TAIL).unwrap();
            prop_assert!(e >= prev - 1e-12);
            prop_assert!((e - (1.0 - sigma_zero(Threshold::At(n), &p))).abs() < 1e-12);
            prev = e;
        }
    }
}

#[test]
fn beta_limit_regression_against_near_one() {
    // Exact beta = 1 forms against beta = 1 - 1e-9 across the fire setup.
    let exact = SourceChannelParams::new(0.2, 1.0, 1.0, 0.3).unwrap();
    let near = SourceChannelParams::new(0.2, 1.0 - 1e-9, 1.0, 0.3).unwrap();
    let f = apps::fire_f(&apps::FireParams::paper()).unwrap();
    for n in [1u64, 5, 12, 24] {
        let c0 = update_rate(Threshold::At(n), &exact);
        let c1 = update_rate(Threshold::At(n), &near);
        assert!((c0 - c1).abs() / c0 < 1e-6, "rate n={n}");
        let p0 = average_penalty(Threshold::At(n), &exact, &f, 1e-12).unwrap();
        let p1 = average_penalty(Threshold::At(n), &near, &f, 1e-12).unwrap();
        assert!((p0 - p1).abs() / p0 < 1e-6, "penalty n={n}");
        for lambda in [0.0, 1.0, 4.0] {
            let h0 = h_margin(n, lambda, &exact, &f, 1e-12).unwrap();
            let h1 = h_margin(n, lambda, &near, &f, 1e-12).unwrap();
            assert!(
                (h0 - h1).abs() / h0.abs().max(1.0) < 1e-6,
                "H n={n} lambda={lambda}"
            );
        }
    }
}

#[test]
fn fire_configuration_composes_end_to_end() {
    // beta = 1 regression fixture: the saturating penalty with an absorbing
    // source must flow through the whole solver with finite outputs.
    let f = apps::fire_f(&apps::FireParams::paper()).unwrap();
    for delta in [0.05, 0.2, 0.444, 0.7] {
        let p = SourceChannelParams::new(0.2, 1.0, 1.0, delta).unwrap();
        let sol = solve(&p, &f, &SolverOptions::default()).unwrap();
        assert!(sol.avg_aoii.is_finite() && sol.avg_aoii > 0.0, "delta={delta}");
        assert!(sol.achieved_rate <= delta + 1e-9);
        if delta < p.vartheta() {
            assert!((sol.achieved_rate - delta).abs() < 1e-9);
        }
    }
}

#[test]
fn forward_and_backward_value_branches_agree_on_a_grid() {
    // V(n) from the unrolled backward recursion must equal the forward
    // branch at S = n across parameters, thresholds, and multipliers.
    let f = apps::linear_f();
    for (alpha, beta, p_s) in [(0.1, 0.7, 0.6), (0.3, 0.9, 0.9), (0.5, 0.8, 0.8)] {
        let p = SourceChannelParams::new(alpha, beta, p_s, 0.5).unwrap();
        for n in [2u64, 4, 9] {
            for lambda in [0.3, 1.7, 6.0] {
                let v_n = value_function(n, Threshold::At(n), lambda, &p, &f, 1e-12).unwrap();
                let v_nm1 =
                    value_function(n - 1, Threshold::At(n), lambda, &p, &f, 1e-12).unwrap();
                let th = aoii::closed_form::theta(n, lambda, &p, &f, 1e-12).unwrap();
                let recursion = -th + f.eval(n - 1) + beta * v_n;
                assert!(
                    (v_nm1 - recursion).abs() < 1e-9,
                    "alpha={alpha} n={n} lambda={lambda}"
                );
            }
        }
    }
}
