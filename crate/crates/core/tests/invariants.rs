//! Property tests over randomized inputs.

use proptest::prelude::*;
use rand::Rng;

use ewens_mdp::asymptotics::{psi, rate};
use ewens_mdp::contour::{circle_integral, circle_integral_auto, zero_free_radius, CircleContour};
use ewens_mdp::mc::{estimate_tail, estimate_tail_range, merge};
use ewens_mdp::mgf::{log_mgf, y_l_of_t, y_of_t, MlMode, ModerationScale};
use ewens_mdp::partition::{
    crp_step_probs, replicate_rng, sample_partition, spectrum_of, EwensPitmanParams, PartitionState,
};
use ewens_mdp::roots::{residual, solve_singularities};
use ewens_mdp::special::{
    compositions, ln_factorial, log_binom_real, recip_deriv, recip_series_oracle, PowerSeriesHead,
};
use ewens_mdp::{StatParams, Statistic};

fn binom(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn stat_strategy() -> impl Strategy<Value = Statistic> {
    prop_oneof![
        Just(Statistic::K),
        Just(Statistic::Ml),
        Just(Statistic::Kpost),
        Just(Statistic::Mlpost)
    ]
}

fn params_for(stat: Statistic, n: u64, m: u64, j: u64, l: u64, alpha: f64) -> StatParams {
    match stat {
        Statistic::K => StatParams::k(n, alpha),
        Statistic::Ml => StatParams::ml(n, l.min(n), alpha),
        Statistic::Kpost => StatParams::kpost(n, m, j.min(n), alpha),
        Statistic::Mlpost => StatParams::mlpost(n, m, j.min(n), l.min(m), alpha),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_partitions_are_consistent(n in 1u64..400, alpha in 0.05f64..0.95, theta_off in 0.01f64..5.0, seed in any::<u64>()) {
        let params = EwensPitmanParams::new(alpha, theta_off - alpha).unwrap();
        let state = sample_partition(n, &params, seed);
        let spectrum = spectrum_of(&state);
        prop_assert_eq!(state.block_sizes().iter().sum::<u64>(), n);
        prop_assert_eq!(spectrum.counts().iter().map(|(l, c)| l * c).sum::<u64>(), n);
        prop_assert_eq!(spectrum.num_blocks(), state.num_blocks() as u64);
    }

    #[test]
    fn step_probabilities_sum_to_one(sizes in prop::collection::vec(1u64..50, 1..30), alpha in 0.0f64..0.99, theta_off in 0.001f64..10.0) {
        let params = EwensPitmanParams::new(alpha, theta_off - alpha).unwrap();
        let state = PartitionState::from_block_sizes(sizes).unwrap();
        let step = crp_step_probs(&state, &params);
        let total = step.p_new + step.joins.iter().sum::<f64>();
        prop_assert!((total - 1.0).abs() < 1e-14);
        prop_assert!(step.joins.iter().all(|&q| q >= 0.0));
    }

    #[test]
    fn reciprocal_derivative_identity(j in 1u32..=4, k in 0u32..=6, seed in any::<u64>()) {
        let mut rng = replicate_rng(seed, 0);
        let coeffs: Vec<f64> = (0..=k)
            .map(|_| {
                let mag = 10f64.powf(rng.gen_range(-1.0..1.0));
                if rng.gen_bool(0.5) { mag } else { -mag }
            })
            .collect();
        let head = PowerSeriesHead::new(j, coeffs).unwrap();
        let lemma = recip_deriv(&head, k).unwrap();
        let conv = recip_series_oracle(&head, k).unwrap()[k as usize] * ln_factorial(k as u64).exp();
        prop_assert!((lemma - conv).abs() <= 1e-9 * conv.abs().max(lemma.abs()).max(1e-300), "{} vs {}", lemma, conv);
    }

    #[test]
    fn binomial_weights_nondecreasing(alpha in 0.01f64..0.99, n in 1u64..200, i in 0u64..500) {
        let a = log_binom_real(alpha * i as f64 + n as f64 - 1.0, n - 1).unwrap();
        let b = log_binom_real(alpha * (i + 1) as f64 + n as f64 - 1.0, n - 1).unwrap();
        prop_assert!(a.is_finite() && b.is_finite());
        prop_assert!(b >= a - 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn log_mgf_positive_monotone_convex(
        stat in stat_strategy(),
        n in 1u64..60, m in 1u64..60, j in 1u64..5, l in 1u64..4,
        alpha in 0.1f64..0.9, t in 0.0f64..1.5, h in 0.01f64..0.3,
    ) {
        let p = params_for(stat, n, m, j, l, alpha);
        let f = |t: f64| log_mgf(stat, &p, t, MlMode::Exact).unwrap().log_value;
        let (a, b, c) = (f(t), f(t + h), f(t + 2.0 * h));
        let slack = 1e-10 * c.abs().max(1.0);
        prop_assert!(a >= -slack);
        prop_assert!(b >= a - slack && c >= b - slack);
        prop_assert!(a + c - 2.0 * b >= -slack, "{} {} {}", a, b, c);
    }

    #[test]
    fn circle_integral_radius_and_node_invariance(
        stat in stat_strategy(),
        n in 2u64..40, m in 2u64..40, j in 1u64..4, l in 1u64..4,
        alpha in 0.2f64..0.8, t in 0.1f64..1.0, shrink in 0.8f64..1.0,
    ) {
        let p = params_for(stat, n, m, j, l, alpha);
        let w = if stat.needs_l() { y_l_of_t(t, l, alpha).unwrap() } else { y_of_t(t) };
        let auto = circle_integral_auto(stat, &p, w).unwrap();
        let (rho, nodes) = (auto.contour.rho, auto.contour.nodes);
        prop_assert!(rho < zero_free_radius(stat, &p, w).unwrap());
        let doubled = circle_integral(stat, &p, w, &CircleContour::new(rho, 2 * nodes).unwrap()).unwrap();
        let moved = circle_integral(stat, &p, w, &CircleContour::new(rho * shrink, 2 * nodes).unwrap()).unwrap();
        let scale = auto.log_value.abs().max(1.0);
        prop_assert!((auto.log_value - doubled.log_value).abs() <= 1e-9 * scale);
        prop_assert!((auto.log_value - moved.log_value).abs() <= 1e-9 * scale, "{} vs {}", auto.log_value, moved.log_value);
    }

    #[test]
    fn roots_solve_and_respect_parity(l in 1u64..6, alpha in 0.05f64..0.95, log_y in -25.0f64..-0.7) {
        let y = log_y.exp();
        let s = solve_singularities(l, alpha, y).unwrap();
        prop_assert!(s.outer > 1.0);
        prop_assert!(s.residual(s.outer) <= 1e-11);
        match s.inner {
            Some(x) => {
                prop_assert!(l % 2 == 0 && x > 0.0 && x < 1.0);
                prop_assert!(s.residual(x) <= 1e-11);
            }
            None => prop_assert!(l % 2 == 1),
        }
        if l % 2 == 1 {
            // no root inside (0, 1): 1 - y x^(α-l)(x-1)^l stays positive there
            for i in 1..20 {
                let x = i as f64 / 20.0;
                prop_assert!(residual(l, alpha, y, x) > 0.0);
            }
        }
    }

    #[test]
    fn rate_convex_and_zero_only_at_origin(alpha in 0.05f64..0.95, x in 0.01f64..5.0, h in 0.01f64..1.0, l in 1u64..4) {
        for stat in [Statistic::K, Statistic::Ml] {
            let r = |x: f64| rate(stat, x, alpha, l).unwrap().value;
            prop_assert_eq!(r(0.0), 0.0);
            prop_assert!(r(x) > 0.0);
            prop_assert!(r(x) + r(x + 2.0 * h) - 2.0 * r(x + h) >= -1e-12 * r(x + 2.0 * h));
        }
        prop_assert_eq!(rate(Statistic::K, x, alpha, l).unwrap().value, rate(Statistic::Kpost, x, alpha, l).unwrap().value);
        prop_assert_eq!(rate(Statistic::Ml, x, alpha, l).unwrap().value, rate(Statistic::Mlpost, x, alpha, l).unwrap().value);
    }

    #[test]
    fn psi_convex_and_continuous_at_zero(alpha in 0.05f64..0.95, lam in 0.0f64..5.0, h in 0.01f64..1.0) {
        let f = |x: f64| psi(Statistic::K, x, alpha, 1).unwrap();
        prop_assert_eq!(f(-lam), 0.0);
        prop_assert!(f(1e-12) < 1e-6);
        prop_assert!(f(lam) + f(lam + 2.0 * h) - 2.0 * f(lam + h) >= -1e-12 * f(lam + 2.0 * h));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tail_estimates_merge_and_are_monotone(n in 10u64..300, split in 1u64..199, seed in any::<u64>(), x in 0.1f64..2.0) {
        let p = StatParams::k(n, 0.5);
        let scale = ModerationScale::log_power(0.25);
        let whole = estimate_tail(Statistic::K, &p, 0.0, &scale, x, 200, seed).unwrap();
        let left = estimate_tail_range(Statistic::K, &p, 0.0, &scale, x, 0..split, seed).unwrap();
        let right = estimate_tail_range(Statistic::K, &p, 0.0, &scale, x, split..200, seed).unwrap();
        prop_assert_eq!(&merge(&left, &right).unwrap(), &whole);
        prop_assert_eq!(&merge(&right, &left).unwrap(), &whole);
        let higher = estimate_tail(Statistic::K, &p, 0.0, &scale, x + 0.5, 200, seed).unwrap();
        prop_assert!(higher.hits <= whole.hits);
    }
}

#[test]
fn composition_counts() {
    for k in 1..=12u32 {
        for s in 1..=k {
            assert_eq!(
                compositions(k, s).len() as u64,
                binom(k as u64 - 1, s as u64 - 1),
                "k={k} s={s}"
            );
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let p = StatParams::kpost(10, 300, 3, 0.4);
    let scale = ModerationScale::log_power(0.25);
    let run = || estimate_tail(Statistic::Kpost, &p, 0.0, &scale, 0.3, 500, 42).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(run);
    assert_eq!(single, many);
}
