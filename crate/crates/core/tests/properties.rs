//! Property tests across modules.

use proptest::prelude::*;

use bufrelay::channel::FadingModel;
use bufrelay::closed_form::{
    delay_moments, delay_moments_nested, pa_residuals, pa_residuals_nested, threshold_balance,
    threshold_balance_nested, threshold_residual,
};
use bufrelay::policy::{validate_threshold_branch, DecisionFunction, PolicySpec, Protocol};
use bufrelay::sim::{simulate, SimConfig};
use bufrelay::special::{
    exp_integral_e1, exp_integral_e1_scaled, integrate, integrate_semi_infinite, lambert_w, Branch,
    QuadratureSpec,
};

fn decision() -> impl Strategy<Value = DecisionFunction> {
    prop_oneof![Just(DecisionFunction::Identity), Just(DecisionFunction::LogCapacity)]
}

fn policy() -> impl Strategy<Value = PolicySpec> {
    (0usize..6, 0.2f64..5.0, decision(), 0.5f64..20.0, -10.0f64..10.0).prop_map(
        |(kind, rho, f, q_max, gamma_db)| match kind {
            0 => PolicySpec::conv_no_buffer(),
            1 => PolicySpec::conv_buffer(),
            2 => PolicySpec::adaptive_fixed(rho, f),
            3 => PolicySpec::starved(rho, f).with_q_max(q_max),
            4 => PolicySpec::queue_limited(rho, f, q_max),
            _ => PolicySpec::adaptive_pa(0.3 * rho, rho, 10f64.powf(gamma_db / 10.0)),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulator_invariants(
        policy in policy(),
        omega_s in 0.1f64..10.0,
        omega_r in 0.1f64..10.0,
        seed in any::<u64>(),
    ) {
        let ms = FadingModel::rayleigh(omega_s).unwrap();
        let mr = FadingModel::rayleigh(omega_r).unwrap();
        let config = SimConfig::new(policy, ms, mr, 20_000).with_seed(seed).with_trace();
        let out = simulate(&config).unwrap();
        for row in &out.trace {
            prop_assert!(row.source_bits == 0.0 || row.relay_bits == 0.0, "slot {} not half-duplex", row.slot);
            prop_assert!(row.q >= 0.0);
            prop_assert!(row.q <= policy.q_max);
            if row.d == 1 {
                prop_assert_eq!(row.source_bits, 0.0);
            } else {
                prop_assert_eq!(row.relay_bits, 0.0);
            }
        }
        let m = &out.metrics;
        let flushed = m.initial_queue + m.admitted_bits - m.departed_bits - m.final_queue;
        let refused = m.offered_bits - m.admitted_bits;
        let scale = m.offered_bits.max(1.0);
        prop_assert!(refused >= -1e-9 * scale);
        prop_assert!(flushed >= -1e-9 * scale);
        prop_assert!((m.dropped_bits - refused - flushed).abs() <= 1e-9 * scale);
        prop_assert_eq!(m.source_slots + m.relay_slots, m.slots_measured);
        if policy.protocol == Protocol::ConvNoBuffer {
            prop_assert_eq!(m.source_slots, m.relay_slots);
        }
    }

    #[test]
    fn littles_law_on_stable_queues(
        omega_s in 0.3f64..3.0,
        omega_r in 0.3f64..3.0,
        scale in 0.3f64..0.8,
        seed in any::<u64>(),
    ) {
        let spec = QuadratureSpec::default();
        let ms = FadingModel::rayleigh(omega_s).unwrap();
        let mr = FadingModel::rayleigh(omega_r).unwrap();
        let rho_opt = bufrelay::solver::solve_rho_opt(DecisionFunction::Identity, &ms, &mr, &spec).unwrap().rho;
        let policy = PolicySpec::starved(scale * rho_opt, DecisionFunction::Identity);
        let m = simulate(&SimConfig::new(policy, ms, mr, 200_000).with_seed(seed)).unwrap().metrics;
        let fifo = m.mean_delay_fifo.unwrap();
        let little = m.mean_delay_little.unwrap();
        prop_assert!((fifo / little - 1.0).abs() < 0.02, "fifo {fifo} little {little}");
    }

    #[test]
    fn e1_matches_its_integral(x in 0.01f64..30.0) {
        let spec = QuadratureSpec::new(1e-300, 1e-12, 4000).unwrap();
        let q = integrate_semi_infinite(|t| (-t).exp() / t, x, &spec).unwrap();
        let e1 = exp_integral_e1(x).unwrap();
        prop_assert!((e1 / q - 1.0).abs() < 1e-10, "x {x}: {e1} vs {q}");
    }

    #[test]
    fn e1_recurrence(x in 0.05f64..40.0) {
        // d/dx [e^x E1(x)] = e^x E1(x) - 1/x
        let h = 1e-5 * x;
        let g = |t: f64| exp_integral_e1_scaled(t).unwrap();
        let derivative = (g(x + h) - g(x - h)) / (2.0 * h);
        prop_assert!((derivative - (g(x) - 1.0 / x)).abs() < 1e-6 * (1.0 / x).max(1.0));
    }

    #[test]
    fn lambert_w_inverts(x in -0.3678f64..1e3) {
        let w = lambert_w(Branch::Principal, x).unwrap();
        prop_assert!((w * w.exp() - x).abs() <= 1e-13 * x.abs().max(1e-3));
        if x < 0.0 {
            let w = lambert_w(Branch::Lower, x).unwrap();
            prop_assert!(w <= -1.0);
            prop_assert!((w * w.exp() - x).abs() <= 1e-13 * x.abs().max(1e-3));
        }
    }

    #[test]
    fn quadrature_deterministic(a in 0.0f64..5.0, width in 0.1f64..20.0, k in 0.1f64..5.0) {
        let spec = QuadratureSpec::default();
        let f = |x: f64| (k * x).sin().abs() * (-x).exp();
        let one = integrate(f, a, a + width, &spec).unwrap();
        let two = integrate(f, a, a + width, &spec).unwrap();
        prop_assert_eq!(one.to_bits(), two.to_bits());
    }

    #[test]
    fn crossing_thresholds_match_bisection(lambda in 1e-3f64..10.0, rho in 0.05f64..50.0) {
        prop_assert!(validate_threshold_branch(lambda, rho).unwrap() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn threshold_routes_agree(
        f in decision(),
        omega_s in 0.1f64..10.0,
        omega_r in 0.1f64..10.0,
        rho in 0.1f64..10.0,
    ) {
        let spec = QuadratureSpec::default();
        let ms = FadingModel::rayleigh(omega_s).unwrap();
        let mr = FadingModel::rayleigh(omega_r).unwrap();
        let fast = threshold_balance(f, rho, &ms, &mr, &spec).unwrap();
        let nested = threshold_balance_nested(f, rho, &ms, &mr, &spec).unwrap();
        prop_assert!((fast.arrival - nested.arrival).abs() < 1e-7 * fast.arrival.max(1e-3));
        prop_assert!((fast.throughput - nested.throughput).abs() < 1e-7 * fast.throughput.max(1e-3));
    }

    #[test]
    fn residual_increases_in_rho(
        f in decision(),
        omega_s in 0.1f64..10.0,
        omega_r in 0.1f64..10.0,
        rho in 0.05f64..20.0,
    ) {
        let spec = QuadratureSpec::default();
        let ms = FadingModel::rayleigh(omega_s).unwrap();
        let mr = FadingModel::rayleigh(omega_r).unwrap();
        let lo = threshold_residual(f, rho, &ms, &mr, &spec).unwrap();
        let hi = threshold_residual(f, rho * 1.1, &ms, &mr, &spec).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn power_routes_agree(
        lambda in 0.01f64..3.0,
        rho in 0.2f64..20.0,
        bar_s in 0.1f64..3.0,
        bar_r in 0.1f64..3.0,
    ) {
        let spec = QuadratureSpec::default();
        let hs = FadingModel::rayleigh(bar_s).unwrap();
        let hr = FadingModel::rayleigh(bar_r).unwrap();
        let fast = pa_residuals(lambda, rho, &hs, &hr, 1.0, &spec).unwrap();
        let nested = pa_residuals_nested(lambda, rho, &hs, &hr, 1.0, &spec).unwrap();
        prop_assert!((fast.tau - nested.tau).abs() < 1e-6 * fast.tau.max(1e-3));
        prop_assert!((fast.departure - nested.departure).abs() < 1e-6 * fast.departure.max(1e-3));
        prop_assert!((fast.mean_power - nested.mean_power).abs() < 1e-6 * fast.mean_power.max(1e-3));
    }

    #[test]
    fn delay_moment_routes_agree(omega_s in 0.2f64..5.0, omega_r in 0.2f64..5.0, rho in 0.05f64..5.0) {
        let spec = QuadratureSpec::default();
        let fast = delay_moments(rho, omega_s, omega_r, &spec).unwrap();
        let nested = delay_moments_nested(rho, omega_s, omega_r, &spec).unwrap();
        for (a, b) in [(fast.m_s2, nested.m_s2), (fast.m_r2, nested.m_r2), (fast.m_s1, nested.m_s1)] {
            prop_assert!((a - b).abs() < 1e-6 * a.max(1e-3), "{a} vs {b}");
        }
    }
}
