//! Acceptance criteria 1–9, one report line each. Runs without the libtest
//! harness so the report is always printed.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use bufrelay::channel::FadingModel;
use bufrelay::closed_form::{
    delay_upper_bound, delay_moments, tau_conv1_rayleigh, tau_conv2_rayleigh,
    tau_conv_buffer_pa_rayleigh, tau_max, threshold_balance_nested,
};
use bufrelay::experiments::{run_sweep, AxisVariable, CustomPoint, Experiment, SweepPlan};
use bufrelay::policy::{
    l1_threshold, l2_threshold, relay_metric, source_metric, DecisionFunction, PolicySpec, Protocol,
};
use bufrelay::sim::{run, simulate, Metrics, SimConfig};
use bufrelay::solver::{rho_for_load, solve_lambda_rho, solve_rho_opt};
use bufrelay::special::{
    exp_integral_e1, integrate, lambert_w, Branch, QuadratureSpec,
};

type Outcome = Result<String, String>;

const SLOTS: u64 = 1_000_000;
const DECISIONS: [DecisionFunction; 2] = [DecisionFunction::Identity, DecisionFunction::LogCapacity];

fn tight() -> QuadratureSpec {
    QuadratureSpec::new(1e-13, 1e-12, 4000).unwrap()
}

fn rayleigh(os: f64, or: f64) -> (FadingModel, FadingModel) {
    (FadingModel::rayleigh(os).unwrap(), FadingModel::rayleigh(or).unwrap())
}

fn sim(policy: PolicySpec, os: f64, or: f64, seed: u64) -> Metrics {
    let (ms, mr) = rayleigh(os, or);
    run(&SimConfig::new(policy, ms, mr, SLOTS).with_seed(seed)).unwrap()
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

/// Independent `E1` by its power series; accurate to ~1e-13 for x ≤ 4.
fn e1_series(x: f64) -> f64 {
    const GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..300 {
        let k = k as f64;
        term *= -x / k;
        sum += term / k;
        if (term / k).abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    -GAMMA - x.ln() - sum
}

fn symmetric_tau_oracle(omega: f64) -> f64 {
    let (a, b) = (1.0 / omega, 2.0 / omega);
    (a.exp() * e1_series(a) - 0.5 * b.exp() * e1_series(b)) / std::f64::consts::LN_2
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let spec = tight();
    let mut worst_rho: f64 = 0.0;
    let mut worst_tau: f64 = 0.0;
    let mut worst_sim: f64 = 0.0;
    for (i, &omega) in [0.5, 1.0, 4.0].iter().enumerate() {
        let (ms, mr) = rayleigh(omega, omega);
        let oracle = symmetric_tau_oracle(omega);
        for f in DECISIONS {
            let opt = solve_rho_opt(f, &ms, &mr, &spec).map_err(|e| e.to_string())?;
            worst_rho = worst_rho.max((opt.rho - 1.0).abs());
            worst_tau = worst_tau.max((opt.tau - oracle).abs());
            let tau1 = tau_max(f, 1.0, &ms, &mr, &spec).map_err(|e| e.to_string())?;
            worst_tau = worst_tau.max((tau1 - oracle).abs());
            let m = sim(PolicySpec::adaptive_fixed(1.0, f), omega, omega, 100 + i as u64);
            worst_sim = worst_sim.max(rel(m.throughput, oracle));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst_rho <= 1e-6, || format!("|rho_opt - 1| = {worst_rho:e}"))?;
    check(worst_tau <= 1e-9, || format!("|tau_max - closed form| = {worst_tau:e}"))?;
    check(worst_sim <= 0.01, || format!("simulation off by {:.3}%", 100.0 * worst_sim))?;
    check(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "max |rho-1| {worst_rho:.1e}, max |tau err| {worst_tau:.1e}, sim dev {:.2}%, {secs:.2} s",
        100.0 * worst_sim
    ))
}

fn criterion_2() -> Outcome {
    let grid = [(0.5, 0.5), (1.0, 1.0), (1.0, 4.0), (4.0, 1.0), (0.1, 2.0), (10.0, 0.3)];
    let mut worst: f64 = 0.0;
    for (i, &(os, or)) in grid.iter().enumerate() {
        let c1 = tau_conv1_rayleigh(os, or).map_err(|e| e.to_string())?;
        let c2 = tau_conv2_rayleigh(os, or).map_err(|e| e.to_string())?;
        check(c2 >= c1, || format!("tau_conv2 {c2} < tau_conv1 {c1} at ({os}, {or})"))?;
        let s1 = sim(PolicySpec::conv_no_buffer(), os, or, 200 + i as u64).throughput;
        let s2 = sim(PolicySpec::conv_buffer(), os, or, 300 + i as u64).throughput;
        for (name, s, c) in [("conv1", s1, c1), ("conv2", s2, c2)] {
            let d = rel(s, c);
            worst = worst.max(d);
            check(d <= 0.005, || format!("{name} at ({os}, {or}): sim {s} vs {c} ({:.3}%)", 100.0 * d))?;
        }
    }
    Ok(format!("6 points, worst deviation {:.3}%, tau_conv2 >= tau_conv1 throughout", 100.0 * worst))
}

fn criterion_3() -> Outcome {
    let spec = QuadratureSpec::default();
    let mut ratios = Vec::new();
    for omega in [1e-3, 1e-1, 1.0, 10.0, 1e3] {
        let (ms, mr) = rayleigh(omega, omega);
        let t = tau_max(DecisionFunction::Identity, 1.0, &ms, &mr, &spec).map_err(|e| e.to_string())?;
        ratios.push(t / tau_conv2_rayleigh(omega, omega).map_err(|e| e.to_string())?);
    }
    check(ratios.windows(2).all(|w| w[1] < w[0]), || format!("not decreasing: {ratios:?}"))?;
    check(ratios.iter().all(|&r| (1.0..=1.5).contains(&r)), || format!("outside [1, 1.5]: {ratios:?}"))?;
    check(ratios[0] >= 1.45, || format!("ratio at 1e-3 is {}", ratios[0]))?;
    Ok(format!("ratios {}", ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(" > ")))
}

/// Balancing threshold by bisection on the nested-quadrature residual.
fn rho_opt_oracle(os: f64, or: f64, f: DecisionFunction) -> (f64, f64) {
    let spec = QuadratureSpec::new(1e-12, 1e-11, 4000).unwrap();
    let (ms, mr) = rayleigh(os, or);
    let residual = |rho: f64| threshold_balance_nested(f, rho, &ms, &mr, &spec).unwrap();
    let (mut lo, mut hi) = (1e-6f64.ln(), 1e6f64.ln());
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if residual(mid.exp()).value > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let rho = (0.5 * (lo + hi)).exp();
    (rho, residual(rho).throughput)
}

/// Extreme-ratio gains, pinned after the first validated run.
const CRITERION_4_GOLDEN: [(f64, &str, f64); 4] = [
    (0.01, "identity", 1.999_800_840_053_716_6),
    (0.01, "log_capacity", 1.999_812_624_259_821_5),
    (100.0, "identity", 1.958_297_797_113_739),
    (100.0, "log_capacity", 1.967_909_754_332_863_2),
];

fn criterion_4() -> Outcome {
    let spec = QuadratureSpec::default();
    let omega_s = 1.0;
    let ratios: Vec<f64> = (0..=16).map(|k| 10f64.powf(-2.0 + 0.25 * k as f64)).collect();
    let mut report = Vec::new();
    for f in DECISIONS {
        let mut gains = Vec::new();
        for &q in &ratios {
            let (ms, mr) = rayleigh(omega_s, omega_s * q);
            let opt = solve_rho_opt(f, &ms, &mr, &spec).map_err(|e| e.to_string())?;
            gains.push(opt.tau / tau_conv2_rayleigh(omega_s, omega_s * q).map_err(|e| e.to_string())?);
        }
        let mid = gains[8];
        let (first, last) = (gains[0], gains[16]);
        check(first > mid && last > mid, || format!("{f}: not U-shaped: {gains:?}"))?;
        let argmin = (0..gains.len()).min_by(|&a, &b| gains[a].total_cmp(&gains[b])).unwrap();
        check(gains[..=argmin].windows(2).all(|w| w[1] <= w[0]), || format!("{f}: left arm not decreasing"))?;
        check(gains[argmin..].windows(2).all(|w| w[1] >= w[0]), || format!("{f}: right arm not increasing"))?;
        for (q, value) in [(0.01, first), (100.0, last)] {
            let (rho, tau) = rho_opt_oracle(omega_s, omega_s * q, f);
            let oracle = tau / tau_conv2_rayleigh(omega_s, omega_s * q).unwrap();
            check(rel(value, oracle) < 1e-7, || format!("{f} at {q}: {value} vs oracle {oracle} (rho {rho})"))?;
            let golden = CRITERION_4_GOLDEN
                .iter()
                .find(|g| g.0 == q && g.1 == f.name())
                .map(|g| g.2)
                .unwrap();
            check(rel(value, golden) < 1e-9, || format!("{f} at {q}: {value:.15e} vs golden {golden}"))?;
            report.push(format!("{}@{q}={value:.5}", f.name()));
        }
        report.push(format!("{}@1={mid:.5}", f.name()));
    }
    Ok(report.join(", "))
}

/// Conventional buffered relaying with per-link water-filling, by Monte
/// Carlo: `(throughput, mean power S, mean power R)`.
fn conv_buffer_pa_mc(bar_s: f64, bar_r: f64, gamma: f64, seed: u64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = |bar: f64| {
        // E{max(0, 1/a - 1/h)} = Γ, solved by bisection in ln a
        let power = |a: f64| {
            let spec = QuadratureSpec::new(1e-14, 1e-12, 4000).unwrap();
            integrate(|h| (1.0 / a - 1.0 / h) * (-h / bar).exp() / bar, a, a + 60.0 * bar, &spec).unwrap()
        };
        let (mut lo, mut hi) = (1e-9f64.ln(), 1e3f64.ln());
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if power(mid.exp()) > gamma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    };
    let (a_s, a_r) = (alpha(bar_s), alpha(bar_r));
    let half = SLOTS / 2;
    let (mut bits_s, mut bits_r, mut p_s, mut p_r) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..half {
        let h: f64 = -bar_s * (1.0 - rng.gen::<f64>()).ln();
        if h > a_s {
            bits_s += (h / a_s).log2();
            p_s += 1.0 / a_s - 1.0 / h;
        }
        let h: f64 = -bar_r * (1.0 - rng.gen::<f64>()).ln();
        if h > a_r {
            bits_r += (h / a_r).log2();
            p_r += 1.0 / a_r - 1.0 / h;
        }
    }
    let n = half as f64;
    (0.5 * (bits_s / n).min(bits_r / n), p_s / n, p_r / n)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let (bar_s, bar_r) = (0.1, 1.9);
    let (hs, hr) = rayleigh(bar_s, bar_r);
    let mut report = Vec::new();
    for (gamma, seed) in [(1.0, 501u64), (100.0, 502)] {
        let pa = solve_lambda_rho(&hs, &hr, gamma, &spec).map_err(|e| e.to_string())?;
        check(pa.converged, || format!("solver did not converge at gamma {gamma}: {pa:?}"))?;
        let lambda = pa.lambda.unwrap();
        let conv = tau_conv_buffer_pa_rayleigh(bar_s, bar_r, gamma).map_err(|e| e.to_string())?;
        let m = run(&SimConfig::new(PolicySpec::adaptive_pa(lambda, pa.rho, gamma), hs.clone(), hr.clone(), SLOTS)
            .with_seed(seed))
        .map_err(|e| e.to_string())?;
        let power = m.mean_power.unwrap();
        check(rel(power, gamma) <= 0.015, || format!("gamma {gamma}: simulated power {power}"))?;
        let (conv_sim, ps, pr) = conv_buffer_pa_mc(bar_s, bar_r, gamma, seed + 10);
        check(rel(ps, gamma) <= 0.015 && rel(pr, gamma) <= 0.015, || {
            format!("gamma {gamma}: conventional powers {ps}, {pr}")
        })?;
        check(rel(conv_sim, conv) <= 0.01, || format!("gamma {gamma}: conventional sim {conv_sim} vs {conv}"))?;
        if gamma == 1.0 {
            for (label, r) in [("solver", pa.tau / conv), ("simulation", m.throughput / conv_sim)] {
                check(r >= 1.9 * 0.95, || format!("{label} ratio {r:.4} below 1.805"))?;
            }
            report.push(format!("0 dB ratio {:.4} (sim {:.4})", pa.tau / conv, m.throughput / conv_sim));
        } else {
            for (label, g) in [("solver", pa.tau - conv), ("simulation", m.throughput - conv_sim)] {
                check((g - 1.0).abs() <= 0.1, || format!("{label} gain {g:.4} bits/slot"))?;
            }
            report.push(format!("20 dB gain {:.4} (sim {:.4})", pa.tau - conv, m.throughput - conv_sim));
        }
        report.push(format!("power {power:.4}"));
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.1} s"))?;
    report.push(format!("{secs:.2} s"));
    Ok(report.join(", "))
}

/// Independent 10⁶-slot replications per load; a single run at ξ = 0.95
/// scatters by about 5% around its mean, so the bound is checked against
/// the replication mean.
const DELAY_REPLICATIONS: u64 = 100;

fn criterion_6() -> Outcome {
    let spec = QuadratureSpec::default();
    let (ms, mr) = rayleigh(1.0, 1.0);
    let mut ratios = Vec::new();
    let mut report = Vec::new();
    for xi in [0.5, 0.7, 0.9, 0.95] {
        let rho = rho_for_load(xi, 1.0, 1.0, &spec).map_err(|e| e.to_string())?;
        let m = delay_moments(rho, 1.0, 1.0, &spec).map_err(|e| e.to_string())?;
        let bound = delay_upper_bound(&m).map_err(|e| e.to_string())?;
        let policy = PolicySpec::starved(rho, DecisionFunction::Identity);
        let delays: Vec<f64> = (0..DELAY_REPLICATIONS)
            .into_par_iter()
            .map(|k| {
                let config = SimConfig::new(policy, ms.clone(), mr.clone(), SLOTS).with_seed(600).with_stream(k);
                run(&config).unwrap().mean_delay_fifo.unwrap()
            })
            .collect();
        let n = delays.len() as f64;
        let mean = delays.iter().sum::<f64>() / n;
        let sd = (delays.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let above = delays.iter().filter(|&&d| d > bound).count();
        check(mean <= bound, || {
            format!("xi {xi}: simulated delay {mean:.3} +- {:.3} above bound {bound:.3}", sd / n.sqrt())
        })?;
        ratios.push(bound / mean);
        report.push(format!("xi {xi}: {mean:.2}+-{:.2} <= {bound:.2} ({above}/{DELAY_REPLICATIONS} single runs above)", sd / n.sqrt()));
    }
    check(ratios.windows(2).all(|w| w[1] < w[0]), || format!("bound/sim ratios not decreasing: {ratios:?}"))?;
    check(*ratios.last().unwrap() < 1.05, || format!("bound not tight at high load: {ratios:?}"))?;
    report.push(format!(
        "bound/sim {}",
        ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" > ")
    ));
    Ok(report.join(", "))
}

fn criterion_7() -> Outcome {
    let spec = QuadratureSpec::default();
    let (ms, mr) = rayleigh(1.0, 1.0);
    let q_grid = [0.5, 1.0, 2.0, 4.0, 8.0];
    let mut cells = 0;
    for (i, xi) in [0.5, 0.7, 0.9].into_iter().enumerate() {
        let rho = rho_for_load(xi, 1.0, 1.0, &spec).map_err(|e| e.to_string())?;
        let policy = PolicySpec::starved(rho, DecisionFunction::Identity);
        let seed = 700 + i as u64;
        let mut drops = Vec::new();
        for &q in &q_grid {
            let open = run(&SimConfig::new(policy, ms.clone(), mr.clone(), SLOTS)
                .with_seed(seed)
                .with_overflow_threshold(q))
            .map_err(|e| e.to_string())?;
            let exceed = open.overflow_event_prob.unwrap();
            let markov = open.mean_queue / q;
            check(exceed <= markov, || format!("xi {xi}, Q_max {q}: Pr{{Q>Q_max}} {exceed} > {markov}"))?;
            let finite = run(&SimConfig::new(policy.with_q_max(q), ms.clone(), mr.clone(), SLOTS).with_seed(seed))
                .map_err(|e| e.to_string())?;
            check(finite.drop_prob <= markov.min(1.0), || {
                format!("xi {xi}, Q_max {q}: drop probability {} > {markov}", finite.drop_prob)
            })?;
            drops.push(finite.drop_prob);
            cells += 1;
        }
        check(drops.windows(2).all(|w| w[1] < w[0]), || format!("xi {xi}: drops not decreasing {drops:?}"))?;
    }
    Ok(format!("{cells} (rho, Q_max) cells, Markov bound holds, drops strictly decreasing"))
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of an increasing `g` above `lo` by bisection in `ln h`, growing
/// the bracket until `g` changes sign.
fn bisect_log(g: impl Fn(f64) -> f64, lo: f64) -> f64 {
    let mut hi = lo * 2.0;
    while g(hi) < 0.0 {
        hi *= hi / lo;
    }
    bisect(|t| g(t.exp()), lo.ln(), hi.ln()).exp()
}

fn criterion_8() -> Outcome {
    // simulator invariants on a trace
    let (ms, mr) = rayleigh(1.0, 0.7);
    let policies = [
        PolicySpec::adaptive_fixed(0.9, DecisionFunction::Identity),
        PolicySpec::starved(0.6, DecisionFunction::LogCapacity).with_q_max(3.0),
        PolicySpec::queue_limited(1.2, DecisionFunction::Identity, 2.5),
        PolicySpec::conv_buffer(),
        PolicySpec::conv_no_buffer(),
    ];
    let mut worst_little: f64 = 0.0;
    for (i, policy) in policies.into_iter().enumerate() {
        let config = SimConfig::new(policy, ms.clone(), mr.clone(), 200_000).with_seed(800 + i as u64).with_trace();
        let out = simulate(&config).map_err(|e| e.to_string())?;
        for row in &out.trace {
            check(row.source_bits == 0.0 || row.relay_bits == 0.0, || format!("slot {} not half-duplex", row.slot))?;
            check(row.q >= 0.0, || format!("negative queue at slot {}", row.slot))?;
        }
        let m = &out.metrics;
        let balance = m.initial_queue + m.admitted_bits - m.departed_bits - m.final_queue;
        let flushed = m.offered_bits - m.admitted_bits;
        let lost = m.dropped_bits - flushed;
        check((balance - lost).abs() <= 1e-9 * m.offered_bits.max(1.0), || {
            format!("{}: bits not conserved ({balance} vs {lost})", policy.protocol)
        })?;
        if policy.protocol == Protocol::AdaptiveFixed {
            continue;
        }
        if matches!(policy.protocol, Protocol::Starved | Protocol::QueueLimited) {
            let (f, l) = (m.mean_delay_fifo.unwrap(), m.mean_delay_little.unwrap());
            worst_little = worst_little.max(rel(f, l));
        }
    }
    check(worst_little < 0.02, || format!("Little's law off by {:.2}%", 100.0 * worst_little))?;

    // crossing thresholds against bisection
    let mut worst_l: f64 = 0.0;
    for &(lambda, rho) in &[(0.01, 0.5), (0.3, 1.0), (1.9, 16.4), (5.0, 3.0)] {
        for k in 1..=20 {
            let factor = 1.0 + 0.25 * k as f64 * k as f64;
            let h_r = lambda * factor;
            let target = relay_metric(h_r, lambda);
            let l1 = l1_threshold(h_r, lambda, rho).map_err(|e| e.to_string())?;
            let oracle = bisect_log(|h| source_metric(h, lambda, rho) - target, lambda / rho);
            worst_l = worst_l.max(rel(l1, oracle));
            let h_s = lambda / rho * factor;
            let target = source_metric(h_s, lambda, rho);
            let l2 = l2_threshold(h_s, lambda, rho).map_err(|e| e.to_string())?;
            let oracle = bisect_log(|h| relay_metric(h, lambda) - target, lambda);
            worst_l = worst_l.max(rel(l2, oracle));
        }
    }
    check(worst_l < 1e-9, || format!("L1/L2 disagree with bisection by {worst_l:e}"))?;

    // quadrature determinism
    let spec = QuadratureSpec::default();
    let f = |x: f64| (1.0 + x).ln() * (-x).exp() / (1.0 + x * x);
    let first = integrate(f, 0.0, 40.0, &spec).map_err(|e| e.to_string())?;
    let threads: Vec<f64> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4).map(|_| s.spawn(|| integrate(f, 0.0, 40.0, &spec).unwrap())).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    check(threads.iter().all(|v| v.to_bits() == first.to_bits()), || "quadrature not bitwise reproducible".into())?;

    // special functions by a second method
    let mut worst_e1: f64 = 0.0;
    for k in 0..=40 {
        let x = 0.05 + 0.0975 * k as f64;
        worst_e1 = worst_e1.max(rel(exp_integral_e1(x).unwrap(), e1_series(x)));
    }
    let mut worst_w: f64 = 0.0;
    for k in 0..=60 {
        let x = -0.3678 + 0.01 * (k as f64).powf(2.2);
        let w = lambert_w(Branch::Principal, x).unwrap();
        let oracle = bisect(|w| w * w.exp() - x, -1.0, 20.0);
        worst_w = worst_w.max(if oracle.abs() > 1e-3 { rel(w, oracle) } else { (w - oracle).abs() });
        if x < 0.0 {
            let w = lambert_w(Branch::Lower, x).unwrap();
            let oracle = bisect(|w| -(w * w.exp() - x), -800.0, -1.0);
            worst_w = worst_w.max(rel(w, oracle));
        }
    }
    check(worst_e1 < 1e-12, || format!("E1 disagrees with series by {worst_e1:e}"))?;
    check(worst_w < 1e-12, || format!("W disagrees with bisection by {worst_w:e}"))?;
    Ok(format!(
        "half-duplex/nonnegative/conservation ok, Little {:.2}%, L1/L2 {worst_l:.1e}, E1 {worst_e1:.1e}, W {worst_w:.1e}, quadrature bitwise stable",
        100.0 * worst_little
    ))
}

fn fig8_plan(omega_s: f64, omega_r: f64, targets: Vec<f64>) -> SweepPlan {
    SweepPlan {
        experiment: Experiment::Fig8,
        axis_variable: AxisVariable::DelayTarget,
        axis: targets,
        omega_s: vec![omega_s],
        omega_r: vec![omega_r],
        decisions: vec![DecisionFunction::Identity],
        delay_targets: vec![10.0],
        schemes: vec![Protocol::Starved, Protocol::QueueLimited],
        custom: CustomPoint {
            protocol: Protocol::AdaptiveFixed,
            decision: DecisionFunction::Identity,
            rho: None,
            lambda: None,
            gamma_db: None,
            q_max: f64::INFINITY,
        },
        seeds: vec![900],
        simulate: true,
        slots: SLOTS,
        warmup: None,
        quadrature: QuadratureSpec::default(),
        output: None,
    }
}

/// Linear interpolation in `ln(delay)` along a curve sorted by delay.
fn interpolate(curve: &[(f64, f64)], delay: f64) -> Option<f64> {
    curve.windows(2).find(|w| w[0].0 <= delay && delay <= w[1].0).map(|w| {
        let t = (delay.ln() - w[0].0.ln()) / (w[1].0.ln() - w[0].0.ln());
        w[0].1 + t * (w[1].1 - w[0].1)
    })
}

fn criterion_9() -> Outcome {
    let mut report = Vec::new();
    for (os, or) in [(1.0, 1.0), (1.0, 0.5)] {
        let targets = vec![3.0, 4.0, 6.0, 8.0, 12.0, 20.0, 40.0, 100.0, 200.0, 400.0];
        let table = run_sweep(&fig8_plan(os, or, targets)).map_err(|e| e.to_string())?;
        let scheme = table.column("scheme").unwrap();
        let curve = |name: &str| -> Vec<(f64, f64)> {
            let delay = table.numbers("sim_delay");
            let tau = table.numbers("sim_throughput");
            let mut points: Vec<(f64, f64)> = table
                .rows
                .iter()
                .enumerate()
                .filter(|(_, r)| matches!(&r[scheme], bufrelay::experiments::Value::Text(s) if s == name))
                .filter_map(|(i, _)| Some((delay[i]?, tau[i]?)))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            points
        };
        let starved = curve("starved");
        let limited = curve("queue_limited");
        let tau_max = table.numbers("tau_max").into_iter().flatten().next().ok_or("no feasible row")?;
        let mut compared = 0;
        for &(d, t) in starved.iter().filter(|p| p.0 <= 10.0) {
            if let Some(q) = interpolate(&limited, d) {
                check(q >= t, || format!("({os}, {or}) delay {d:.2}: queue-limited {q:.4} < starved {t:.4}"))?;
                compared += 1;
            }
        }
        check(compared >= 2, || format!("({os}, {or}): only {compared} small-delay comparisons"))?;
        for (name, c) in [("starved", &starved), ("queue_limited", &limited)] {
            let &(d, t) = c.last().unwrap();
            check(t >= 0.98 * tau_max, || format!("({os}, {or}) {name} at delay {d:.0}: {t:.4} vs tau_max {tau_max:.4}"))?;
        }
        report.push(format!(
            "({os},{or}): {compared} small-delay points QL >= starved, large-delay {:.2}%/{:.2}% of tau_max",
            100.0 * starved.last().unwrap().1 / tau_max,
            100.0 * limited.last().unwrap().1 / tau_max
        ));
    }
    Ok(report.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("symmetric optimum", criterion_1),
        ("baseline closed forms", criterion_2),
        ("gain envelope", criterion_3),
        ("asymmetric gain", criterion_4),
        ("power allocation", criterion_5),
        ("delay bound", criterion_6),
        ("drop bound", criterion_7),
        ("property suites", criterion_8),
        ("queue-limited vs starved", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion_{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| id.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS [{secs:.2} s] {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.2} s] {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
