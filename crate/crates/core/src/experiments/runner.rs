//! Evaluation of a [`SweepPlan`]: analytic values next to simulated ones,
//! one row per grid point and seed.

use rayon::prelude::*;

use super::config::{AxisVariable, Experiment, SweepPlan};
use super::table::{Table, Value};
use crate::channel::FadingModel;
use crate::closed_form::{
    arrival_rate, drop_probability_bound, pa_residuals, tau_conv1_rayleigh, tau_conv2_rayleigh,
    tau_conv_buffer_pa_rayleigh, tau_max,
};
use crate::policy::{DecisionFunction, PolicySpec, Protocol};
use crate::sim::{run, Metrics, SimConfig};
use crate::solver::{
    delay_point, solve_lambda_for_power, solve_lambda_rho, solve_rho_for_delay, solve_rho_opt,
};
use crate::special::QuadratureSpec;
use crate::{Error, Result};

type Task<'a> = Box<dyn Fn() -> Result<Vec<Value>> + Send + Sync + 'a>;

struct Job<'a> {
    keys: Vec<Value>,
    task: Task<'a>,
}

/// Columns of an experiment: identifying keys, results, then `error`.
pub fn columns(experiment: Experiment) -> Vec<&'static str> {
    let (keys, results) = column_parts(experiment);
    keys.iter().chain(results).copied().chain(["error"]).collect()
}

fn column_parts(experiment: Experiment) -> (&'static [&'static str], &'static [&'static str]) {
    match experiment {
        Experiment::Fig2 | Experiment::Fig3 => (
            &["omega_s", "omega_ratio", "omega_r", "decision", "seed"],
            &[
                "rho_opt",
                "tau_max",
                "tau_conv2",
                "ratio",
                "sim_throughput",
                "sim_stderr",
                "abs_dev",
                "rel_dev",
            ],
        ),
        Experiment::Fig4 => (
            &["omega_bar_s", "omega_bar_r", "gamma_db", "seed"],
            &[
                "gamma",
                "lambda",
                "rho",
                "tau_pa",
                "tau_fixed",
                "tau_conv_buffer_pa",
                "tau_conv2",
                "tau_conv1",
                "ratio_pa_conv1",
                "ratio_pa_conv_buffer_pa",
                "gain_pa_conv_buffer_pa",
                "sim_throughput",
                "sim_stderr",
                "sim_mean_power",
                "abs_dev",
                "rel_dev",
            ],
        ),
        Experiment::Fig5 | Experiment::Fig6 => (
            &["omega_s", "omega_r", "delay_target", "seed"],
            &[
                "rho",
                "rho_opt",
                "xi",
                "delay_bound",
                "tau_starve",
                "tau_conv1",
                "ratio",
                "sim_throughput",
                "sim_stderr",
                "sim_delay",
                "sim_delay_little",
                "abs_dev",
                "rel_dev",
                "bound_holds",
            ],
        ),
        Experiment::Fig7 => (
            &["omega_s", "omega_r", "delay_target", "q_max", "seed"],
            &[
                "rho",
                "delay_bound",
                "sim_drop_prob",
                "sim_overflow_prob",
                "sim_mean_queue",
                "markov_bound",
                "sim_delay",
                "sim_throughput",
            ],
        ),
        Experiment::Fig8 => (
            &["omega_s", "omega_r", "scheme", "delay_target", "seed"],
            &[
                "rho",
                "q_max",
                "frame",
                "sim_delay",
                "sim_throughput",
                "sim_stderr",
                "tau_conv1",
                "tau_max",
                "ratio_conv1",
                "ratio_max",
            ],
        ),
        Experiment::Custom => (
            &["axis_variable", "axis", "protocol", "decision", "seed"],
            &[
                "omega_s",
                "omega_r",
                "rho",
                "lambda",
                "gamma",
                "q_max",
                "tau_analytic",
                "sim_throughput",
                "sim_stderr",
                "abs_dev",
                "rel_dev",
                "sim_mean_queue",
                "sim_delay",
                "sim_drop_prob",
                "sim_mean_power",
            ],
        ),
    }
}

/// Runs every grid point on the current rayon pool. Rows come back in grid
/// order; failed points carry a message in the `error` column.
pub fn run_sweep(plan: &SweepPlan) -> Result<Table> {
    plan.validate()?;
    let jobs = jobs(plan);
    let (keys, results) = column_parts(plan.experiment);
    let rows: Vec<Vec<Value>> = jobs
        .par_iter()
        .map(|job| {
            let mut row = job.keys.clone();
            match (job.task)() {
                Ok(values) => {
                    debug_assert_eq!(values.len(), results.len());
                    row.extend(values);
                    row.push(Value::Empty);
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(Value::Empty, results.len()));
                    row.push(Value::Text(e.to_string()));
                }
            }
            debug_assert_eq!(row.len(), keys.len() + results.len() + 1);
            row
        })
        .collect();
    Ok(Table {
        columns: columns(plan.experiment),
        rows,
    })
}

/// [`run_sweep`] on a dedicated pool of `threads` workers.
pub fn run_sweep_with_jobs(plan: &SweepPlan, threads: usize) -> Result<Table> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run_sweep(plan))
}

fn jobs(plan: &SweepPlan) -> Vec<Job<'_>> {
    match plan.experiment {
        Experiment::Fig2 | Experiment::Fig3 => fixed_power_jobs(plan),
        Experiment::Fig4 => power_allocation_jobs(plan),
        Experiment::Fig5 | Experiment::Fig6 => starved_jobs(plan),
        Experiment::Fig7 => drop_jobs(plan),
        Experiment::Fig8 => delay_comparison_jobs(plan),
        Experiment::Custom => custom_jobs(plan),
    }
}

fn rayleigh_pair(omega_s: f64, omega_r: f64) -> Result<(FadingModel, FadingModel)> {
    Ok((FadingModel::rayleigh(omega_s)?, FadingModel::rayleigh(omega_r)?))
}

fn simulate(
    plan: &SweepPlan,
    config: SimConfig,
    seed: u64,
    stream: u64,
) -> Result<Metrics> {
    let mut config = config.with_seed(seed).with_stream(stream);
    if let Some(w) = plan.warmup {
        config = config.with_warmup(w);
    }
    run(&config)
}

/// `(abs, rel)` deviation of a simulated value from its analytic one.
fn deviation(sim: Option<f64>, analytic: f64) -> (Value, Value) {
    match sim {
        Some(s) => (Value::Num(s - analytic), Value::Num((s - analytic) / analytic)),
        None => (Value::Empty, Value::Empty),
    }
}

fn fixed_power_jobs(plan: &SweepPlan) -> Vec<Job<'_>> {
    let spec = plan.quadrature;
    let mut jobs = Vec::new();
    let mut stream = 0u64;
    for &omega_s in &plan.omega_s {
        for &ratio in &plan.axis {
            for &decision in &plan.decisions {
                let omega_r = omega_s * ratio;
                for &seed in &plan.seeds {
                    let keys = vec![
                        omega_s.into(),
                        ratio.into(),
                        omega_r.into(),
                        decision.name().into(),
                        seed.into(),
                    ];
                    let task: Task = Box::new(move || {
                        let (ms, mr) = rayleigh_pair(omega_s, omega_r)?;
                        let opt = solve_rho_opt(decision, &ms, &mr, &spec)?;
                        let conv2 = tau_conv2_rayleigh(omega_s, omega_r)?;
                        let metrics = if plan.simulate {
                            let policy = PolicySpec::adaptive_fixed(opt.rho, decision);
                            Some(simulate(plan, SimConfig::new(policy, ms, mr, plan.slots), seed, stream)?)
                        } else {
                            None
                        };
                        let sim_tau = metrics.as_ref().map(|m| m.throughput);
                        let (abs, rel) = deviation(sim_tau, opt.tau);
                        Ok(vec![
                            opt.rho.into(),
                            opt.tau.into(),
                            conv2.into(),
                            (opt.tau / conv2).into(),
                            sim_tau.into(),
                            metrics.and_then(|m| m.throughput_stderr).into(),
                            abs,
                            rel,
                        ])
                    });
                    jobs.push(Job { keys, task });
                }
                stream += 1;
            }
        }
    }
    jobs
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn power_allocation_jobs(plan: &SweepPlan) -> Vec<Job<'_>> {
    let spec = plan.quadrature;
    let mut jobs = Vec::new();
    let mut stream = 0u64;
    for (&bar_s, &bar_r) in plan.omega_s.iter().zip(&plan.omega_r) {
        for &gamma_db in &plan.axis {
            for &seed in &plan.seeds {
                let keys = vec![bar_s.into(), bar_r.into(), gamma_db.into(), seed.into()];
                let task: Task = Box::new(move || {
                    let gamma = db_to_linear(gamma_db);
                    let (hs, hr) = rayleigh_pair(bar_s, bar_r)?;
                    let pa = solve_lambda_rho(&hs, &hr, gamma, &spec)?;
                    let lambda = pa.lambda.expect("joint solve reports lambda");
                    let (fs, fr) = rayleigh_pair(gamma * bar_s, gamma * bar_r)?;
                    let fixed = solve_rho_opt(DecisionFunction::LogCapacity, &fs, &fr, &spec)?;
                    let conv_pa = tau_conv_buffer_pa_rayleigh(bar_s, bar_r, gamma)?;
                    let conv2 = tau_conv2_rayleigh(gamma * bar_s, gamma * bar_r)?;
                    let conv1 = tau_conv1_rayleigh(gamma * bar_s, gamma * bar_r)?;
                    let metrics = if plan.simulate {
                        let policy = PolicySpec::adaptive_pa(lambda, pa.rho, gamma);
                        Some(simulate(plan, SimConfig::new(policy, hs, hr, plan.slots), seed, stream)?)
                    } else {
                        None
                    };
                    let sim_tau = metrics.as_ref().map(|m| m.throughput);
                    let (abs, rel) = deviation(sim_tau, pa.tau);
                    Ok(vec![
                        gamma.into(),
                        lambda.into(),
                        pa.rho.into(),
                        pa.tau.into(),
                        fixed.tau.into(),
                        conv_pa.into(),
                        conv2.into(),
                        conv1.into(),
                        (pa.tau / conv1).into(),
                        (pa.tau / conv_pa).into(),
                        (pa.tau - conv_pa).into(),
                        sim_tau.into(),
                        metrics.as_ref().and_then(|m| m.throughput_stderr).into(),
                        metrics.as_ref().and_then(|m| m.mean_power).into(),
                        abs,
                        rel,
                    ])
                });
                jobs.push(Job { keys, task });
            }
            stream += 1;
        }
    }
    jobs
}

fn starved_jobs(plan: &SweepPlan) -> Vec<Job<'_>> {
    let spec = plan.quadrature;
    let mut jobs = Vec::new();
    let mut stream = 0u64;
    for (&omega_s, &omega_r) in plan.omega_s.iter().zip(&plan.omega_r) {
        for &target in &plan.axis {
            for &seed in &plan.seeds {
                let keys = vec![omega_s.into(), omega_r.into(), target.into(), seed.into()];
                let task: Task = Box::new(move || {
                    let (ms, mr) = rayleigh_pair(omega_s, omega_r)?;
                    let opt = solve_rho_opt(DecisionFunction::Identity, &ms, &mr, &spec)?;
                    let point = solve_rho_for_delay(target, omega_s, omega_r, &spec)?;
                    let (m, bound) = delay_point(point.rho, omega_s, omega_r, &spec)?;
                    let conv1 = tau_conv1_rayleigh(omega_s, omega_r)?;
                    let metrics = if plan.simulate {
                        let policy = PolicySpec::starved(point.rho, DecisionFunction::Identity);
                        Some(simulate(plan, SimConfig::new(policy, ms, mr, plan.slots), seed, stream)?)
                    } else {
                        None
                    };
                    let sim_tau = metrics.as_ref().map(|m| m.throughput);
                    let sim_delay = metrics.as_ref().and_then(|m| m.mean_delay_fifo);
                    let (abs, rel) = deviation(sim_tau, point.tau);
                    Ok(vec![
                        point.rho.into(),
                        opt.rho.into(),
                        m.xi.into(),
                        bound.into(),
                        point.tau.into(),
                        conv1.into(),
                        (point.tau / conv1).into(),
                        sim_tau.into(),
                        metrics.as_ref().and_then(|m| m.throughput_stderr).into(),
                        sim_delay.into(),
                        metrics.as_ref().and_then(|m| m.mean_delay_little).into(),
                        abs,
                        rel,
                        sim_delay.map(|d| d <= bound).into(),
                    ])
                });
                jobs.push(Job { keys, task });
            }
            stream += 1;
        }
    }
    jobs
}

/// Buffer sizes share one stream per delay target, so the curves over
/// `q_max` use common random numbers.
fn drop_jobs(plan: &SweepPlan) -> Vec<Job<'_>> {
    let spec = plan.quadrature;
    let mut jobs = Vec::new();
    let mut stream = 0u64;
    for (&omega_s, &omega_r) in plan.omega_s.iter().zip(&plan.omega_r) {
        for &target in &plan.delay_targets {
            for &q_max in &plan.axis {
                for &seed in &plan.seeds {
                    let keys = vec![
                        omega_s.into(),
                        omega_r.into(),
                        target.into(),
                        q_max.into(),
                        seed.into(),
                    ];
                    let task: Task = Box::new(move || {
                        let (ms, mr) = rayleigh_pair(omega_s, omega_r)?;
                        let point = solve_rho_for_delay(target, omega_s, omega_r, &spec)?;
                        let (_, bound) = delay_point(point.rho, omega_s, omega_r, &spec)?;
                        let mut sim = vec![Value::Empty; 6];
                        if plan.simulate {
                            let policy = PolicySpec::starved(point.rho, DecisionFunction::Identity);
                            let finite = SimConfig::new(policy.with_q_max(q_max), ms.clone(), mr.clone(), plan.slots);
                            let finite = simulate(plan, finite, seed, stream)?;
                            let open = SimConfig::new(policy, ms, mr, plan.slots).with_overflow_threshold(q_max);
                            let open = simulate(plan, open, seed, stream)?;
                            sim = vec![
                                finite.drop_prob.into(),
                                open.overflow_event_prob.into(),
                                open.mean_queue.into(),
                                drop_probability_bound(open.mean_queue, q_max)?.into(),
                                finite.mean_delay_fifo.into(),
                                finite.throughput.into(),
                            ];
                        }
                        let mut row = vec![point.rho.into(), bound.into()];
                        row.extend(sim);
                        Ok(row)
                    });
                    jobs.push(Job { keys, task });
                }
            }
            stream += 1;
        }
    }
    jobs
}

/// Nominal delay `t` maps to each scheme's control: the delay-bound target
/// for `starved`, `Q_max = 2t·τ_max` for `queue_limited` and a frame of
/// `2·round(t)` slots for `conv_buffer`.
fn delay_comparison_jobs(plan: &SweepPlan) -> Vec<Job<'_>> {
    let spec = plan.quadrature;
    let mut jobs = Vec::new();
    let mut stream = 0u64;
    for (&omega_s, &omega_r) in plan.omega_s.iter().zip(&plan.omega_r) {
        for &target in &plan.axis {
            for &scheme in &plan.schemes {
                for &seed in &plan.seeds {
                    let keys = vec![
                        omega_s.into(),
                        omega_r.into(),
                        scheme.name().into(),
                        target.into(),
                        seed.into(),
                    ];
                    let task: Task = Box::new(move || {
                        let (ms, mr) = rayleigh_pair(omega_s, omega_r)?;
                        let opt = solve_rho_opt(DecisionFunction::Identity, &ms, &mr, &spec)?;
                        let conv1 = tau_conv1_rayleigh(omega_s, omega_r)?;
                        let (rho, q_max, frame, config) = match scheme {
                            Protocol::Starved => {
                                let p = solve_rho_for_delay(target, omega_s, omega_r, &spec)?;
                                let policy = PolicySpec::starved(p.rho, DecisionFunction::Identity);
                                (Some(p.rho), None, None, SimConfig::new(policy, ms, mr, plan.slots))
                            }
                            Protocol::QueueLimited => {
                                let q = 2.0 * target * opt.tau;
                                let policy = PolicySpec::queue_limited(opt.rho, DecisionFunction::Identity, q);
                                (Some(opt.rho), Some(q), None, SimConfig::new(policy, ms, mr, plan.slots))
                            }
                            _ => {
                                let frame = 2 * (target.round() as u64).max(1);
                                let slots = plan.slots / frame * frame;
                                if slots == 0 {
                                    return Err(Error::config(format!(
                                        "frame of {frame} slots exceeds the run of {}",
                                        plan.slots
                                    )));
                                }
                                let config = SimConfig::new(PolicySpec::conv_buffer(), ms, mr, slots).with_frame(frame);
                                (None, None, Some(frame), config)
                            }
                        };
                        let mut sim = vec![Value::Empty; 3];
                        let mut ratios = vec![Value::Empty; 2];
                        if plan.simulate {
                            let m = simulate(plan, config, seed, stream)?;
                            sim = vec![m.mean_delay_fifo.into(), m.throughput.into(), m.throughput_stderr.into()];
                            ratios = vec![(m.throughput / conv1).into(), (m.throughput / opt.tau).into()];
                        }
                        let mut row: Vec<Value> = vec![rho.into(), q_max.into(), frame.into()];
                        row.extend(sim);
                        row.extend([conv1.into(), opt.tau.into()]);
                        row.extend(ratios);
                        Ok(row)
                    });
                    jobs.push(Job { keys, task });
                }
            }
            stream += 1;
        }
    }
    jobs
}

fn custom_jobs(plan: &SweepPlan) -> Vec<Job<'_>> {
    let mut jobs = Vec::new();
    let c = &plan.custom;
    for (index, &x) in plan.axis.iter().enumerate() {
        for &seed in &plan.seeds {
            let keys = vec![
                plan.axis_variable.name().into(),
                x.into(),
                c.protocol.name().into(),
                c.decision.name().into(),
                seed.into(),
            ];
            let task: Task = Box::new(move || custom_point(plan, x, seed, index as u64));
            jobs.push(Job { keys, task });
        }
    }
    jobs
}

fn custom_point(plan: &SweepPlan, x: f64, seed: u64, stream: u64) -> Result<Vec<Value>> {
    let spec: QuadratureSpec = plan.quadrature;
    let c = &plan.custom;
    let mut omega_s = plan.omega_s[0];
    let mut omega_r = plan.omega_r[0];
    let mut rho = c.rho;
    let mut q_max = c.q_max;
    let mut gamma_db = c.gamma_db;
    match plan.axis_variable {
        AxisVariable::OmegaS => omega_s = x,
        AxisVariable::OmegaR => omega_r = x,
        AxisVariable::Rho => rho = Some(x),
        AxisVariable::QMax => q_max = x,
        AxisVariable::GammaDb => gamma_db = Some(x),
        AxisVariable::OmegaRatio | AxisVariable::DelayTarget => {
            return Err(Error::config("axis not supported by custom sweeps"));
        }
    }
    let (ms, mr) = rayleigh_pair(omega_s, omega_r)?;
    let mut lambda = None;
    let mut gamma = None;
    let (policy, analytic) = match c.protocol {
        Protocol::ConvNoBuffer => (PolicySpec::conv_no_buffer(), Some(tau_conv1_rayleigh(omega_s, omega_r)?)),
        Protocol::ConvBuffer => (PolicySpec::conv_buffer(), Some(tau_conv2_rayleigh(omega_s, omega_r)?)),
        Protocol::AdaptiveFixed | Protocol::Starved | Protocol::QueueLimited => {
            let r = match rho {
                Some(r) => r,
                None => solve_rho_opt(c.decision, &ms, &mr, &spec)?.rho,
            };
            rho = Some(r);
            let policy = match c.protocol {
                Protocol::AdaptiveFixed => PolicySpec::adaptive_fixed(r, c.decision),
                Protocol::Starved => PolicySpec::starved(r, c.decision),
                _ => PolicySpec::queue_limited(r, c.decision, q_max),
            };
            let analytic = if c.protocol == Protocol::QueueLimited {
                None
            } else {
                let a = arrival_rate(c.decision, r, &ms, &mr, &spec)?;
                let d = tau_max(c.decision, r, &ms, &mr, &spec)?;
                Some(a.min(d))
            };
            (policy, analytic)
        }
        Protocol::AdaptivePa => {
            let g = db_to_linear(gamma_db.expect("validated: gamma_db present"));
            gamma = Some(g);
            let (l, r, tau) = match (c.lambda, rho) {
                (Some(l), Some(r)) => {
                    let p = pa_residuals(l, r, &ms, &mr, g, &spec)?;
                    (l, r, p.tau.min(p.departure))
                }
                (None, Some(r)) => {
                    let (l, p) = solve_lambda_for_power(r, &ms, &mr, g, &spec)?;
                    (l, r, p.tau.min(p.departure))
                }
                (_, None) => {
                    let s = solve_lambda_rho(&ms, &mr, g, &spec)?;
                    (s.lambda.expect("joint solve reports lambda"), s.rho, s.tau)
                }
            };
            lambda = Some(l);
            rho = Some(r);
            (PolicySpec::adaptive_pa(l, r, g), Some(tau))
        }
    };
    let metrics = if plan.simulate {
        let policy = if c.protocol == Protocol::Starved { policy.with_q_max(q_max) } else { policy };
        Some(simulate(plan, SimConfig::new(policy, ms, mr, plan.slots), seed, stream)?)
    } else {
        None
    };
    let sim_tau = metrics.as_ref().map(|m| m.throughput);
    let (abs, rel) = match analytic {
        Some(a) => deviation(sim_tau, a),
        None => (Value::Empty, Value::Empty),
    };
    let uses_buffer_limit = matches!(c.protocol, Protocol::Starved | Protocol::QueueLimited);
    Ok(vec![
        omega_s.into(),
        omega_r.into(),
        rho.into(),
        lambda.into(),
        gamma.into(),
        uses_buffer_limit.then_some(q_max).into(),
        analytic.into(),
        sim_tau.into(),
        metrics.as_ref().and_then(|m| m.throughput_stderr).into(),
        abs,
        rel,
        metrics.as_ref().map(|m| m.mean_queue).into(),
        metrics.as_ref().and_then(|m| m.mean_delay_fifo).into(),
        metrics.as_ref().map(|m| m.drop_prob).into(),
        metrics.as_ref().and_then(|m| m.mean_power).into(),
    ])
}
