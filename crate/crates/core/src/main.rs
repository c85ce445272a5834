use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value as Json};

use bufrelay::channel::FadingModel;
use bufrelay::closed_form::{
    arrival_rate, delay_upper_bound, tau_conv1_rayleigh, tau_conv2_rayleigh,
    tau_conv_buffer_pa_rayleigh, tau_max,
};
use bufrelay::closed_form::delay_moments;
use bufrelay::experiments::{parse_config, run_sweep, run_sweep_with_jobs};
use bufrelay::policy::{DecisionFunction, PolicySpec, Protocol};
use bufrelay::sim::{simulate, write_trace_csv, SimConfig};
use bufrelay::solver::{solve_lambda_for_power, solve_lambda_rho, solve_rho_for_delay, solve_rho_opt};
use bufrelay::special::QuadratureSpec;

/// Buffer-aided relaying: closed forms, solvers, simulation and sweeps.
#[derive(Parser)]
#[command(name = "bufrelay", version)]
struct Cli {
    /// RNG seed for simulations; replaces the seeds of a sweep file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit the `# generated` line of CSV output.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Relative quadrature tolerance (absolute tolerance is a tenth of it).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form quantities at one operating point.
    Analyze(AnalyzeArgs),
    /// Optimal threshold, or joint water level and threshold with --gamma-db.
    Solve(SolveArgs),
    /// One simulation run, printed as JSON.
    Simulate(SimulateArgs),
    /// Runs a sweep file and writes CSV.
    Sweep(SweepArgs),
    /// Threshold whose delay bound meets a target.
    Delay(DelayArgs),
}

#[derive(Args)]
struct Links {
    /// Mean SNR (or gain) of the source-relay link.
    #[arg(long)]
    omega_s: f64,
    /// Mean SNR (or gain) of the relay-destination link.
    #[arg(long)]
    omega_r: f64,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    links: Links,
    /// Threshold to evaluate; the balancing threshold if absent.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value = "identity")]
    decision: DecisionFunction,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    links: Links,
    #[arg(long, default_value = "identity")]
    decision: DecisionFunction,
    /// Average power budget in dB; switches to the power-allocation problem.
    #[arg(long)]
    gamma_db: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    links: Links,
    #[arg(long, default_value = "adaptive_fixed")]
    protocol: Protocol,
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    #[arg(long)]
    /// Slots excluded from the statistics [default: min(10000, slots/10)]
    warmup: Option<u64>,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Threshold; solved for when absent.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value = "identity")]
    decision: DecisionFunction,
    /// Buffer size in bits.
    #[arg(long)]
    q_max: Option<f64>,
    /// Water level of adaptive_pa; solved for when absent.
    #[arg(long)]
    lambda: Option<f64>,
    /// Power budget of adaptive_pa in dB.
    #[arg(long)]
    gamma_db: Option<f64>,
    /// Delay target used to pick the threshold of `starved`.
    #[arg(long)]
    delay_target: Option<f64>,
    /// Frame length of conv_buffer.
    #[arg(long)]
    frame: Option<u64>,
    /// Queue level whose exceedance frequency is reported.
    #[arg(long)]
    overflow_threshold: Option<f64>,
    /// Per-slot trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML sweep description.
    config: PathBuf,
}

#[derive(Args)]
struct DelayArgs {
    #[command(flatten)]
    links: Links,
    /// Target average delay in slots.
    #[arg(long)]
    target: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let spec = quadrature(cli.tol, QuadratureSpec::default())?;
    match &cli.command {
        Command::Analyze(a) => emit_json(cli, &analyze(a, &spec)?)?,
        Command::Solve(a) => emit_json(cli, &solve(a, &spec)?)?,
        Command::Simulate(a) => emit_json(cli, &simulate_once(cli, a, &spec)?)?,
        Command::Delay(a) => emit_json(cli, &delay(a, &spec)?)?,
        Command::Sweep(a) => return sweep(cli, a),
    }
    Ok(ExitCode::SUCCESS)
}

fn quadrature(tol: Option<f64>, base: QuadratureSpec) -> Result<QuadratureSpec> {
    match tol {
        Some(t) => Ok(QuadratureSpec::new(t / 10.0, t, base.max_subdivisions)?),
        None => Ok(base),
    }
}

fn rayleigh(links: &Links) -> Result<(FadingModel, FadingModel)> {
    Ok((FadingModel::rayleigh(links.omega_s)?, FadingModel::rayleigh(links.omega_r)?))
}

fn analyze(a: &AnalyzeArgs, spec: &QuadratureSpec) -> Result<Json> {
    let (ms, mr) = rayleigh(&a.links)?;
    let (os, or) = (a.links.omega_s, a.links.omega_r);
    let opt = solve_rho_opt(a.decision, &ms, &mr, spec)?;
    let rho = a.rho.unwrap_or(opt.rho);
    let arrival = arrival_rate(a.decision, rho, &ms, &mr, spec)?;
    let departure = tau_max(a.decision, rho, &ms, &mr, spec)?;
    let mut out = json!({
        "omega_s": os,
        "omega_r": or,
        "decision": a.decision.name(),
        "rho": rho,
        "arrival_rate": arrival,
        "departure_rate": departure,
        "residual": arrival - departure,
        "throughput": arrival.min(departure),
        "rho_opt": opt.rho,
        "tau_max": opt.tau,
        "tau_conv1": tau_conv1_rayleigh(os, or)?,
        "tau_conv2": tau_conv2_rayleigh(os, or)?,
    });
    if a.decision == DecisionFunction::Identity && rho < opt.rho {
        let m = delay_moments(rho, os, or, spec)?;
        out["delay"] = json!({
            "m_s1": m.m_s1,
            "m_r1": m.m_r1,
            "m_s2": m.m_s2,
            "m_r2": m.m_r2,
            "xi": m.xi,
            "bound": delay_upper_bound(&m)?,
        });
    }
    Ok(out)
}

fn solve(a: &SolveArgs, spec: &QuadratureSpec) -> Result<Json> {
    let (ms, mr) = rayleigh(&a.links)?;
    let (os, or) = (a.links.omega_s, a.links.omega_r);
    match a.gamma_db {
        Some(db) => {
            let gamma = 10f64.powf(db / 10.0);
            let result = solve_lambda_rho(&ms, &mr, gamma, spec)?;
            let conv = tau_conv_buffer_pa_rayleigh(os, or, gamma)?;
            Ok(json!({
                "problem": "power_allocation",
                "omega_bar_s": os,
                "omega_bar_r": or,
                "gamma": gamma,
                "result": result,
                "tau_conv_buffer_pa": conv,
                "ratio": result.tau / conv,
                "gain": result.tau - conv,
            }))
        }
        None => {
            let result = solve_rho_opt(a.decision, &ms, &mr, spec)?;
            let conv2 = tau_conv2_rayleigh(os, or)?;
            Ok(json!({
                "problem": "threshold",
                "omega_s": os,
                "omega_r": or,
                "decision": a.decision.name(),
                "result": result,
                "tau_conv2": conv2,
                "ratio": result.tau / conv2,
            }))
        }
    }
}

fn delay(a: &DelayArgs, spec: &QuadratureSpec) -> Result<Json> {
    let (os, or) = (a.links.omega_s, a.links.omega_r);
    let result = solve_rho_for_delay(a.target, os, or, spec)?;
    Ok(json!({
        "omega_s": os,
        "omega_r": or,
        "target": a.target,
        "result": result,
        "tau_conv1": tau_conv1_rayleigh(os, or)?,
    }))
}

fn simulate_once(cli: &Cli, a: &SimulateArgs, spec: &QuadratureSpec) -> Result<Json> {
    let (ms, mr) = rayleigh(&a.links)?;
    let threshold = |f: DecisionFunction| -> Result<f64> {
        match a.rho {
            Some(r) => Ok(r),
            None => Ok(solve_rho_opt(f, &ms, &mr, spec)?.rho),
        }
    };
    let q_max = a.q_max.unwrap_or(f64::INFINITY);
    let policy = match a.protocol {
        Protocol::ConvNoBuffer => PolicySpec::conv_no_buffer(),
        Protocol::ConvBuffer => PolicySpec::conv_buffer().with_q_max(q_max),
        Protocol::AdaptiveFixed => PolicySpec::adaptive_fixed(threshold(a.decision)?, a.decision).with_q_max(q_max),
        Protocol::QueueLimited => {
            let Some(q) = a.q_max else { bail!("queue_limited needs --q-max") };
            PolicySpec::queue_limited(threshold(a.decision)?, a.decision, q)
        }
        Protocol::Starved => {
            let rho = match (a.rho, a.delay_target) {
                (Some(_), Some(_)) => bail!("give --rho or --delay-target, not both"),
                (Some(r), None) => r,
                (None, Some(t)) => solve_rho_for_delay(t, a.links.omega_s, a.links.omega_r, spec)?.rho,
                (None, None) => bail!("starved needs --rho or --delay-target"),
            };
            PolicySpec::starved(rho, a.decision).with_q_max(q_max)
        }
        Protocol::AdaptivePa => {
            let Some(db) = a.gamma_db else { bail!("adaptive_pa needs --gamma-db") };
            let gamma = 10f64.powf(db / 10.0);
            let (lambda, rho) = match (a.lambda, a.rho) {
                (Some(l), Some(r)) => (l, r),
                (None, Some(r)) => (solve_lambda_for_power(r, &ms, &mr, gamma, spec)?.0, r),
                (Some(_), None) => bail!("--lambda needs --rho"),
                (None, None) => {
                    let s = solve_lambda_rho(&ms, &mr, gamma, spec)?;
                    (s.lambda.context("joint solve without water level")?, s.rho)
                }
            };
            PolicySpec::adaptive_pa(lambda, rho, gamma)
        }
    };
    let mut config = SimConfig::new(policy, ms, mr, a.slots)
        .with_seed(cli.seed.unwrap_or(1))
        .with_stream(a.stream);
    if let Some(w) = a.warmup {
        config = config.with_warmup(w);
    }
    if let Some(f) = a.frame {
        config = config.with_frame(f);
    }
    if let Some(t) = a.overflow_threshold {
        config = config.with_overflow_threshold(t);
    }
    if a.trace.is_some() {
        config = config.with_trace();
    }
    let output = simulate(&config)?;
    if let Some(path) = &a.trace {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        write_trace_csv(&output.trace, BufWriter::new(file))?;
    }
    let p = &config.policy;
    Ok(json!({
        "protocol": p.protocol.name(),
        "omega_s": a.links.omega_s,
        "omega_r": a.links.omega_r,
        "rho": (!p.protocol.is_conventional()).then_some(p.rho),
        "lambda": (p.protocol == Protocol::AdaptivePa).then_some(p.lambda),
        "gamma": (p.protocol == Protocol::AdaptivePa).then_some(p.gamma_bar),
        "decision": p.decision.name(),
        "q_max": p.q_max.is_finite().then_some(p.q_max),
        "slots": config.slots,
        "seed": config.seed,
        "stream": config.stream,
        "metrics": output.metrics,
    }))
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<ExitCode> {
    let mut plan = parse_config(&a.config)?;
    if let Some(seed) = cli.seed {
        plan.seeds = vec![seed];
    }
    plan.quadrature = quadrature(cli.tol, plan.quadrature)?;
    let table = match cli.jobs {
        Some(0) => bail!("--jobs must be at least 1"),
        Some(n) => run_sweep_with_jobs(&plan, n)?,
        None => run_sweep(&plan)?,
    };
    let stamp = (!cli.no_timestamp).then(timestamp);
    let target = cli.out.as_deref().or(plan.output.as_deref());
    let mut writer = open_output(target)?;
    table.write_csv(&mut writer, stamp.as_deref())?;
    writer.flush()?;
    let failed = table.failures();
    if failed > 0 {
        eprintln!("{failed} of {} grid points failed; see the error column", table.rows.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn timestamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("unix_time={secs}")
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json(cli: &Cli, value: &Json) -> Result<()> {
    let mut writer = open_output(cli.out.as_deref())?;
    serde_json::to_writer_pretty(&mut writer, value)?;
    writeln!(writer)?;
    writer.flush()?;
    Ok(())
}
