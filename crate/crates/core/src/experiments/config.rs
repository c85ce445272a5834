//! Sweep configuration: a flat TOML document turned into a validated
//! [`SweepPlan`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::policy::{DecisionFunction, Protocol};
use crate::special::QuadratureSpec;
use crate::{Error, Result};

/// Figure reproductions plus a free-form sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Custom,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Fig2,
        Experiment::Fig3,
        Experiment::Fig4,
        Experiment::Fig5,
        Experiment::Fig6,
        Experiment::Fig7,
        Experiment::Fig8,
        Experiment::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::Fig6 => "fig6",
            Experiment::Fig7 => "fig7",
            Experiment::Fig8 => "fig8",
            Experiment::Custom => "custom",
        }
    }

    /// Name of the swept quantity for the figure plans.
    pub fn default_axis(self) -> AxisVariable {
        match self {
            Experiment::Fig2 | Experiment::Fig3 => AxisVariable::OmegaRatio,
            Experiment::Fig4 => AxisVariable::GammaDb,
            Experiment::Fig5 | Experiment::Fig6 => AxisVariable::DelayTarget,
            Experiment::Fig7 => AxisVariable::QMax,
            Experiment::Fig8 => AxisVariable::DelayTarget,
            Experiment::Custom => AxisVariable::Rho,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::config(format!("unknown experiment '{s}'")))
    }
}

/// Quantity varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisVariable {
    /// `Ω_R/Ω_S`.
    OmegaRatio,
    /// Power budget `Γ` in dB.
    GammaDb,
    /// Target average delay in slots.
    DelayTarget,
    /// Buffer size in bits.
    QMax,
    Rho,
    OmegaS,
    OmegaR,
}

impl AxisVariable {
    pub fn name(self) -> &'static str {
        match self {
            AxisVariable::OmegaRatio => "omega_ratio",
            AxisVariable::GammaDb => "gamma_db",
            AxisVariable::DelayTarget => "delay_target",
            AxisVariable::QMax => "q_max",
            AxisVariable::Rho => "rho",
            AxisVariable::OmegaS => "omega_s",
            AxisVariable::OmegaR => "omega_r",
        }
    }
}

/// Raw document; every key optional except `experiment`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    axis_variable: Option<AxisVariable>,
    axis: Option<Vec<f64>>,
    axis_min: Option<f64>,
    axis_max: Option<f64>,
    axis_points: Option<usize>,
    axis_log: Option<bool>,
    omega_s: Option<Vec<f64>>,
    omega_r: Option<Vec<f64>>,
    decisions: Option<Vec<DecisionFunction>>,
    delay_targets: Option<Vec<f64>>,
    schemes: Option<Vec<Protocol>>,
    protocol: Option<Protocol>,
    decision: Option<DecisionFunction>,
    rho: Option<f64>,
    lambda: Option<f64>,
    gamma_db: Option<f64>,
    q_max: Option<f64>,
    seeds: Option<Vec<u64>>,
    seed: Option<u64>,
    replications: Option<usize>,
    simulate: Option<bool>,
    slots: Option<u64>,
    warmup: Option<u64>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    max_subdivisions: Option<usize>,
    output: Option<PathBuf>,
}

/// Fixed parameters of a custom sweep; the axis overrides one of them.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomPoint {
    pub protocol: Protocol,
    pub decision: DecisionFunction,
    /// `None` selects the balancing threshold.
    pub rho: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma_db: Option<f64>,
    pub q_max: f64,
}

/// A validated sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub experiment: Experiment,
    pub axis_variable: AxisVariable,
    pub axis: Vec<f64>,
    /// Source-side means. Paired with `omega_r` element-wise except in
    /// fig2/fig3, where `Ω_R` follows from the axis.
    pub omega_s: Vec<f64>,
    pub omega_r: Vec<f64>,
    pub decisions: Vec<DecisionFunction>,
    /// Delay targets of fig7, one curve each.
    pub delay_targets: Vec<f64>,
    /// Protocols compared in fig8.
    pub schemes: Vec<Protocol>,
    pub custom: CustomPoint,
    pub seeds: Vec<u64>,
    pub simulate: bool,
    pub slots: u64,
    pub warmup: Option<u64>,
    pub quadrature: QuadratureSpec,
    pub output: Option<PathBuf>,
}

/// Reads and validates a plan from a file.
pub fn parse_config(path: &Path) -> Result<SweepPlan> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Parses and validates a plan from TOML text.
pub fn parse_config_str(text: &str) -> Result<SweepPlan> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::config(parse_message(text, &e)))?;
    build(raw)
}

fn parse_message(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message().trim_end();
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("config line {line}: {msg}")
        }
        None => format!("config: {msg}"),
    }
}

fn build(raw: RawConfig) -> Result<SweepPlan> {
    let experiment = raw.experiment;
    let axis_variable = raw.axis_variable.unwrap_or(experiment.default_axis());
    if experiment != Experiment::Custom && axis_variable != experiment.default_axis() {
        return Err(Error::config(format!(
            "{experiment} sweeps {}, not {}",
            experiment.default_axis().name(),
            axis_variable.name()
        )));
    }
    let axis = build_axis(&raw, experiment)?;

    let (default_s, default_r): (&[f64], &[f64]) = match experiment {
        Experiment::Fig2 | Experiment::Fig3 => (&[0.1, 1.0, 10.0], &[]),
        Experiment::Fig4 => (&[0.1], &[1.9]),
        Experiment::Fig5 | Experiment::Fig6 => (&[1.0, 1.0, 0.5], &[1.0, 0.5, 1.0]),
        Experiment::Fig7 => (&[1.0], &[1.0]),
        Experiment::Fig8 => (&[1.0, 1.0], &[1.0, 0.5]),
        Experiment::Custom => (&[1.0], &[1.0]),
    };
    let omega_s = raw.omega_s.clone().unwrap_or_else(|| default_s.to_vec());
    let omega_r = raw.omega_r.clone().unwrap_or_else(|| default_r.to_vec());

    let decisions = raw.decisions.clone().unwrap_or_else(|| match experiment {
        Experiment::Fig2 | Experiment::Fig3 => {
            vec![DecisionFunction::Identity, DecisionFunction::LogCapacity]
        }
        _ => vec![DecisionFunction::Identity],
    });
    let delay_targets = raw.delay_targets.clone().unwrap_or_else(|| vec![5.0, 10.0, 20.0]);
    let schemes = raw.schemes.clone().unwrap_or_else(|| {
        vec![Protocol::Starved, Protocol::QueueLimited, Protocol::ConvBuffer]
    });

    let seeds = match (&raw.seeds, raw.seed, raw.replications) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(Error::config("give either 'seeds' or 'seed'/'replications', not both"));
        }
        (Some(list), None, None) => list.clone(),
        (None, seed, reps) => {
            let base = seed.unwrap_or(1);
            let n = reps.unwrap_or(1) as u64;
            (0..n).map(|k| base + k).collect()
        }
    };

    let quadrature = QuadratureSpec::new(
        raw.abs_tol.unwrap_or(QuadratureSpec::default().abs_tol),
        raw.rel_tol.unwrap_or(QuadratureSpec::default().rel_tol),
        raw.max_subdivisions.unwrap_or(QuadratureSpec::default().max_subdivisions),
    )?;

    let custom = CustomPoint {
        protocol: raw.protocol.unwrap_or(Protocol::AdaptiveFixed),
        decision: raw.decision.unwrap_or(DecisionFunction::Identity),
        rho: raw.rho,
        lambda: raw.lambda,
        gamma_db: raw.gamma_db,
        q_max: raw.q_max.unwrap_or(f64::INFINITY),
    };

    let plan = SweepPlan {
        experiment,
        axis_variable,
        axis,
        omega_s,
        omega_r,
        decisions,
        delay_targets,
        schemes,
        custom,
        seeds,
        simulate: raw.simulate.unwrap_or(true),
        slots: raw.slots.unwrap_or(200_000),
        warmup: raw.warmup,
        quadrature,
        output: raw.output,
    };
    plan.validate()?;
    Ok(plan)
}

fn build_axis(raw: &RawConfig, experiment: Experiment) -> Result<Vec<f64>> {
    let range_given = raw.axis_min.is_some()
        || raw.axis_max.is_some()
        || raw.axis_points.is_some()
        || raw.axis_log.is_some();
    if let Some(values) = &raw.axis {
        if range_given {
            return Err(Error::config("give either 'axis' or an axis_min/axis_max range, not both"));
        }
        return Ok(values.clone());
    }
    let (lo, hi, n, log) = match experiment {
        Experiment::Fig2 | Experiment::Fig3 => (1e-2, 1e2, 9, true),
        Experiment::Fig4 => (-10.0, 30.0, 9, false),
        Experiment::Fig5 | Experiment::Fig6 => (4.0, 100.0, 8, true),
        Experiment::Fig7 => (1.0, 100.0, 9, true),
        Experiment::Fig8 => (6.0, 200.0, 7, true),
        Experiment::Custom => (0.5, 2.0, 5, true),
    };
    let lo = raw.axis_min.unwrap_or(lo);
    let hi = raw.axis_max.unwrap_or(hi);
    let n = raw.axis_points.unwrap_or(n);
    let log = raw.axis_log.unwrap_or(log);
    grid(lo, hi, n, log)
}

/// `n` points from `lo` to `hi`, evenly spaced or log-spaced.
pub fn grid(lo: f64, hi: f64, n: usize, log: bool) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::config("axis grid must be nonempty (axis_points = 0)"));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::config(format!("axis range [{lo}, {hi}] is not a finite interval")));
    }
    if log && !(lo > 0.0) {
        return Err(Error::config(format!("log-spaced axis needs a positive start, got {lo}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let step = |k: usize| k as f64 / (n - 1) as f64;
    Ok((0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else if log {
                (lo.ln() + step(k) * (hi.ln() - lo.ln())).exp()
            } else {
                lo + step(k) * (hi - lo)
            }
        })
        .collect())
}

impl SweepPlan {
    /// Checks every invariant, naming the first one violated.
    pub fn validate(&self) -> Result<()> {
        if self.axis.is_empty() {
            return Err(Error::config("axis grid must be nonempty"));
        }
        if let Some(bad) = self.axis.iter().find(|v| !v.is_finite()) {
            return Err(Error::config(format!("axis values must be finite, got {bad}")));
        }
        let positive_axis = !matches!(self.axis_variable, AxisVariable::GammaDb);
        if positive_axis {
            if let Some(bad) = self.axis.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::config(format!(
                    "{} values must be positive, got {bad}",
                    self.axis_variable.name()
                )));
            }
        }
        for (name, list) in [("omega_s", &self.omega_s), ("omega_r", &self.omega_r)] {
            if let Some(bad) = list.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(Error::config(format!("{name} values must be positive, got {bad}")));
            }
        }
        if self.omega_s.is_empty() {
            return Err(Error::config("omega_s must be nonempty"));
        }
        let paired = !matches!(self.experiment, Experiment::Fig2 | Experiment::Fig3);
        if paired && self.omega_s.len() != self.omega_r.len() {
            return Err(Error::config(format!(
                "omega_s and omega_r are paired and must have equal length ({} vs {})",
                self.omega_s.len(),
                self.omega_r.len()
            )));
        }
        if !paired && !self.omega_r.is_empty() {
            return Err(Error::config(format!(
                "{} derives omega_r from the axis; remove 'omega_r'",
                self.experiment
            )));
        }
        if self.decisions.is_empty() {
            return Err(Error::config("decisions must be nonempty"));
        }
        if let Some(bad) = self.delay_targets.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::config(format!("delay targets must be positive, got {bad}")));
        }
        if self.delay_targets.is_empty() {
            return Err(Error::config("delay_targets must be nonempty"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes must be nonempty"));
        }
        if let Some(bad) = self
            .schemes
            .iter()
            .find(|p| !matches!(p, Protocol::Starved | Protocol::QueueLimited | Protocol::ConvBuffer))
        {
            return Err(Error::config(format!(
                "fig8 compares starved, queue_limited and conv_buffer; '{bad}' is not supported"
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(format!("seeds must be distinct; {} repeats", w[0])));
        }
        if self.simulate && self.slots < 2 {
            return Err(Error::config("slots must be at least 2"));
        }
        if let Some(w) = self.warmup {
            if self.simulate && w >= self.slots {
                return Err(Error::config(format!(
                    "warmup ({w}) must be shorter than the run ({})",
                    self.slots
                )));
            }
        }
        if self.experiment == Experiment::Custom {
            self.validate_custom()?;
        }
        Ok(())
    }

    fn validate_custom(&self) -> Result<()> {
        let c = &self.custom;
        if self.omega_s.len() != 1 {
            return Err(Error::config("custom sweeps take a single omega_s/omega_r pair"));
        }
        let allowed: &[AxisVariable] = match c.protocol {
            Protocol::AdaptivePa => &[AxisVariable::GammaDb, AxisVariable::OmegaS, AxisVariable::OmegaR],
            Protocol::ConvNoBuffer | Protocol::ConvBuffer => &[AxisVariable::OmegaS, AxisVariable::OmegaR],
            Protocol::QueueLimited => &[
                AxisVariable::Rho,
                AxisVariable::QMax,
                AxisVariable::OmegaS,
                AxisVariable::OmegaR,
            ],
            Protocol::AdaptiveFixed | Protocol::Starved => {
                &[AxisVariable::Rho, AxisVariable::OmegaS, AxisVariable::OmegaR]
            }
        };
        if !allowed.contains(&self.axis_variable) {
            return Err(Error::config(format!(
                "custom {} sweeps cannot vary {}",
                c.protocol,
                self.axis_variable.name()
            )));
        }
        if c.protocol == Protocol::AdaptivePa
            && self.axis_variable != AxisVariable::GammaDb
            && c.gamma_db.is_none()
        {
            return Err(Error::config("adaptive_pa needs 'gamma_db' unless it is the axis"));
        }
        if let Some(rho) = c.rho {
            if !(rho > 0.0) || !rho.is_finite() {
                return Err(Error::config(format!("rho must be positive, got {rho}")));
            }
        }
        if !(c.q_max > 0.0) {
            return Err(Error::config(format!("q_max must be positive, got {}", c.q_max)));
        }
        if c.protocol == Protocol::QueueLimited
            && self.axis_variable != AxisVariable::QMax
            && c.q_max.is_infinite()
        {
            return Err(Error::config("queue_limited needs a finite 'q_max' unless it is the axis"));
        }
        if c.lambda.is_some() && c.protocol != Protocol::AdaptivePa {
            return Err(Error::config("'lambda' applies to adaptive_pa only"));
        }
        Ok(())
    }
}
