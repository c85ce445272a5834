//! Link-selection and power-allocation rules.
//!
//! `d = 1` means the relay-destination link is used in the slot, `d = 0`
//! the source-relay link.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::special::{lambert_w_of_neg_exp, Branch};
use crate::{capacity_bits, Error, Result};

/// Monotone metric compared across the two links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionFunction {
    /// `F(x) = x`
    Identity,
    /// `F(x) = log2(1 + x)`, the throughput-optimal choice.
    LogCapacity,
}

impl DecisionFunction {
    pub fn forward(self, x: f64) -> f64 {
        match self {
            DecisionFunction::Identity => x,
            DecisionFunction::LogCapacity => capacity_bits(x),
        }
    }

    pub fn inverse(self, y: f64) -> f64 {
        match self {
            DecisionFunction::Identity => y,
            DecisionFunction::LogCapacity => (y * std::f64::consts::LN_2).exp_m1(),
        }
    }

    /// `G(r) = F⁻¹(F(r)/ρ)`: the smallest `s` for which the source wins
    /// against relay quality `r`.
    pub fn source_limit(self, r: f64, rho: f64) -> f64 {
        match self {
            DecisionFunction::Identity => r / rho,
            DecisionFunction::LogCapacity => (r.ln_1p() / rho).exp_m1(),
        }
    }

    /// `H(s) = F⁻¹(ρF(s))`: the smallest `r` for which the relay wins
    /// against source quality `s`.
    pub fn relay_limit(self, s: f64, rho: f64) -> f64 {
        match self {
            DecisionFunction::Identity => rho * s,
            DecisionFunction::LogCapacity => (rho * s.ln_1p()).exp_m1(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecisionFunction::Identity => "identity",
            DecisionFunction::LogCapacity => "log_capacity",
        }
    }
}

impl fmt::Display for DecisionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecisionFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "linear" => Ok(DecisionFunction::Identity),
            "log_capacity" | "log" => Ok(DecisionFunction::LogCapacity),
            other => Err(Error::config(format!("unknown decision function `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Receive in odd slots, forward in even slots; nothing is kept.
    ConvNoBuffer,
    /// Receive for the first half of a frame, transmit for the second half.
    ConvBuffer,
    /// Threshold rule with fixed powers.
    AdaptiveFixed,
    /// Joint link selection and water-filling power allocation.
    AdaptivePa,
    /// Threshold rule run below the optimal threshold to keep the queue short.
    Starved,
    /// Threshold rule, overridden to the relay whenever the buffer could
    /// overflow.
    QueueLimited,
}

impl Protocol {
    pub const ALL: [Protocol; 6] = [
        Protocol::ConvNoBuffer,
        Protocol::ConvBuffer,
        Protocol::AdaptiveFixed,
        Protocol::AdaptivePa,
        Protocol::Starved,
        Protocol::QueueLimited,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::ConvNoBuffer => "conv_no_buffer",
            Protocol::ConvBuffer => "conv_buffer",
            Protocol::AdaptiveFixed => "adaptive_fixed",
            Protocol::AdaptivePa => "adaptive_pa",
            Protocol::Starved => "starved",
            Protocol::QueueLimited => "queue_limited",
        }
    }

    pub fn is_conventional(self) -> bool {
        matches!(self, Protocol::ConvNoBuffer | Protocol::ConvBuffer)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown protocol `{s}`")))
    }
}

/// A protocol together with its parameters. Fields a protocol does not use
/// are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec {
    pub protocol: Protocol,
    /// Decision threshold ρ.
    pub rho: f64,
    /// Water level parameter λ (`adaptive_pa` only).
    pub lambda: f64,
    /// Average power budget Γ (`adaptive_pa` only).
    pub gamma_bar: f64,
    /// Buffer size in bits; infinite when unlimited.
    pub q_max: f64,
    pub decision: DecisionFunction,
}

impl PolicySpec {
    fn base(protocol: Protocol) -> Self {
        PolicySpec {
            protocol,
            rho: 1.0,
            lambda: f64::NAN,
            gamma_bar: f64::NAN,
            q_max: f64::INFINITY,
            decision: DecisionFunction::LogCapacity,
        }
    }

    pub fn conv_no_buffer() -> Self {
        Self::base(Protocol::ConvNoBuffer)
    }

    pub fn conv_buffer() -> Self {
        Self::base(Protocol::ConvBuffer)
    }

    pub fn adaptive_fixed(rho: f64, decision: DecisionFunction) -> Self {
        PolicySpec {
            rho,
            decision,
            ..Self::base(Protocol::AdaptiveFixed)
        }
    }

    pub fn adaptive_pa(lambda: f64, rho: f64, gamma_bar: f64) -> Self {
        PolicySpec {
            rho,
            lambda,
            gamma_bar,
            ..Self::base(Protocol::AdaptivePa)
        }
    }

    pub fn starved(rho: f64, decision: DecisionFunction) -> Self {
        PolicySpec {
            rho,
            decision,
            ..Self::base(Protocol::Starved)
        }
    }

    pub fn queue_limited(rho: f64, decision: DecisionFunction, q_max: f64) -> Self {
        PolicySpec {
            rho,
            decision,
            q_max,
            ..Self::base(Protocol::QueueLimited)
        }
    }

    pub fn with_q_max(mut self, q_max: f64) -> Self {
        self.q_max = q_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::config(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.q_max >= 0.0) {
            return Err(Error::config(format!(
                "q_max must be non-negative, got {}",
                self.q_max
            )));
        }
        match self.protocol {
            Protocol::AdaptivePa => {
                if !(self.lambda > 0.0) || !self.lambda.is_finite() {
                    return Err(Error::config(format!(
                        "adaptive_pa needs lambda > 0, got {}",
                        self.lambda
                    )));
                }
                if !(self.gamma_bar > 0.0) || !self.gamma_bar.is_finite() {
                    return Err(Error::config(format!(
                        "adaptive_pa needs gamma_bar > 0, got {}",
                        self.gamma_bar
                    )));
                }
            }
            Protocol::QueueLimited if !self.q_max.is_finite() => {
                return Err(Error::config("queue_limited needs a finite q_max"));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Fixed-power threshold rule: relay iff `F(r) ≥ ρ·F(s)`.
#[inline]
pub fn select_fixed_power(s: f64, r: f64, rho: f64, f: DecisionFunction) -> bool {
    f.forward(r) >= rho * f.forward(s)
}

/// Threshold rule unless the source's bits might not fit, in which case the
/// relay transmits.
#[inline]
pub fn select_queue_limited(
    s: f64,
    r: f64,
    rho: f64,
    f: DecisionFunction,
    q: f64,
    q_max: f64,
) -> bool {
    if q_max - q > capacity_bits(s) {
        select_fixed_power(s, r, rho, f)
    } else {
        true
    }
}

/// Water-filling powers `(γ_S, γ_R)` with link-specific water levels `ρ/λ`
/// and `1/λ`.
#[inline]
pub fn allocate_power(h_s: f64, h_r: f64, lambda: f64, rho: f64) -> (f64, f64) {
    let gamma_s = if h_s > lambda / rho {
        rho / lambda - 1.0 / h_s
    } else {
        0.0
    };
    let gamma_r = if h_r > lambda { 1.0 / lambda - 1.0 / h_r } else { 0.0 };
    (gamma_s, gamma_r)
}

/// `ln(h_R/λ) + λ/h_R − 1`, the relay side of the power-allocation
/// selection rule.
#[inline]
pub fn relay_metric(h_r: f64, lambda: f64) -> f64 {
    let v = lambda / h_r;
    v - 1.0 - v.ln()
}

/// `ρ ln(ρh_S/λ) + λ/h_S − ρ`, the source side.
#[inline]
pub fn source_metric(h_s: f64, lambda: f64, rho: f64) -> f64 {
    let v = lambda / h_s;
    rho * (lambda / (rho * h_s)).ln().mul_add(-1.0, -1.0) + v
}

/// Joint selection rule under power allocation.
pub fn select_with_power(h_s: f64, h_r: f64, lambda: f64, rho: f64) -> bool {
    let relay_on = h_r > lambda;
    let source_on = h_s > lambda / rho;
    if !relay_on {
        return false;
    }
    if !source_on {
        return true;
    }
    relay_metric(h_r, lambda) > source_metric(h_s, lambda, rho)
}

/// Crossing thresholds of the power-allocation selection rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingThresholds {
    /// For the given `h_R`: the relay wins iff `h_S < l1`.
    pub l1: f64,
    /// For the given `h_S`: the relay wins iff `h_R > l2`.
    pub l2: f64,
}

/// `L1(h_R)`: the `h_S` at which the two selection metrics are equal.
///
/// Writing `t = λ/(ρ L1) ∈ (0, 1]` the equality reads
/// `t − ln t = 1 + metric_R/ρ`, i.e. `−t = W(−e^{−1−metric_R/ρ})`. Only the
/// principal branch puts `t` in `(0, 1]`; the lower branch would give
/// `L1 ≤ λ/ρ`, outside the region where the crossing is used.
pub fn l1_threshold(h_r: f64, lambda: f64, rho: f64) -> Result<f64> {
    if !(h_r >= lambda) {
        return Err(Error::domain(format!("L1 requires h_R >= lambda ({h_r} < {lambda})")));
    }
    let c = relay_metric(h_r, lambda).max(0.0) / rho;
    crossing(c, lambda / rho)
}

/// `L2(h_S)`: the `h_R` at which the two selection metrics are equal.
pub fn l2_threshold(h_s: f64, lambda: f64, rho: f64) -> Result<f64> {
    if !(h_s >= lambda / rho) {
        return Err(Error::domain(format!(
            "L2 requires h_S >= lambda/rho ({h_s} < {})",
            lambda / rho
        )));
    }
    let c = source_metric(h_s, lambda, rho).max(0.0);
    crossing(c, lambda)
}

/// Both thresholds at once; see [`l1_threshold`] and [`l2_threshold`].
pub fn l_thresholds(h_r: f64, h_s: f64, lambda: f64, rho: f64) -> Result<CrossingThresholds> {
    Ok(CrossingThresholds {
        l1: l1_threshold(h_r, lambda, rho)?,
        l2: l2_threshold(h_s, lambda, rho)?,
    })
}

/// Solves `cutoff/L − ln(cutoff/L) = 1 + c` for `L ≥ cutoff`.
fn crossing(c: f64, cutoff: f64) -> Result<f64> {
    let w = lambert_w_of_neg_exp(Branch::Principal, c)?;
    if w == 0.0 {
        // the argument underflowed: the crossing lies beyond any finite gain
        return Ok(f64::INFINITY);
    }
    // w ∈ [-1, 0): principal branch, so L = -cutoff/w ≥ cutoff
    if !(-1.0..0.0).contains(&w) {
        return Err(Error::BranchResolution(format!(
            "W0(-exp(-1-{c})) = {w} is outside [-1, 0)"
        )));
    }
    let l = -cutoff / w;
    if l.is_nan() || l < cutoff * (1.0 - 1e-12) {
        return Err(Error::BranchResolution(format!(
            "threshold {l} below cutoff {cutoff}"
        )));
    }
    Ok(l.max(cutoff))
}

/// Checks the branch choice against direct bisection of the metric equality
/// on a coarse grid; returns the worst relative disagreement.
pub fn validate_threshold_branch(lambda: f64, rho: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 1..=12 {
        let factor = 1.0 + 0.37 * (k as f64).powf(1.7);
        let h_r = lambda * factor;
        let target = relay_metric(h_r, lambda);
        let l1 = l1_threshold(h_r, lambda, rho)?;
        let b1 = bisect_increasing(|h| source_metric(h, lambda, rho) - target, lambda / rho)?;
        worst = worst.max((l1 / b1 - 1.0).abs());

        let h_s = lambda / rho * factor;
        let target = source_metric(h_s, lambda, rho);
        let l2 = l2_threshold(h_s, lambda, rho)?;
        let b2 = bisect_increasing(|h| relay_metric(h, lambda) - target, lambda)?;
        worst = worst.max((l2 / b2 - 1.0).abs());
    }
    if worst > 1e-8 {
        return Err(Error::BranchResolution(format!(
            "closed-form thresholds disagree with bisection by {worst:e}"
        )));
    }
    Ok(worst)
}

fn bisect_increasing<F: Fn(f64) -> f64>(g: F, lo: f64) -> Result<f64> {
    let mut lo = lo;
    let mut hi = lo * 2.0;
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Bracket("metric crossing not found".into()));
        }
    }
    for _ in 0..200 {
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
    Ok(0.5 * (lo + hi))
}

/// Fixed transmit schedule of the two conventional baselines. `slot` is
/// 1-based within a `horizon`-slot frame.
pub fn conventional_schedule(protocol: Protocol, slot: u64, horizon: u64) -> Result<bool> {
    if horizon == 0 || horizon % 2 == 1 {
        return Err(Error::config(format!(
            "conventional schedules need an even horizon, got {horizon}"
        )));
    }
    if slot == 0 || slot > horizon {
        return Err(Error::config(format!("slot {slot} outside 1..={horizon}")));
    }
    match protocol {
        Protocol::ConvNoBuffer => Ok(slot % 2 == 0),
        Protocol::ConvBuffer => Ok(slot > horizon / 2),
        other => Err(Error::config(format!("{other} has no fixed schedule"))),
    }
}
