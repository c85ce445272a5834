//! Moments and bounds for the starved-buffer protocol (`F(x) = x`,
//! Rayleigh links).

use super::{check_mean, check_rho, threshold};
use crate::special::{integrate_semi_infinite_scaled, QuadratureSpec};
use crate::{capacity_bits, Error, Result};

/// First and second moments of the bits entering and leaving the queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayMoments {
    /// `E{(1−d) S}`
    pub m_s1: f64,
    /// `E{d R}`
    pub m_r1: f64,
    /// `E{(1−d) S²}`
    pub m_s2: f64,
    /// `E{d R²}`
    pub m_r2: f64,
    /// Load `m_s1 / m_r1`.
    pub xi: f64,
}

/// Moments at threshold `rho`.
///
/// The second moments integrate over the decision region in closed form
/// first: `Pr{d = 0 | s} = 1 − e^{−ρs/Ω_R}` and
/// `Pr{d = 1 | r} = 1 − e^{−r/(ρΩ_S)}`, leaving one integral each.
pub fn delay_moments(rho: f64, omega_s: f64, omega_r: f64, spec: &QuadratureSpec) -> Result<DelayMoments> {
    check_rho(rho)?;
    check_mean("omega_s", omega_s)?;
    check_mean("omega_r", omega_r)?;
    let (m_s1, m_r1) = first_moments(rho, omega_s, omega_r)?;
    let m_s2 = integrate_semi_infinite_scaled(
        |s| {
            let c = capacity_bits(s);
            c * c * (-s / omega_s).exp() / omega_s * -(-rho * s / omega_r).exp_m1()
        },
        0.0,
        omega_s,
        spec,
    )?;
    let m_r2 = integrate_semi_infinite_scaled(
        |r| {
            let c = capacity_bits(r);
            c * c * (-r / omega_r).exp() / omega_r * -(-r / (rho * omega_s)).exp_m1()
        },
        0.0,
        omega_r,
        spec,
    )?;
    Ok(assemble(m_s1, m_r1, m_s2, m_r2))
}

/// Same moments with the second ones as printed double integrals
/// `∫ f_r ∫_{r/ρ}^∞ S² f_s ds dr` and `∫ f_s ∫_{ρs}^∞ R² f_r dr ds`.
pub fn delay_moments_nested(
    rho: f64,
    omega_s: f64,
    omega_r: f64,
    spec: &QuadratureSpec,
) -> Result<DelayMoments> {
    check_rho(rho)?;
    check_mean("omega_s", omega_s)?;
    check_mean("omega_r", omega_r)?;
    let (m_s1, m_r1) = first_moments(rho, omega_s, omega_r)?;
    let inner_spec = spec.tightened(10.0);
    let squared_tail = |lower: f64, omega: f64| {
        integrate_semi_infinite_scaled(
            |x| {
                let c = capacity_bits(x);
                c * c * (-x / omega).exp() / omega
            },
            lower,
            omega,
            &inner_spec,
        )
    };
    let failure = std::cell::Cell::new(None);
    let outer = |lower: f64, omega_inner: f64, y: f64, omega_outer: f64| -> f64 {
        match squared_tail(lower, omega_inner) {
            Ok(v) => v * (-y / omega_outer).exp() / omega_outer,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let m_s2 = integrate_semi_infinite_scaled(
        |r| outer(r / rho, omega_s, r, omega_r),
        0.0,
        omega_r,
        spec,
    )?;
    let m_r2 = integrate_semi_infinite_scaled(
        |s| outer(rho * s, omega_r, s, omega_s),
        0.0,
        omega_s,
        spec,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(assemble(m_s1, m_r1, m_s2, m_r2))
}

fn first_moments(rho: f64, omega_s: f64, omega_r: f64) -> Result<(f64, f64)> {
    Ok((
        threshold::rayleigh_identity_side(omega_s, omega_r, rho)?,
        threshold::rayleigh_identity_side(omega_r, omega_s, 1.0 / rho)?,
    ))
}

fn assemble(m_s1: f64, m_r1: f64, m_s2: f64, m_r2: f64) -> DelayMoments {
    DelayMoments {
        m_s1,
        m_r1,
        m_s2,
        m_r2,
        xi: m_s1 / m_r1,
    }
}

/// Upper bound on the mean per-bit delay in slots:
/// `½ (1/m_s1) (m_s2 + ξ(2−ξ) m_r2) / (m_r1 − m_s1)`.
pub fn delay_upper_bound(m: &DelayMoments) -> Result<f64> {
    if !(m.m_s1 > 0.0) {
        return Err(Error::domain("delay bound needs a positive arrival rate"));
    }
    if !(m.xi < 1.0) {
        return Err(Error::domain(format!(
            "delay bound needs load xi < 1, got {}",
            m.xi
        )));
    }
    let xi = m.xi;
    Ok(0.5 / m.m_s1 * (m.m_s2 + xi * (2.0 - xi) * m.m_r2) / (m.m_r1 - m.m_s1))
}

/// Markov bound `Pr{Q > Q_max} ≤ min(1, E{Q}/Q_max)`.
pub fn drop_probability_bound(mean_queue: f64, q_max: f64) -> Result<f64> {
    if !(q_max > 0.0) {
        return Err(Error::domain(format!("q_max must be positive, got {q_max}")));
    }
    if !(mean_queue >= 0.0) {
        return Err(Error::domain(format!(
            "mean queue must be non-negative, got {mean_queue}"
        )));
    }
    Ok((mean_queue / q_max).min(1.0))
}

/// Throughput floor of a starved, finite buffer:
/// `m_s1 (1 − min(1, E{Q}/Q_max))`.
pub fn starved_throughput_lower_bound(m_s1: f64, mean_queue: f64, q_max: f64) -> Result<f64> {
    Ok(m_s1 * (1.0 - drop_probability_bound(mean_queue, q_max)?))
}
