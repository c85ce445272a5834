//! Flow balance of the fixed-power threshold rule.
//!
//! With `d = 1` iff `F(r) ≥ ρF(s)`, the arrival rate is
//! `A(ρ) = E{(1−d) S}` and the departure rate `D(ρ) = E{d R}`. The optimal
//! threshold balances the two; `D` at that point is the maximal throughput.

use super::{check_rho, g, INV_LN2};
use crate::channel::FadingModel;
use crate::policy::DecisionFunction;
use crate::special::{exp_e1, integrate_semi_infinite_scaled, QuadratureSpec};
use crate::{capacity_bits, Result};

/// Balance of arrivals and departures at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResidual {
    /// `A − D` in bits/slot; increasing in ρ.
    pub value: f64,
    /// `A = E{(1−d) S}`.
    pub arrival: f64,
    /// `D = E{d R}`, the throughput when the queue does not run dry.
    pub throughput: f64,
}

/// `A(ρ)` and `D(ρ)` by the cheapest available route.
pub fn threshold_balance(
    f: DecisionFunction,
    rho: f64,
    model_s: &FadingModel,
    model_r: &FadingModel,
    spec: &QuadratureSpec,
) -> Result<ThresholdResidual> {
    Ok(balance(
        arrival_rate(f, rho, model_s, model_r, spec)?,
        tau_max(f, rho, model_s, model_r, spec)?,
    ))
}

/// `A(ρ) − D(ρ)`.
pub fn threshold_residual(
    f: DecisionFunction,
    rho: f64,
    model_s: &FadingModel,
    model_r: &FadingModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(threshold_balance(f, rho, model_s, model_r, spec)?.value)
}

/// `A(ρ) = E{(1−d) S}`.
pub fn arrival_rate(
    f: DecisionFunction,
    rho: f64,
    model_s: &FadingModel,
    model_r: &FadingModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_rho(rho)?;
    let rayleigh = model_s.is_rayleigh() && model_r.is_rayleigh();
    match f {
        DecisionFunction::Identity if rayleigh => {
            rayleigh_identity_side(model_s.mean(), model_r.mean(), rho)
        }
        DecisionFunction::LogCapacity if rayleigh => {
            rayleigh_log_side(model_s.mean(), model_r.mean(), 1.0 / rho, spec)
        }
        _ => nested_side(model_s, model_r, |r| f.source_limit(r, rho), spec),
    }
}

/// `D(ρ) = E{d R}`: the throughput at threshold ρ, maximal at the balance
/// point.
pub fn tau_max(
    f: DecisionFunction,
    rho: f64,
    model_s: &FadingModel,
    model_r: &FadingModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_rho(rho)?;
    let rayleigh = model_s.is_rayleigh() && model_r.is_rayleigh();
    match f {
        DecisionFunction::Identity if rayleigh => {
            rayleigh_identity_side(model_r.mean(), model_s.mean(), 1.0 / rho)
        }
        DecisionFunction::LogCapacity if rayleigh => {
            rayleigh_log_side(model_r.mean(), model_s.mean(), rho, spec)
        }
        _ => nested_side(model_r, model_s, |s| f.relay_limit(s, rho), spec),
    }
}

/// Both sides by nested quadrature, whatever the models.
pub fn threshold_balance_nested(
    f: DecisionFunction,
    rho: f64,
    model_s: &FadingModel,
    model_r: &FadingModel,
    spec: &QuadratureSpec,
) -> Result<ThresholdResidual> {
    check_rho(rho)?;
    let a = nested_side(model_s, model_r, |r| f.source_limit(r, rho), spec)?;
    let d = nested_side(model_r, model_s, |s| f.relay_limit(s, rho), spec)?;
    Ok(balance(a, d))
}

fn balance(arrival: f64, throughput: f64) -> ThresholdResidual {
    ThresholdResidual {
        value: arrival - throughput,
        arrival,
        throughput,
    }
}

/// `E{log2(1+x); k·x > y}` for independent exponentials `x` (mean `own`)
/// and `y` (mean `other`):
/// `(1/ln 2)[g(1/own) − w·g(1/own + k/other)]` with `w = 1/(1 + k·own/other)`.
pub(super) fn rayleigh_identity_side(own: f64, other: f64, k: f64) -> Result<f64> {
    let ratio = k * own / other;
    let w = 1.0 / (1.0 + ratio);
    Ok(INV_LN2 * (g(1.0 / own)? - w * g(1.0 / own + k / other)?))
}

/// `E{log2(1+x); ln(1+x) > e·ln(1+y)}`, with the inner integral over `x`
/// in closed form: `∫_L^∞ ln(1+x) e^{−x/Ω}/Ω dx
/// = e^{−L/Ω} ln(1+L) + e^{1/Ω} E1((1+L)/Ω)`.
fn rayleigh_log_side(own: f64, other: f64, exponent: f64, spec: &QuadratureSpec) -> Result<f64> {
    let inner = |y: f64| -> f64 {
        let log_limit = exponent * y.ln_1p();
        let limit = log_limit.exp_m1();
        let head = (-limit / own).exp();
        if head == 0.0 {
            return 0.0;
        }
        let tail = exp_e1(1.0 / own, (1.0 + limit) / own).unwrap_or(0.0);
        (head * log_limit + tail) * (-y / other).exp() / other
    };
    Ok(INV_LN2 * integrate_semi_infinite_scaled(inner, 0.0, other, spec)?)
}

/// `∫ f_other(y) ∫_{limit(y)}^∞ log2(1+x) f_own(x) dx dy`.
fn nested_side<L>(
    own: &FadingModel,
    other: &FadingModel,
    limit: L,
    spec: &QuadratureSpec,
) -> Result<f64>
where
    L: Fn(f64) -> f64,
{
    let inner_spec = spec.tightened(10.0);
    let failure = std::cell::Cell::new(None);
    let outer = |y: f64| -> f64 {
        let weight = other.density(y);
        let lo = limit(y);
        if weight == 0.0 || !lo.is_finite() {
            return 0.0;
        }
        match integrate_semi_infinite_scaled(
            |x| capacity_bits(x) * own.density(x),
            lo,
            own.mean(),
            &inner_spec,
        ) {
            Ok(v) => v * weight,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let value = integrate_semi_infinite_scaled(outer, 0.0, other.mean(), spec)?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::exp_integral_e1;

    const ID: DecisionFunction = DecisionFunction::Identity;
    const LOG: DecisionFunction = DecisionFunction::LogCapacity;

    fn tight() -> QuadratureSpec {
        QuadratureSpec::new(1e-12, 1e-11, 4000).unwrap()
    }

    fn ray(m: f64) -> FadingModel {
        FadingModel::rayleigh(m).unwrap()
    }

    fn symmetric_tau(omega: f64) -> f64 {
        let e = |x: f64| x.exp() * exp_integral_e1(x).unwrap();
        INV_LN2 * (e(1.0 / omega) - 0.5 * e(2.0 / omega))
    }

    #[test]
    fn symmetric_links_balance_at_unity() {
        for &omega in &[0.5, 1.0, 4.0] {
            for f in [ID, LOG] {
                let b = threshold_balance(f, 1.0, &ray(omega), &ray(omega), &tight()).unwrap();
                assert!(b.value.abs() < 1e-10, "{f} {omega}: {}", b.value);
                assert!((b.throughput - symmetric_tau(omega)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn residual_limits_have_opposite_signs() {
        let (s, r) = (ray(1.0), ray(2.0));
        for f in [ID, LOG] {
            let lo = threshold_residual(f, 1e-4, &s, &r, &tight()).unwrap();
            let hi = threshold_residual(f, 1e4, &s, &r, &tight()).unwrap();
            assert!(lo < 0.0 && hi > 0.0, "{f}: {lo} {hi}");
        }
        // ρ → 0: everything goes to the relay, residual → −E{R}
        let e_r = INV_LN2 * g(0.5).unwrap();
        let lo = threshold_residual(ID, 1e-9, &s, &r, &tight()).unwrap();
        assert!((lo + e_r).abs() < 1e-6);
    }

    #[test]
    fn nested_path_agrees_with_closed_forms() {
        let spec = QuadratureSpec::new(1e-11, 1e-10, 4000).unwrap();
        for &(os, or, rho) in &[(1.0, 2.0, 0.7), (0.3, 5.0, 3.0)] {
            for f in [ID, LOG] {
                let fast = threshold_balance(f, rho, &ray(os), &ray(or), &spec).unwrap();
                let slow = threshold_balance_nested(f, rho, &ray(os), &ray(or), &spec).unwrap();
                assert!((fast.arrival - slow.arrival).abs() < 1e-6, "{f} A");
                assert!((fast.throughput - slow.throughput).abs() < 1e-6, "{f} D");
            }
        }
    }

    #[test]
    fn residual_is_monotone_on_a_grid() {
        let (s, r) = (ray(1.0), ray(3.0));
        for f in [ID, LOG] {
            let mut last = f64::NEG_INFINITY;
            for k in -30..=30 {
                let rho = 10f64.powf(k as f64 / 10.0);
                let v = threshold_residual(f, rho, &s, &r, &QuadratureSpec::default()).unwrap();
                assert!(v > last, "{f} at rho {rho}");
                last = v;
            }
        }
    }
}
