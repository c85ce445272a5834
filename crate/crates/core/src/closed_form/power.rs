//! Optimality conditions of joint link selection and power allocation.
//!
//! For a water level λ and threshold ρ the rate residual is
//! `E{(1−d) S} − E{d R}` and the power residual `E{(1−d)γ_S + dγ_R} − Γ`,
//! both under the selection rule of [`crate::policy::select_with_power`].
//! The crossing thresholds `L1(h_R)`, `L2(h_S)` split each link's inner
//! integral.

use super::{check_rho, INV_LN2};
use crate::channel::FadingModel;
use crate::policy::{l1_threshold, l2_threshold};
use crate::special::{
    exp_integral_e1, integrate, integrate_semi_infinite_scaled, QuadratureSpec,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaResiduals {
    /// `E{(1−d) S} − E{d R}` in bits/slot.
    pub rate: f64,
    /// `E{power} − Γ`.
    pub power: f64,
    /// `E{(1−d) S}`, the throughput once the rates balance.
    pub tau: f64,
    /// `E{d R}`.
    pub departure: f64,
    /// `E{power}`.
    pub mean_power: f64,
}

/// Both residuals; Rayleigh gains take the single-integral route.
pub fn pa_residuals(
    lambda: f64,
    rho: f64,
    model_hs: &FadingModel,
    model_hr: &FadingModel,
    gamma_bar: f64,
    spec: &QuadratureSpec,
) -> Result<PaResiduals> {
    check_inputs(lambda, rho, gamma_bar)?;
    let sums = if model_hs.is_rayleigh() && model_hr.is_rayleigh() {
        rayleigh_sums(lambda, rho, model_hs.mean(), model_hr.mean(), spec)?
    } else {
        nested_sums(lambda, rho, model_hs, model_hr, spec)?
    };
    Ok(sums.residuals(gamma_bar))
}

/// Both residuals by nested quadrature, for any gain models.
pub fn pa_residuals_nested(
    lambda: f64,
    rho: f64,
    model_hs: &FadingModel,
    model_hr: &FadingModel,
    gamma_bar: f64,
    spec: &QuadratureSpec,
) -> Result<PaResiduals> {
    check_inputs(lambda, rho, gamma_bar)?;
    Ok(nested_sums(lambda, rho, model_hs, model_hr, spec)?.residuals(gamma_bar))
}

fn check_inputs(lambda: f64, rho: f64, gamma_bar: f64) -> Result<()> {
    check_rho(rho)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    if !(gamma_bar > 0.0) || !gamma_bar.is_finite() {
        return Err(Error::domain(format!("gamma_bar must be positive, got {gamma_bar}")));
    }
    Ok(())
}

/// Expectations in natural-log units (rates) and normalized power.
struct Sums {
    arrival_nats: f64,
    departure_nats: f64,
    power: f64,
}

impl Sums {
    fn residuals(&self, gamma_bar: f64) -> PaResiduals {
        let tau = INV_LN2 * self.arrival_nats;
        let departure = INV_LN2 * self.departure_nats;
        PaResiduals {
            rate: tau - departure,
            power: self.power - gamma_bar,
            tau,
            departure,
            mean_power: self.power,
        }
    }
}

/// `∫_L^∞ ln(h/c) e^{−h/Ω}/Ω dh = e^{−L/Ω} ln(L/c) + E1(L/Ω)` and
/// `∫_L^∞ (1/c − 1/h) e^{−h/Ω}/Ω dh = e^{−L/Ω}/c − E1(L/Ω)/Ω`, for
/// `L ≥ c`; both vanish as `L → ∞`. With `c` the link's cutoff these are
/// the rate (in nats) and the water-filling power above `L`.
fn rayleigh_tail(limit: f64, c: f64, omega: f64) -> Result<(f64, f64)> {
    let x = limit / omega;
    let head = (-x).exp();
    if !limit.is_finite() || (head == 0.0 && x > 1.0) {
        return Ok((0.0, 0.0));
    }
    let e1 = exp_integral_e1(x)?;
    Ok((head * (limit / c).ln() + e1, head / c - e1 / omega))
}

fn rayleigh_sums(lambda: f64, rho: f64, os: f64, or: f64, spec: &QuadratureSpec) -> Result<Sums> {
    let cut_s = lambda / rho;
    let cut_r = lambda;
    let p_r_off = -(-cut_r / or).exp_m1();
    let p_s_off = -(-cut_s / os).exp_m1();

    // relay below its cutoff: the source transmits whenever it is on
    let (rate_s0, power_s0) = rayleigh_tail(cut_s, cut_s, os)?;
    let (rate_r0, power_r0) = rayleigh_tail(cut_r, cut_r, or)?;
    let mut arrival = p_r_off * rate_s0;
    let mut departure = p_s_off * rate_r0;
    let mut power = p_r_off * power_s0 + p_s_off * power_r0;

    let failure = std::cell::Cell::new(None);
    let record = |e: Error| {
        failure.set(Some(e));
        (0.0, 0.0)
    };
    // both on: source wins above L1(h_R), relay wins above L2(h_S)
    let source_side = |h_r: f64| -> (f64, f64) {
        match l1_threshold(h_r, lambda, rho).and_then(|l1| rayleigh_tail(l1, cut_s, os)) {
            Ok(v) => v,
            Err(e) => record(e),
        }
    };
    let relay_side = |h_s: f64| -> (f64, f64) {
        match l2_threshold(h_s, lambda, rho).and_then(|l2| rayleigh_tail(l2, cut_r, or)) {
            Ok(v) => v,
            Err(e) => record(e),
        }
    };
    let w_r = |h: f64| (-h / or).exp() / or;
    let w_s = |h: f64| (-h / os).exp() / os;
    arrival += integrate_semi_infinite_scaled(|h| source_side(h).0 * w_r(h), cut_r, or, spec)?;
    power += integrate_semi_infinite_scaled(|h| source_side(h).1 * w_r(h), cut_r, or, spec)?;
    departure += integrate_semi_infinite_scaled(|h| relay_side(h).0 * w_s(h), cut_s, os, spec)?;
    power += integrate_semi_infinite_scaled(|h| relay_side(h).1 * w_s(h), cut_s, os, spec)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(Sums {
        arrival_nats: arrival,
        departure_nats: departure,
        power,
    })
}

fn nested_sums(
    lambda: f64,
    rho: f64,
    hs: &FadingModel,
    hr: &FadingModel,
    spec: &QuadratureSpec,
) -> Result<Sums> {
    let inner_spec = spec.tightened(10.0);
    let cut_s = lambda / rho;
    let cut_r = lambda;

    // (∫_L^∞ ln(h/c) f dh, ∫_L^∞ (1/c − 1/h) f dh)
    let tail = |model: &FadingModel, limit: f64, c: f64| -> Result<(f64, f64)> {
        if !limit.is_finite() {
            return Ok((0.0, 0.0));
        }
        let rate = integrate_semi_infinite_scaled(
            |h| (h / c).ln() * model.density(h),
            limit,
            model.mean(),
            &inner_spec,
        )?;
        let power = integrate_semi_infinite_scaled(
            |h| (1.0 / c - 1.0 / h) * model.density(h),
            limit,
            model.mean(),
            &inner_spec,
        )?;
        Ok((rate, power))
    };

    let p_r_off = integrate(|h| hr.density(h), 0.0, cut_r, spec)?;
    let p_s_off = integrate(|h| hs.density(h), 0.0, cut_s, spec)?;
    let (rate_s0, power_s0) = tail(hs, cut_s, cut_s)?;
    let (rate_r0, power_r0) = tail(hr, cut_r, cut_r)?;
    let mut arrival = p_r_off * rate_s0;
    let mut departure = p_s_off * rate_r0;
    let mut power = p_r_off * power_s0 + p_s_off * power_r0;

    let failure = std::cell::Cell::new(None);
    let guarded = |v: Result<(f64, f64)>| match v {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            (0.0, 0.0)
        }
    };
    let source_side =
        |h_r: f64| guarded(l1_threshold(h_r, lambda, rho).and_then(|l| tail(hs, l, cut_s)));
    let relay_side =
        |h_s: f64| guarded(l2_threshold(h_s, lambda, rho).and_then(|l| tail(hr, l, cut_r)));
    arrival += integrate_semi_infinite_scaled(
        |h| source_side(h).0 * hr.density(h),
        cut_r,
        hr.mean(),
        spec,
    )?;
    power += integrate_semi_infinite_scaled(
        |h| source_side(h).1 * hr.density(h),
        cut_r,
        hr.mean(),
        spec,
    )?;
    departure += integrate_semi_infinite_scaled(
        |h| relay_side(h).0 * hs.density(h),
        cut_s,
        hs.mean(),
        spec,
    )?;
    power += integrate_semi_infinite_scaled(
        |h| relay_side(h).1 * hs.density(h),
        cut_s,
        hs.mean(),
        spec,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(Sums {
        arrival_nats: arrival,
        departure_nats: departure,
        power,
    })
}
