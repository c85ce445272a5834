//! Conventional two-hop baselines.

use super::{check_mean, g, INV_LN2};
use crate::channel::FadingModel;
use crate::special::{
    brent, exp_integral_e1, expand_bracket_geometric, integrate_semi_infinite_scaled,
    QuadratureSpec, RootTolerance,
};
use crate::{capacity_bits, Error, Result};

/// Relay without buffer: `½ E{min(S, R)}` for Rayleigh links,
/// `(1/(2 ln 2)) g(1/Ω_S + 1/Ω_R)`.
pub fn tau_conv1_rayleigh(omega_s: f64, omega_r: f64) -> Result<f64> {
    check_mean("omega_s", omega_s)?;
    check_mean("omega_r", omega_r)?;
    Ok(0.5 * INV_LN2 * g(1.0 / omega_s + 1.0 / omega_r)?)
}

/// Relay with an infinitely long half-and-half frame:
/// `½ min(E{S}, E{R})`.
pub fn tau_conv2_rayleigh(omega_s: f64, omega_r: f64) -> Result<f64> {
    check_mean("omega_s", omega_s)?;
    check_mean("omega_r", omega_r)?;
    Ok(0.5 * INV_LN2 * g(1.0 / omega_s)?.min(g(1.0 / omega_r)?))
}

/// `E{log2(1 + x)}` under `model`.
pub fn mean_capacity(model: &FadingModel, spec: &QuadratureSpec) -> Result<f64> {
    if model.is_rayleigh() {
        return Ok(INV_LN2 * g(1.0 / model.mean())?);
    }
    integrate_semi_infinite_scaled(
        |x| capacity_bits(x) * model.density(x),
        0.0,
        model.mean(),
        spec,
    )
}

/// `½ min(E{S}, E{R})` for arbitrary models.
pub fn tau_conv2(model_s: &FadingModel, model_r: &FadingModel, spec: &QuadratureSpec) -> Result<f64> {
    Ok(0.5 * mean_capacity(model_s, spec)?.min(mean_capacity(model_r, spec)?))
}

/// Cutoff `α` of single-link water-filling `γ = max(0, 1/α − 1/h)` with
/// `E{γ} = Γ` on a Rayleigh gain of mean `Ω̄`:
/// `e^{−α/Ω̄}/α − E1(α/Ω̄)/Ω̄ = Γ`.
pub fn conv_buffer_pa_level(omega_bar: f64, gamma_bar: f64) -> Result<f64> {
    check_mean("omega_bar", omega_bar)?;
    if !(gamma_bar > 0.0) || !gamma_bar.is_finite() {
        return Err(Error::domain(format!("gamma_bar must be positive, got {gamma_bar}")));
    }
    // mean power is decreasing in α; solve in t = ln(α/Ω̄)
    let residual = |t: f64| -> Result<f64> {
        let a = t.exp();
        let p = ((-a).exp() / a - exp_integral_e1(a)?) / omega_bar;
        Ok((p / gamma_bar).ln())
    };
    let (lo, hi, _, _) = expand_bracket_geometric(
        |u: f64| residual(u.ln()),
        1e-2,
        1e2,
        10.0,
        1e-300,
        600.0,
    )?;
    let tol = RootTolerance {
        f_tol: 1e-14,
        x_tol: 1e-15,
        max_iter: 200,
    };
    let root = brent(residual, lo.ln(), hi.ln(), &tol)?;
    Ok(omega_bar * root.x.exp())
}

/// Conventional buffered relaying with per-link water-filling, each link
/// meeting the average power `Γ` on its own:
/// `½ min_j E1(α_j/Ω̄_j)/ln 2`.
pub fn tau_conv_buffer_pa_rayleigh(omega_bar_s: f64, omega_bar_r: f64, gamma_bar: f64) -> Result<f64> {
    let rate = |omega: f64| -> Result<f64> {
        let alpha = conv_buffer_pa_level(omega, gamma_bar)?;
        Ok(INV_LN2 * exp_integral_e1(alpha / omega)?)
    };
    Ok(0.5 * rate(omega_bar_s)?.min(rate(omega_bar_r)?))
}
