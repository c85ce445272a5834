//! Analytic throughputs, optimality conditions and delay bounds.
//!
//! Rayleigh links get closed forms or one-dimensional quadrature; any other
//! [`FadingModel`](crate::channel::FadingModel) goes through nested
//! quadrature, the inner integral held to a tolerance ten times tighter than
//! the outer one.

mod baseline;
mod delay;
mod power;
mod threshold;

pub use baseline::{
    conv_buffer_pa_level, mean_capacity, tau_conv1_rayleigh, tau_conv2, tau_conv2_rayleigh,
    tau_conv_buffer_pa_rayleigh,
};
pub use delay::{
    delay_moments, delay_moments_nested, delay_upper_bound, drop_probability_bound,
    starved_throughput_lower_bound, DelayMoments,
};
pub use power::{pa_residuals, pa_residuals_nested, PaResiduals};
pub use threshold::{
    arrival_rate, tau_max, threshold_balance, threshold_balance_nested, threshold_residual,
    ThresholdResidual,
};

use std::f64::consts::LN_2;

use crate::special::exp_integral_e1_scaled;
use crate::{Error, Result};

/// `g(x) = e^x E1(x)`, the building block of every Rayleigh closed form.
fn g(x: f64) -> Result<f64> {
    exp_integral_e1_scaled(x)
}

fn check_mean(name: &str, omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {omega}")))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("rho must be positive, got {rho}")))
    }
}

const INV_LN2: f64 = 1.0 / LN_2;
