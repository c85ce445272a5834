//! Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for real `x > 0`.

use crate::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAX_TERMS: usize = 200;

/// `E1(x)` for `x > 0`.
///
/// Power series below 1, continued fraction above. Returns 0 once `e^{-x}/x`
/// underflows.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    check_domain(x)?;
    if x < 1.0 {
        Ok(series(x))
    } else {
        Ok(continued_fraction(x) * (-x).exp())
    }
}

/// `e^x E1(x)` for `x > 0`, without forming `e^x` for large arguments.
///
/// Every closed form in this crate carries the product `exp(c) E1(c)`, which
/// overflows/underflows separately for large `c` but is itself ~`1/c`.
pub fn exp_integral_e1_scaled(x: f64) -> Result<f64> {
    check_domain(x)?;
    if x < 1.0 {
        Ok(x.exp() * series(x))
    } else {
        Ok(continued_fraction(x))
    }
}

/// `e^shift · E1(x)` evaluated as `exp(shift - x) · e^x E1(x)`.
pub(crate) fn exp_e1(shift: f64, x: f64) -> Result<f64> {
    let scaled = exp_integral_e1_scaled(x)?;
    if scaled == 0.0 {
        return Ok(0.0);
    }
    Ok((shift - x).exp() * scaled)
}

fn check_domain(x: f64) -> Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("E1 requires x > 0, got {x}")))
    }
}

/// `-γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)`.
pub(crate) fn series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..MAX_TERMS {
        let k = k as f64;
        term *= -x / k;
        let delta = term / k;
        sum += delta;
        if delta.abs() < sum.abs() * EPS {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Modified Lentz evaluation of the continued fraction for `e^x E1(x)`.
pub(crate) fn continued_fraction(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    let mut b = x + 1.0;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
