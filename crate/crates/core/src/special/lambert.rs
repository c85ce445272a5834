//! Real branches of the Lambert W function, the inverse of `w ↦ w·e^w`.

use std::f64::consts::E;

use crate::{Error, Result};

const INV_E: f64 = 1.0 / E;
const MAX_ITER: usize = 50;
/// Below this distance `p = sqrt(2(1 + e·x))` from the branch point the
/// series is used directly; its truncation error there is ~1e-18.
const SERIES_CUTOFF: f64 = 0.01;
/// Arguments this far below `-1/e` are treated as rounding noise on the
/// branch point itself.
const BRANCH_SLACK: f64 = 4.0 * f64::EPSILON * INV_E;

/// Real branch of `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// `W_0`, defined on `[-1/e, ∞)`, values `≥ -1`.
    Principal,
    /// `W_{-1}`, defined on `[-1/e, 0)`, values `≤ -1`.
    Lower,
}

/// `W_b(x)`: the `w` on branch `b` with `w·e^w = x`.
pub fn lambert_w(branch: Branch, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("Lambert W of NaN"));
    }
    let offset = x + INV_E;
    if offset < -BRANCH_SLACK {
        return Err(Error::domain(format!("Lambert W requires x >= -1/e, got {x}")));
    }
    match branch {
        Branch::Principal => {
            if x == f64::INFINITY {
                return Ok(f64::INFINITY);
            }
            if x == 0.0 {
                return Ok(0.0);
            }
        }
        Branch::Lower => {
            if x >= 0.0 {
                return Err(Error::domain(format!(
                    "lower Lambert W branch requires x < 0, got {x}"
                )));
            }
        }
    }
    if offset <= 0.0 {
        return Ok(-1.0);
    }
    let p = (2.0 * E * offset).sqrt();
    if p < SERIES_CUTOFF {
        return Ok(branch_series(branch, p));
    }
    Ok(halley(x, initial_guess(branch, x, p)))
}

/// `W_b(x)` for `x = -e^{-1-c}`, `c ≥ 0`, given `c` rather than `x`.
///
/// Near the branch point `x + 1/e` loses all its digits to cancellation;
/// here `1 + e·x = -expm1(-c)` is formed exactly, which keeps the
/// square-root behaviour of `W` resolved down to `c ~ 1e-300`.
pub fn lambert_w_of_neg_exp(branch: Branch, c: f64) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::domain(format!("expected c >= 0, got {c}")));
    }
    let x = -(-1.0 - c).exp();
    if x == 0.0 {
        // W_0(x) ≈ x once |x| underflows; W_{-1} diverges.
        return match branch {
            Branch::Principal => Ok(-0.0),
            Branch::Lower => Ok(f64::NEG_INFINITY),
        };
    }
    let p = (-2.0 * (-c).exp_m1()).sqrt();
    if p < SERIES_CUTOFF {
        return Ok(branch_series(branch, p));
    }
    Ok(halley(x, initial_guess(branch, x, p)))
}

/// Expansion of `W` about `-1/e` in `p = ±sqrt(2(1 + e·x))`.
fn branch_series(branch: Branch, p: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        -1.0,
        1.0,
        -1.0 / 3.0,
        11.0 / 72.0,
        -43.0 / 540.0,
        769.0 / 17280.0,
        -221.0 / 8505.0,
        680_863.0 / 43_545_600.0,
    ];
    let p = match branch {
        Branch::Principal => p,
        Branch::Lower => -p,
    };
    COEFFS.iter().rev().fold(0.0, |acc, &c| acc * p + c)
}

fn initial_guess(branch: Branch, x: f64, p: f64) -> f64 {
    match branch {
        Branch::Principal => {
            if p < 0.5 {
                -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
            } else {
                // Winitzki
                let l = x.ln_1p();
                l * (1.0 - l.ln_1p() / (2.0 + l))
            }
        }
        Branch::Lower => {
            if p < 0.5 || x < -0.25 {
                -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p
            } else {
                let l1 = (-x).ln();
                let l2 = (-l1).ln();
                l1 - l2 + l2 / l1
            }
        }
    }
}

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    w
}
