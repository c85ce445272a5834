//! Bracketed scalar root finding.

use crate::{Error, Result};

/// Stopping rule for [`brent`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootTolerance {
    /// Stop once `|f(x)|` falls below this.
    pub f_tol: f64,
    /// Stop once the bracket is narrower than `x_tol·(1 + |x|)`.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for RootTolerance {
    fn default() -> Self {
        RootTolerance {
            f_tol: 1e-10,
            x_tol: 1e-13,
            max_iter: 200,
        }
    }
}

/// Outcome of a bracketed search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Brent's method on `[a, b]`, which must bracket a sign change.
///
/// Errors from `f` are propagated unchanged.
pub fn brent<F>(mut f: F, a: f64, b: f64, tol: &RootTolerance) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket(format!(
            "f({a}) = {fa:e} and f({b}) = {fb:e} have the same sign"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let x_tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.x_tol * (1.0 + b.abs());
        let m = 0.5 * (c - b);
        if fb.abs() <= tol.f_tol || m.abs() <= x_tol {
            return Ok(Root { x: b, fx: fb, iterations: iter });
        }
        if e.abs() >= x_tol && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, or secant when a == c
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (x_tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > x_tol { d } else { x_tol.copysign(m) };
        fb = f(b)?;
        if fb.is_nan() {
            return Err(Error::domain(format!("function is NaN at {b}")));
        }
    }
    Err(Error::NoConvergence(format!(
        "Brent iteration stalled after {} steps at x = {b}, f = {fb:e}",
        tol.max_iter
    )))
}

/// Widens `[lo, hi]` geometrically (`lo /= factor`, `hi *= factor`) until
/// `f` changes sign, stopping at `[min, max]`. Returns the bracket and the
/// function values at its ends.
pub fn expand_bracket_geometric<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    factor: f64,
    min: f64,
    max: f64,
) -> Result<(f64, f64, f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo)?;
    let mut fhi = f(hi)?;
    loop {
        if flo.signum() != fhi.signum() || flo == 0.0 || fhi == 0.0 {
            return Ok((lo, hi, flo, fhi));
        }
        let can_lo = lo > min;
        let can_hi = hi < max;
        if !can_lo && !can_hi {
            return Err(Error::Bracket(format!(
                "no sign change on [{lo:e}, {hi:e}] (f = {flo:e}, {fhi:e})"
            )));
        }
        if can_lo {
            lo = (lo / factor).max(min);
            flo = f(lo)?;
        }
        if can_hi {
            hi = (hi * factor).min(max);
            fhi = f(hi)?;
        }
    }
}
