//! Root finders that turn the balance conditions of [`crate::closed_form`]
//! into operating points.

use serde::Serialize;

use crate::channel::FadingModel;
use crate::closed_form::{
    delay_moments, delay_upper_bound, pa_residuals, tau_max, threshold_residual, DelayMoments,
    PaResiduals,
};
use crate::policy::DecisionFunction;
use crate::special::{brent, expand_bracket_geometric, QuadratureSpec, RootTolerance};
use crate::{Error, Result};

/// Largest residual magnitude accepted as a root.
pub const RESIDUAL_TOL: f64 = 1e-7;

const RHO_START: (f64, f64) = (0.01, 100.0);
const RHO_LIMITS: (f64, f64) = (1e-6, 1e6);
const LAMBDA_START: (f64, f64) = (1e-4, 1e2);
const LAMBDA_LIMITS: (f64, f64) = (1e-12, 1e6);
const EXPANSION: f64 = 10.0;

/// An operating point and how it was reached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverResult {
    pub rho: f64,
    pub lambda: Option<f64>,
    /// Throughput at the operating point, bits/slot.
    pub tau: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SolverResult {
    fn new(rho: f64, lambda: Option<f64>, tau: f64, residuals: Vec<f64>, iterations: usize) -> Self {
        let converged = residuals.iter().all(|r| r.abs() < RESIDUAL_TOL);
        SolverResult {
            rho,
            lambda,
            tau,
            residuals,
            iterations,
            converged,
        }
    }
}

fn root_tolerance() -> RootTolerance {
    RootTolerance {
        f_tol: 1e-10,
        x_tol: 1e-13,
        max_iter: 200,
    }
}

/// Solves `F(t) = 0` for `t = ln x`, expanding the starting bracket
/// geometrically.
fn solve_log<F>(
    mut f: F,
    start: (f64, f64),
    limits: (f64, f64),
    tol: &RootTolerance,
) -> Result<(f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (lo, hi, _, _) = expand_bracket_geometric(
        |x: f64| f(x.ln()),
        start.0,
        start.1,
        EXPANSION,
        limits.0,
        limits.1,
    )?;
    let root = brent(f, lo.ln(), hi.ln(), tol)?;
    Ok((root.x.exp(), root.iterations))
}

/// Threshold that balances arrivals and departures, and the throughput
/// there.
pub fn solve_rho_opt(
    f: DecisionFunction,
    model_s: &FadingModel,
    model_r: &FadingModel,
    spec: &QuadratureSpec,
) -> Result<SolverResult> {
    let residual = |t: f64| threshold_residual(f, t.exp(), model_s, model_r, spec);
    let (rho, iterations) = solve_log(residual, RHO_START, RHO_LIMITS, &root_tolerance())
        .map_err(|e| match e {
            Error::Bracket(msg) => Error::Bracket(format!(
                "threshold residual keeps its sign over [{:e}, {:e}]: {msg}",
                RHO_LIMITS.0, RHO_LIMITS.1
            )),
            other => other,
        })?;
    let value = threshold_residual(f, rho, model_s, model_r, spec)?;
    let tau = tau_max(f, rho, model_s, model_r, spec)?;
    Ok(SolverResult::new(rho, None, tau, vec![value], iterations))
}

/// Water level meeting the power budget at threshold `rho`.
pub fn solve_lambda_for_power(
    rho: f64,
    model_hs: &FadingModel,
    model_hr: &FadingModel,
    gamma_bar: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, PaResiduals)> {
    let tol = RootTolerance {
        f_tol: 1e-10 * gamma_bar.min(1.0),
        x_tol: 1e-14,
        max_iter: 200,
    };
    // mean power falls with λ; compare on a log scale
    let residual = |t: f64| -> Result<f64> {
        let p = pa_residuals(t.exp(), rho, model_hs, model_hr, gamma_bar, spec)?;
        Ok(p.power)
    };
    let (lambda, _) = solve_log(residual, LAMBDA_START, LAMBDA_LIMITS, &tol)?;
    let p = pa_residuals(lambda, rho, model_hs, model_hr, gamma_bar, spec)?;
    Ok((lambda, p))
}

/// Joint optimum `(λ, ρ)` of link selection with power allocation.
///
/// For each trial ρ the power condition is solved for λ; the rate
/// condition is then driven to zero in ρ. If the nested search fails the
/// grid search of [`solve_lambda_rho_grid`] is used instead.
pub fn solve_lambda_rho(
    model_hs: &FadingModel,
    model_hr: &FadingModel,
    gamma_bar: f64,
    spec: &QuadratureSpec,
) -> Result<SolverResult> {
    match solve_lambda_rho_nested(model_hs, model_hr, gamma_bar, spec) {
        Ok(r) if r.converged => Ok(r),
        _ => solve_lambda_rho_grid(model_hs, model_hr, gamma_bar, spec),
    }
}

/// The nested search alone.
pub fn solve_lambda_rho_nested(
    model_hs: &FadingModel,
    model_hr: &FadingModel,
    gamma_bar: f64,
    spec: &QuadratureSpec,
) -> Result<SolverResult> {
    if !(gamma_bar > 0.0) || !gamma_bar.is_finite() {
        return Err(Error::domain(format!("gamma_bar must be positive, got {gamma_bar}")));
    }
    let mut inner_calls = 0;
    let rate = |t: f64| -> Result<f64> {
        inner_calls += 1;
        let (_, p) = solve_lambda_for_power(t.exp(), model_hs, model_hr, gamma_bar, spec)?;
        Ok(p.rate)
    };
    let (rho, outer) = solve_log(rate, RHO_START, RHO_LIMITS, &root_tolerance())?;
    let (lambda, p) = solve_lambda_for_power(rho, model_hs, model_hr, gamma_bar, spec)?;
    Ok(SolverResult::new(
        rho,
        Some(lambda),
        p.tau,
        vec![p.rate, p.power],
        outer + inner_calls,
    ))
}

/// Coarse grid over `(ln λ, ln ρ)` followed by damped Newton steps with a
/// finite-difference Jacobian.
pub fn solve_lambda_rho_grid(
    model_hs: &FadingModel,
    model_hr: &FadingModel,
    gamma_bar: f64,
    spec: &QuadratureSpec,
) -> Result<SolverResult> {
    if !(gamma_bar > 0.0) || !gamma_bar.is_finite() {
        return Err(Error::domain(format!("gamma_bar must be positive, got {gamma_bar}")));
    }
    let eval = |x: [f64; 2]| -> Result<PaResiduals> {
        pa_residuals(x[0].exp(), x[1].exp(), model_hs, model_hr, gamma_bar, spec)
    };
    // rate in bits/slot, power relative to the budget
    let scaled = |p: &PaResiduals| [p.rate, p.power / gamma_bar];
    let merit = |r: [f64; 2]| r[0] * r[0] + r[1] * r[1];

    const N: usize = 25;
    let span = |lo: f64, hi: f64, i: usize| lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (N - 1) as f64;
    let lambda_range = (1e-5, 1e3);
    let rho_range = (1e-3, 1e3);
    let mut best: Option<([f64; 2], f64)> = None;
    for i in 0..N {
        for j in 0..N {
            let x = [span(lambda_range.0, lambda_range.1, i), span(rho_range.0, rho_range.1, j)];
            if let Ok(p) = eval(x) {
                let m = merit(scaled(&p));
                if m.is_finite() && best.is_none_or(|(_, b)| m < b) {
                    best = Some((x, m));
                }
            }
        }
    }
    let (mut x, _) = best.ok_or_else(|| Error::NoConvergence("grid search found no finite point".into()))?;
    let mut p = eval(x)?;
    let h = 1e-6;
    for iter in 1..=100 {
        let r = scaled(&p);
        if p.rate.abs() < 0.1 * RESIDUAL_TOL && p.power.abs() < 0.1 * RESIDUAL_TOL {
            return Ok(SolverResult::new(
                x[1].exp(),
                Some(x[0].exp()),
                p.tau,
                vec![p.rate, p.power],
                N * N + iter,
            ));
        }
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut xk = x;
            xk[k] += h;
            let rk = scaled(&eval(xk)?);
            jac[0][k] = (rk[0] - r[0]) / h;
            jac[1][k] = (rk[1] - r[1]) / h;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let step = [
            -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        let m0 = merit(r);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-6 {
            let trial = [x[0] + t * step[0].clamp(-2.0, 2.0), x[1] + t * step[1].clamp(-2.0, 2.0)];
            if let Ok(pt) = eval(trial) {
                if merit(scaled(&pt)) < m0 {
                    x = trial;
                    p = pt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let result = SolverResult::new(x[1].exp(), Some(x[0].exp()), p.tau, vec![p.rate, p.power], N * N + 100);
    if result.converged {
        Ok(result)
    } else {
        Err(Error::NoConvergence(format!(
            "grid search stalled at lambda = {:e}, rho = {:e} (residuals {:e}, {:e})",
            x[0].exp(),
            x[1].exp(),
            p.rate,
            p.power
        )))
    }
}

/// Moments and bound at one threshold, `F(x) = x` and Rayleigh links.
pub fn delay_point(rho: f64, omega_s: f64, omega_r: f64, spec: &QuadratureSpec) -> Result<(DelayMoments, f64)> {
    let m = delay_moments(rho, omega_s, omega_r, spec)?;
    let bound = delay_upper_bound(&m)?;
    Ok((m, bound))
}

/// Threshold below `ρ_opt` whose delay bound equals `target_delay`, found
/// by bisection-type search in `ln ρ`. The reported throughput is the
/// arrival rate `E{(1−d) S}`.
pub fn solve_rho_for_delay(
    target_delay: f64,
    omega_s: f64,
    omega_r: f64,
    spec: &QuadratureSpec,
) -> Result<SolverResult> {
    if !(target_delay > 0.0) || !target_delay.is_finite() {
        return Err(Error::domain(format!("delay target must be positive, got {target_delay}")));
    }
    let (rho_opt, t_hi, t_lo) = starved_range(omega_s, omega_r, spec)?;
    let excess = |t: f64| -> Result<f64> {
        let (_, bound) = delay_point(t.exp(), omega_s, omega_r, spec)?;
        Ok((bound / target_delay).ln())
    };
    let low = excess(t_lo)?;
    if low > 0.0 {
        let (_, min_bound) = delay_point(t_lo.exp(), omega_s, omega_r, spec)?;
        return Err(Error::Infeasible {
            target: target_delay,
            reason: format!(
                "the delay bound is at least {min_bound:.6} slots for every rho in \
                 [{:e}, {rho_opt:e}]",
                t_lo.exp()
            ),
        });
    }
    let root = brent(excess, t_lo, t_hi, &root_tolerance())?;
    let rho = root.x.exp();
    let (m, bound) = delay_point(rho, omega_s, omega_r, spec)?;
    Ok(SolverResult::new(
        rho,
        None,
        m.m_s1,
        vec![bound / target_delay - 1.0],
        root.iterations,
    ))
}

/// Threshold at which the load `m_s1/m_r1` equals `xi ∈ (0, 1)`.
pub fn rho_for_load(xi: f64, omega_s: f64, omega_r: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::domain(format!("load must lie in (0, 1), got {xi}")));
    }
    let (_, t_hi, t_lo) = starved_range(omega_s, omega_r, spec)?;
    let excess = |t: f64| -> Result<f64> {
        let m = delay_moments(t.exp(), omega_s, omega_r, spec)?;
        Ok((m.xi / xi).ln())
    };
    let root = brent(excess, t_lo, t_hi, &root_tolerance())?;
    Ok(root.x.exp())
}

/// `(ρ_opt, ln ρ just below ρ_opt, ln of the smallest ρ searched)`.
fn starved_range(omega_s: f64, omega_r: f64, spec: &QuadratureSpec) -> Result<(f64, f64, f64)> {
    let ms = FadingModel::rayleigh(omega_s)?;
    let mr = FadingModel::rayleigh(omega_r)?;
    let opt = solve_rho_opt(DecisionFunction::Identity, &ms, &mr, spec)?;
    let t_hi = opt.rho.ln() + (-1e-9f64).ln_1p();
    let t_lo = (opt.rho * 1e-6).ln();
    Ok((opt.rho, t_hi, t_lo))
}
