//! C interface to `bufrelay`.
//!
//! Every fallible function returns a [`BrStatus`] and writes its result
//! through an out-pointer. On failure the out-pointer is left untouched and
//! a description is stored per thread, readable with
//! [`br_last_error_message`].
//!
//! Objects with state ([`BrSimConfig`], [`BrBuffer`]) are opaque handles
//! created by a `_new` function and released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use bufrelay::buffer::RelayBuffer;
use bufrelay::channel::FadingModel;
use bufrelay::closed_form::{tau_conv1_rayleigh, tau_conv2_rayleigh, threshold_balance};
use bufrelay::policy::{DecisionFunction, PolicySpec, Protocol};
use bufrelay::sim::{run, SimConfig};
use bufrelay::solver::{delay_point, solve_lambda_rho, solve_rho_for_delay, solve_rho_opt, SolverResult};
use bufrelay::special::{exp_integral_e1, lambert_w, Branch, QuadratureSpec};
use bufrelay::Error;

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Quadrature = 4,
    Bracket = 5,
    NoConvergence = 6,
    BranchResolution = 7,
    Infeasible = 8,
    Config = 9,
    Panic = 10,
}

/// Decision function `F` of the threshold rule.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrDecision {
    /// `F(x) = x`
    Identity = 0,
    /// `F(x) = log2(1 + x)`
    LogCapacity = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrBranch {
    /// `W0`, `W >= -1`.
    Principal = 0,
    /// `W-1`, `W <= -1`, defined on `[-1/e, 0)`.
    Lower = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrProtocol {
    ConvNoBuffer = 0,
    ConvBuffer = 1,
    AdaptiveFixed = 2,
    AdaptivePa = 3,
    Starved = 4,
    QueueLimited = 5,
}

/// Arrivals and departures at one threshold, bits/slot.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BrBalance {
    pub arrival: f64,
    pub throughput: f64,
    /// `arrival - throughput`
    pub residual: f64,
}

/// An operating point found by a solver. `lambda` is NaN when the problem
/// has no water level.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BrSolution {
    pub rho: f64,
    pub lambda: f64,
    pub tau: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
    pub iterations: u32,
    pub converged: bool,
}

/// Queue moments and the mean delay bound at one threshold.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BrDelayPoint {
    pub m_s1: f64,
    pub m_r1: f64,
    pub m_s2: f64,
    pub m_r2: f64,
    pub xi: f64,
    pub bound: f64,
}

/// Simulation statistics over the measured slots. Optional quantities are
/// NaN when undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BrMetrics {
    pub slots_measured: u64,
    pub throughput: f64,
    pub throughput_stderr: f64,
    pub arrival_rate: f64,
    pub admitted_rate: f64,
    pub mean_queue: f64,
    pub mean_delay_fifo: f64,
    pub mean_delay_little: f64,
    pub drop_prob: f64,
    pub overflow_event_prob: f64,
    pub mean_power: f64,
    pub source_slots: u64,
    pub relay_slots: u64,
    pub idle_slots: u64,
}

/// Opaque simulation configuration.
pub struct BrSimConfig {
    protocol: Protocol,
    decision: DecisionFunction,
    rho: f64,
    lambda: f64,
    gamma_bar: f64,
    q_max: f64,
    omega_s: f64,
    omega_r: f64,
    slots: u64,
    seed: u64,
    stream: u64,
    warmup: Option<u64>,
    frame: Option<u64>,
    overflow_threshold: Option<f64>,
}

/// Opaque FIFO relay buffer.
pub struct BrBuffer(RelayBuffer);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> BrStatus {
    match e {
        Error::Domain(_) => BrStatus::Domain,
        Error::Quadrature { .. } => BrStatus::Quadrature,
        Error::Bracket(_) => BrStatus::Bracket,
        Error::NoConvergence(_) => BrStatus::NoConvergence,
        Error::BranchResolution(_) => BrStatus::BranchResolution,
        Error::Infeasible { .. } => BrStatus::Infeasible,
        Error::Config(_) => BrStatus::Config,
    }
}

enum Failure {
    Status(BrStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(name: &str) -> Failure {
    Failure::Status(BrStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `f`, recording failures and panics in the thread's last error.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> BrStatus {
    set_error(String::new());
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BrStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(format!("internal panic: {msg}"));
            BrStatus::Panic
        }
    }
}

/// Writes `value` through `out`.
///
/// # Safety
/// `out` must be null or valid for writes of `T`.
unsafe fn put<T>(out: *mut T, name: &str, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn decision(d: BrDecision) -> DecisionFunction {
    match d {
        BrDecision::Identity => DecisionFunction::Identity,
        BrDecision::LogCapacity => DecisionFunction::LogCapacity,
    }
}

fn links(omega_s: f64, omega_r: f64) -> Result<(FadingModel, FadingModel), Failure> {
    Ok((FadingModel::rayleigh(omega_s)?, FadingModel::rayleigh(omega_r)?))
}

fn solution(r: &SolverResult) -> BrSolution {
    BrSolution {
        rho: r.rho,
        lambda: r.lambda.unwrap_or(f64::NAN),
        tau: r.tau,
        max_residual: r.residuals.iter().fold(0.0, |m: f64, x| m.max(x.abs())),
        iterations: u32::try_from(r.iterations).unwrap_or(u32::MAX),
        converged: r.converged,
    }
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length in bytes, excluding the terminator; 0 means no error.
///
/// # Safety
/// `buf` must be null or valid for writes of `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn br_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            buf.add(n).write(0);
        }
        msg.len()
    })
}

/// Exponential integral `E1(x)`, `x > 0`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_exp_integral_e1(x: f64, out: *mut f64) -> BrStatus {
    guard(|| put(out, "out", exp_integral_e1(x)?))
}

/// Lambert W on the chosen real branch.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_lambert_w(branch: BrBranch, x: f64, out: *mut f64) -> BrStatus {
    let branch = match branch {
        BrBranch::Principal => Branch::Principal,
        BrBranch::Lower => Branch::Lower,
    };
    guard(|| put(out, "out", lambert_w(branch, x)?))
}

/// Throughput of conventional relaying without a buffer, Rayleigh links.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_tau_conv1(omega_s: f64, omega_r: f64, out: *mut f64) -> BrStatus {
    guard(|| put(out, "out", tau_conv1_rayleigh(omega_s, omega_r)?))
}

/// Throughput of conventional relaying with an unlimited buffer, Rayleigh
/// links.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_tau_conv2(omega_s: f64, omega_r: f64, out: *mut f64) -> BrStatus {
    guard(|| put(out, "out", tau_conv2_rayleigh(omega_s, omega_r)?))
}

/// Arrival and departure rates of the threshold rule at `rho`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_threshold_balance(
    f: BrDecision,
    rho: f64,
    omega_s: f64,
    omega_r: f64,
    out: *mut BrBalance,
) -> BrStatus {
    guard(|| {
        let (ms, mr) = links(omega_s, omega_r)?;
        let b = threshold_balance(decision(f), rho, &ms, &mr, &QuadratureSpec::default())?;
        put(
            out,
            "out",
            BrBalance {
                arrival: b.arrival,
                throughput: b.throughput,
                residual: b.value,
            },
        )
    })
}

/// Throughput-optimal threshold with fixed powers.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_solve_rho_opt(
    f: BrDecision,
    omega_s: f64,
    omega_r: f64,
    out: *mut BrSolution,
) -> BrStatus {
    guard(|| {
        let (ms, mr) = links(omega_s, omega_r)?;
        let r = solve_rho_opt(decision(f), &ms, &mr, &QuadratureSpec::default())?;
        put(out, "out", solution(&r))
    })
}

/// Joint threshold and water level under average power `gamma_bar`, with
/// unit-power mean channel gains `omega_bar_s`, `omega_bar_r`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_solve_lambda_rho(
    omega_bar_s: f64,
    omega_bar_r: f64,
    gamma_bar: f64,
    out: *mut BrSolution,
) -> BrStatus {
    guard(|| {
        let (hs, hr) = links(omega_bar_s, omega_bar_r)?;
        let r = solve_lambda_rho(&hs, &hr, gamma_bar, &QuadratureSpec::default())?;
        put(out, "out", solution(&r))
    })
}

/// Queue moments and mean delay bound of the starved-buffer rule at `rho`
/// (`F(x) = x`).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_delay_bound(
    rho: f64,
    omega_s: f64,
    omega_r: f64,
    out: *mut BrDelayPoint,
) -> BrStatus {
    guard(|| {
        let (m, bound) = delay_point(rho, omega_s, omega_r, &QuadratureSpec::default())?;
        put(
            out,
            "out",
            BrDelayPoint {
                m_s1: m.m_s1,
                m_r1: m.m_r1,
                m_s2: m.m_s2,
                m_r2: m.m_r2,
                xi: m.xi,
                bound,
            },
        )
    })
}

/// Threshold whose delay bound equals `target`. Returns
/// `BR_STATUS_INFEASIBLE` when the target is below the smallest bound.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_solve_rho_for_delay(
    target: f64,
    omega_s: f64,
    omega_r: f64,
    out: *mut BrSolution,
) -> BrStatus {
    guard(|| {
        let r = solve_rho_for_delay(target, omega_s, omega_r, &QuadratureSpec::default())?;
        put(out, "out", solution(&r))
    })
}

/// New simulation of `slots` slots over Rayleigh links with mean SNRs (or
/// gains, for `BR_PROTOCOL_ADAPTIVE_PA`) `omega_s`, `omega_r`. Defaults:
/// `rho = 1`, log-capacity decision, unlimited buffer, seed 0.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_sim_config_new(
    protocol: BrProtocol,
    omega_s: f64,
    omega_r: f64,
    slots: u64,
    out: *mut *mut BrSimConfig,
) -> BrStatus {
    guard(|| {
        links(omega_s, omega_r)?;
        let protocol = match protocol {
            BrProtocol::ConvNoBuffer => Protocol::ConvNoBuffer,
            BrProtocol::ConvBuffer => Protocol::ConvBuffer,
            BrProtocol::AdaptiveFixed => Protocol::AdaptiveFixed,
            BrProtocol::AdaptivePa => Protocol::AdaptivePa,
            BrProtocol::Starved => Protocol::Starved,
            BrProtocol::QueueLimited => Protocol::QueueLimited,
        };
        let config = BrSimConfig {
            protocol,
            decision: DecisionFunction::LogCapacity,
            rho: 1.0,
            lambda: f64::NAN,
            gamma_bar: f64::NAN,
            q_max: f64::INFINITY,
            omega_s,
            omega_r,
            slots,
            seed: 0,
            stream: 0,
            warmup: None,
            frame: None,
            overflow_threshold: None,
        };
        put(out, "out", Box::into_raw(Box::new(config)))
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `config` must be null or come from [`br_sim_config_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn br_sim_config_free(config: *mut BrSimConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Applies `edit` to the configuration behind `config`.
///
/// # Safety
/// `config` must be null or a live handle.
unsafe fn edit_config(config: *mut BrSimConfig, edit: impl FnOnce(&mut BrSimConfig)) -> BrStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        edit(c);
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_sim_config_set_threshold(
    config: *mut BrSimConfig,
    f: BrDecision,
    rho: f64,
) -> BrStatus {
    edit_config(config, |c| {
        c.decision = decision(f);
        c.rho = rho;
    })
}

/// Water level and power budget of `BR_PROTOCOL_ADAPTIVE_PA`.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_sim_config_set_power(
    config: *mut BrSimConfig,
    lambda: f64,
    gamma_bar: f64,
) -> BrStatus {
    edit_config(config, |c| {
        c.lambda = lambda;
        c.gamma_bar = gamma_bar;
    })
}

/// Buffer size in bits; `INFINITY` for none.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_sim_config_set_q_max(config: *mut BrSimConfig, q_max: f64) -> BrStatus {
    edit_config(config, |c| c.q_max = q_max)
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_sim_config_set_seed(config: *mut BrSimConfig, seed: u64, stream: u64) -> BrStatus {
    edit_config(config, |c| {
        c.seed = seed;
        c.stream = stream;
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_sim_config_set_warmup(config: *mut BrSimConfig, warmup_slots: u64) -> BrStatus {
    edit_config(config, |c| c.warmup = Some(warmup_slots))
}

/// Frame length of `BR_PROTOCOL_CONV_BUFFER`.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_sim_config_set_frame(config: *mut BrSimConfig, frame_slots: u64) -> BrStatus {
    edit_config(config, |c| c.frame = Some(frame_slots))
}

/// Queue level whose exceedance frequency is reported.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_sim_config_set_overflow_threshold(
    config: *mut BrSimConfig,
    threshold: f64,
) -> BrStatus {
    edit_config(config, |c| c.overflow_threshold = Some(threshold))
}

fn build(c: &BrSimConfig) -> Result<SimConfig, Failure> {
    let (ms, mr) = links(c.omega_s, c.omega_r)?;
    let policy = match c.protocol {
        Protocol::ConvNoBuffer => PolicySpec::conv_no_buffer(),
        Protocol::ConvBuffer => PolicySpec::conv_buffer(),
        Protocol::AdaptiveFixed => PolicySpec::adaptive_fixed(c.rho, c.decision),
        Protocol::AdaptivePa => PolicySpec::adaptive_pa(c.lambda, c.rho, c.gamma_bar),
        Protocol::Starved => PolicySpec::starved(c.rho, c.decision),
        Protocol::QueueLimited => PolicySpec::queue_limited(c.rho, c.decision, c.q_max),
    };
    let policy = if c.protocol == Protocol::QueueLimited {
        policy
    } else {
        policy.with_q_max(c.q_max)
    };
    let mut sim = SimConfig::new(policy, ms, mr, c.slots).with_seed(c.seed).with_stream(c.stream);
    if let Some(w) = c.warmup {
        sim = sim.with_warmup(w);
    }
    if let Some(f) = c.frame {
        sim = sim.with_frame(f);
    }
    if let Some(t) = c.overflow_threshold {
        sim = sim.with_overflow_threshold(t);
    }
    Ok(sim)
}

/// Runs the simulation described by `config`.
///
/// # Safety
/// `config` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_simulate(config: *const BrSimConfig, out: *mut BrMetrics) -> BrStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = run(&build(c)?)?;
        let nan = f64::NAN;
        put(
            out,
            "out",
            BrMetrics {
                slots_measured: m.slots_measured,
                throughput: m.throughput,
                throughput_stderr: m.throughput_stderr.unwrap_or(nan),
                arrival_rate: m.arrival_rate,
                admitted_rate: m.admitted_rate,
                mean_queue: m.mean_queue,
                mean_delay_fifo: m.mean_delay_fifo.unwrap_or(nan),
                mean_delay_little: m.mean_delay_little.unwrap_or(nan),
                drop_prob: m.drop_prob,
                overflow_event_prob: m.overflow_event_prob.unwrap_or(nan),
                mean_power: m.mean_power.unwrap_or(nan),
                source_slots: m.source_slots,
                relay_slots: m.relay_slots,
                idle_slots: m.idle_slots,
            },
        )
    })
}

/// New empty buffer of `capacity` bits (`INFINITY` for unlimited).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_buffer_new(capacity: f64, out: *mut *mut BrBuffer) -> BrStatus {
    guard(|| {
        let b = RelayBuffer::new(capacity)?;
        put(out, "out", Box::into_raw(Box::new(BrBuffer(b))))
    })
}

/// Releases a buffer. Null is ignored.
///
/// # Safety
/// `buffer` must be null or come from [`br_buffer_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn br_buffer_free(buffer: *mut BrBuffer) {
    if !buffer.is_null() {
        drop(Box::from_raw(buffer));
    }
}

/// Offers `bits` arriving in `slot`; stores the admitted amount in
/// `admitted` (may be null). The excess is dropped.
///
/// # Safety
/// `buffer` must be a live handle; `admitted` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_buffer_enqueue(
    buffer: *mut BrBuffer,
    bits: f64,
    slot: u64,
    admitted: *mut f64,
) -> BrStatus {
    guard(|| {
        let b = buffer.as_mut().ok_or_else(|| null("buffer"))?;
        if !(bits >= 0.0) || !bits.is_finite() {
            return Err(Failure::Status(
                BrStatus::InvalidArgument,
                format!("bits must be finite and non-negative, got {bits}"),
            ));
        }
        let a = b.0.enqueue(bits, slot);
        if !admitted.is_null() {
            admitted.write(a.admitted);
        }
        Ok(())
    })
}

/// Serves up to `link_bits` in `slot`, oldest first; stores the bits sent
/// in `sent` (may be null).
///
/// # Safety
/// `buffer` must be a live handle; `sent` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn br_buffer_dequeue(
    buffer: *mut BrBuffer,
    link_bits: f64,
    slot: u64,
    sent: *mut f64,
) -> BrStatus {
    guard(|| {
        let b = buffer.as_mut().ok_or_else(|| null("buffer"))?;
        if !(link_bits >= 0.0) {
            return Err(Failure::Status(
                BrStatus::InvalidArgument,
                format!("link capacity must be non-negative, got {link_bits}"),
            ));
        }
        let n = b.0.dequeue(link_bits, slot);
        if !sent.is_null() {
            sent.write(n);
        }
        Ok(())
    })
}

/// Bits currently queued; NaN for a null handle.
///
/// # Safety
/// `buffer` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_buffer_len_bits(buffer: *const BrBuffer) -> f64 {
    buffer.as_ref().map_or(f64::NAN, |b| b.0.len_bits())
}

/// Mean FIFO delay of departed bits in slots; NaN before any departure or
/// for a null handle.
///
/// # Safety
/// `buffer` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_buffer_mean_delay(buffer: *const BrBuffer) -> f64 {
    buffer
        .as_ref()
        .and_then(|b| b.0.mean_delay_fifo())
        .unwrap_or(f64::NAN)
}
