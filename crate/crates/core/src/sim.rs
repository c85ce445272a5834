//! Slot-level Monte-Carlo simulation of the relay.
//!
//! Each slot draws both links, lets the policy pick `d`, and moves bits:
//! `d = 0` offers `S = log2(1 + s)` to the relay buffer, `d = 1` drains
//! `min(R, Q)` towards the destination.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::buffer::{mean_delay_little, CompensatedSum, RelayBuffer};
use crate::channel::{FadingModel, LinkSnapshot};
use crate::policy::{
    allocate_power, select_fixed_power, select_queue_limited, select_with_power, PolicySpec,
    Protocol,
};
use crate::{capacity_bits, Error, Result};

/// Default number of initial slots excluded from the statistics.
pub const DEFAULT_WARMUP: u64 = 10_000;
/// Maximum number of trace rows kept.
pub const TRACE_LIMIT: usize = 1_000_000;
const STDERR_BATCHES: u64 = 32;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub policy: PolicySpec,
    /// Source-relay SNR (or gain, for `adaptive_pa`).
    pub model_s: FadingModel,
    /// Relay-destination SNR (or gain, for `adaptive_pa`).
    pub model_r: FadingModel,
    pub slots: u64,
    /// Slots simulated before statistics start. Ignored by the conventional
    /// protocols, whose schedules have no transient.
    pub warmup_slots: u64,
    pub seed: u64,
    /// RNG substream, e.g. the index of a sweep point.
    pub stream: u64,
    pub record_trace: bool,
    /// Queue level whose exceedance frequency is reported.
    pub overflow_threshold: Option<f64>,
    /// Frame length of `conv_buffer`; the whole run when absent.
    pub frame_slots: Option<u64>,
}

impl SimConfig {
    pub fn new(policy: PolicySpec, model_s: FadingModel, model_r: FadingModel, slots: u64) -> Self {
        SimConfig {
            policy,
            model_s,
            model_r,
            slots,
            warmup_slots: DEFAULT_WARMUP.min(slots / 10),
            seed: 0,
            stream: 0,
            record_trace: false,
            overflow_threshold: None,
            frame_slots: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_warmup(mut self, warmup_slots: u64) -> Self {
        self.warmup_slots = warmup_slots;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn with_overflow_threshold(mut self, threshold: f64) -> Self {
        self.overflow_threshold = Some(threshold);
        self
    }

    pub fn with_frame(mut self, frame_slots: u64) -> Self {
        self.frame_slots = Some(frame_slots);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if self.slots < 1 {
            return Err(Error::config("a run needs at least one slot"));
        }
        let protocol = self.policy.protocol;
        if protocol.is_conventional() {
            if self.slots % 2 == 1 {
                return Err(Error::config(format!(
                    "{protocol} needs an even number of slots, got {}",
                    self.slots
                )));
            }
            if let Some(frame) = self.frame_slots {
                if frame == 0 || frame % 2 == 1 || self.slots % frame != 0 {
                    return Err(Error::config(format!(
                        "frame of {frame} slots must be even and divide {} slots",
                        self.slots
                    )));
                }
            }
        } else if self.warmup_slots >= self.slots {
            return Err(Error::config(format!(
                "warmup ({}) must be shorter than the run ({})",
                self.warmup_slots, self.slots
            )));
        }
        if let Some(t) = self.overflow_threshold {
            if !(t >= 0.0) {
                return Err(Error::config(format!("overflow threshold must be >= 0, got {t}")));
            }
        }
        Ok(())
    }

    fn effective_warmup(&self) -> u64 {
        if self.policy.protocol.is_conventional() {
            0
        } else {
            self.warmup_slots
        }
    }
}

/// Statistics over the measured (post-warmup) slots. Rates are per slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub slots_measured: u64,
    /// Bits delivered to the destination per slot.
    pub throughput: f64,
    /// Batch-means standard error of `throughput`.
    pub throughput_stderr: Option<f64>,
    /// Bits sent by the source per slot, `E{(1−d) S}`.
    pub arrival_rate: f64,
    /// Bits accepted into the buffer per slot.
    pub admitted_rate: f64,
    /// Equal to `throughput`.
    pub departure_rate: f64,
    /// Time average of the queue at the end of each slot.
    pub mean_queue: f64,
    /// Mean per-bit delay of departed bits, FIFO measured.
    pub mean_delay_fifo: Option<f64>,
    /// `mean_queue / admitted_rate`.
    pub mean_delay_little: Option<f64>,
    /// Fraction of offered bits dropped (overflow or end-of-frame flush).
    pub drop_prob: f64,
    /// Fraction of slots ending with the queue above the overflow threshold.
    pub overflow_event_prob: Option<f64>,
    /// Average normalized transmit power (`adaptive_pa`).
    pub mean_power: Option<f64>,
    pub source_slots: u64,
    pub relay_slots: u64,
    /// Relay slots in which `R` exceeded the queue.
    pub starved_relay_slots: u64,
    /// Slots in which no bit moved.
    pub idle_slots: u64,
    pub offered_bits: f64,
    pub admitted_bits: f64,
    pub departed_bits: f64,
    pub dropped_bits: f64,
    pub initial_queue: f64,
    pub final_queue: f64,
}

/// One simulated slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub slot: u64,
    pub s: f64,
    pub r: f64,
    pub d: u8,
    /// Bits sent by the source.
    #[serde(rename = "S")]
    pub source_bits: f64,
    /// Bits sent by the relay.
    #[serde(rename = "R")]
    pub relay_bits: f64,
    /// Queue at the end of the slot.
    #[serde(rename = "Q")]
    pub q: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub metrics: Metrics,
    pub trace: Vec<TraceRow>,
}

/// Runs the configured protocol and returns the statistics.
pub fn run(config: &SimConfig) -> Result<Metrics> {
    Ok(simulate(config)?.metrics)
}

/// Runs the configured protocol, keeping the per-slot trace if requested.
pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let policy = &config.policy;
    let capacity = match policy.protocol {
        Protocol::ConvNoBuffer => f64::INFINITY,
        _ => policy.q_max,
    };
    let mut buffer = RelayBuffer::new(capacity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(config.stream);

    let warmup = config.effective_warmup();
    let measured = config.slots - warmup;
    let frame = config.frame_slots.unwrap_or(config.slots);
    let batch_len = (measured / STDERR_BATCHES).max(1);
    let is_pa = policy.protocol == Protocol::AdaptivePa;

    let mut trace = Vec::new();
    let mut offered = CompensatedSum::default();
    let mut power = CompensatedSum::default();
    let mut queue_area = CompensatedSum::default();
    let mut overflow_slots = 0u64;
    let (mut source_slots, mut relay_slots, mut starved, mut idle) = (0u64, 0u64, 0u64, 0u64);
    let mut initial_queue = 0.0;
    let mut batch_means = Vec::new();
    let mut batch_start_departed = 0.0;

    for slot in 1..=config.slots {
        let link = LinkSnapshot::draw(&config.model_s, &config.model_r, &mut rng, slot);
        let q_before = buffer.len_bits();
        let (d, gamma_s, gamma_r) = match policy.protocol {
            Protocol::ConvNoBuffer => (slot % 2 == 0, 0.0, 0.0),
            Protocol::ConvBuffer => ((slot - 1) % frame >= frame / 2, 0.0, 0.0),
            Protocol::AdaptiveFixed | Protocol::Starved => {
                (select_fixed_power(link.s, link.r, policy.rho, policy.decision), 0.0, 0.0)
            }
            Protocol::QueueLimited => (
                select_queue_limited(link.s, link.r, policy.rho, policy.decision, q_before, policy.q_max),
                0.0,
                0.0,
            ),
            Protocol::AdaptivePa => {
                let d = select_with_power(link.s, link.r, policy.lambda, policy.rho);
                let (gs, gr) = allocate_power(link.s, link.r, policy.lambda, policy.rho);
                (d, gs, gr)
            }
        };
        let measuring = slot > warmup;
        let (mut source_bits, mut relay_bits) = (0.0, 0.0);
        if d {
            let rate = if is_pa {
                capacity_bits(gamma_r * link.r)
            } else {
                capacity_bits(link.r)
            };
            relay_bits = buffer.dequeue(rate, slot);
            if measuring {
                relay_slots += 1;
                if rate > q_before {
                    starved += 1;
                }
                if is_pa {
                    power.add(gamma_r);
                }
            }
        } else {
            source_bits = if is_pa {
                capacity_bits(gamma_s * link.s)
            } else {
                capacity_bits(link.s)
            };
            buffer.enqueue(source_bits, slot);
            if measuring {
                source_slots += 1;
                offered.add(source_bits);
                if is_pa {
                    power.add(gamma_s);
                }
            }
        }
        match policy.protocol {
            Protocol::ConvNoBuffer if d => {
                buffer.flush();
            }
            Protocol::ConvBuffer if slot % frame == 0 => {
                buffer.flush();
            }
            _ => {}
        }
        let q = buffer.len_bits();
        if measuring {
            queue_area.add(q);
            if config.overflow_threshold.is_some_and(|t| q > t) {
                overflow_slots += 1;
            }
            if source_bits == 0.0 && relay_bits == 0.0 {
                idle += 1;
            }
            let done = slot - warmup;
            if done % batch_len == 0 && (batch_means.len() as u64) < STDERR_BATCHES {
                let departed = buffer.departed_bits();
                batch_means.push((departed - batch_start_departed) / batch_len as f64);
                batch_start_departed = departed;
            }
        }
        if config.record_trace && trace.len() < TRACE_LIMIT {
            trace.push(TraceRow {
                slot,
                s: link.s,
                r: link.r,
                d: d as u8,
                source_bits,
                relay_bits,
                q,
            });
        }
        if slot == warmup {
            buffer.reset_counters();
            initial_queue = q;
        }
    }

    let n = measured as f64;
    let offered_bits = offered.value();
    let departed_bits = buffer.departed_bits();
    let admitted_bits = buffer.admitted_bits();
    let mean_queue = queue_area.value() / n;
    let admitted_rate = admitted_bits / n;
    let metrics = Metrics {
        slots_measured: measured,
        throughput: departed_bits / n,
        throughput_stderr: batch_stderr(&batch_means),
        arrival_rate: offered_bits / n,
        admitted_rate,
        departure_rate: departed_bits / n,
        mean_queue,
        mean_delay_fifo: buffer.mean_delay_fifo(),
        mean_delay_little: mean_delay_little(mean_queue, admitted_rate).ok(),
        drop_prob: if offered_bits > 0.0 {
            (buffer.dropped_bits() / offered_bits).min(1.0)
        } else {
            0.0
        },
        overflow_event_prob: config.overflow_threshold.map(|_| overflow_slots as f64 / n),
        mean_power: is_pa.then(|| power.value() / n),
        source_slots,
        relay_slots,
        starved_relay_slots: starved,
        idle_slots: idle,
        offered_bits,
        admitted_bits,
        departed_bits,
        dropped_bits: buffer.dropped_bits(),
        initial_queue,
        final_queue: buffer.len_bits(),
    };
    Ok(SimOutput { metrics, trace })
}

fn batch_stderr(means: &[f64]) -> Option<f64> {
    if means.len() < 2 {
        return None;
    }
    let k = means.len() as f64;
    let mean = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Some((var / k).sqrt())
}

/// Conventional buffered relaying with a finite buffer: receive-phase bits
/// beyond `q_max` are dropped on arrival, and whatever is left at the end
/// of each frame is dropped too.
pub fn run_conventional_finite(config: &SimConfig, q_max: f64) -> Result<Metrics> {
    if config.policy.protocol != Protocol::ConvBuffer {
        return Err(Error::config(format!(
            "finite conventional runs need conv_buffer, got {}",
            config.policy.protocol
        )));
    }
    let mut cfg = config.clone();
    cfg.policy = cfg.policy.with_q_max(q_max);
    run(&cfg)
}

/// Writes a trace as CSV with header `slot,s,r,d,S,R,Q`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::config(format!("trace write failed: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::config(format!("trace write failed: {e}")))?;
    Ok(())
}
