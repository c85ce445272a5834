//! The relay's queue of decoded-but-not-yet-forwarded bits.
//!
//! Bits are a fluid: a slot's arrival is one FIFO batch, and a departure
//! drains batches oldest-first, splitting the last one. Draining records
//! `bits × (departure slot − arrival slot)`, which gives the exact mean
//! per-bit delay independently of Little's law.

use std::collections::VecDeque;

use crate::{Error, Result};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Batch {
    bits: f64,
    arrival_slot: u64,
}

/// Outcome of offering bits to the buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admission {
    pub admitted: f64,
    pub dropped: f64,
}

#[derive(Debug, Clone)]
pub struct RelayBuffer {
    q: f64,
    capacity: f64,
    batches: VecDeque<Batch>,
    admitted: CompensatedSum,
    departed: CompensatedSum,
    dropped: CompensatedSum,
    bit_slots: CompensatedSum,
}

impl RelayBuffer {
    /// A buffer holding at most `capacity` bits (`f64::INFINITY` for none).
    pub fn new(capacity: f64) -> Result<Self> {
        if !(capacity >= 0.0) {
            return Err(Error::config(format!(
                "buffer capacity must be non-negative, got {capacity}"
            )));
        }
        Ok(RelayBuffer {
            q: 0.0,
            capacity,
            batches: VecDeque::new(),
            admitted: CompensatedSum::default(),
            departed: CompensatedSum::default(),
            dropped: CompensatedSum::default(),
            bit_slots: CompensatedSum::default(),
        })
    }

    pub fn unbounded() -> Self {
        Self::new(f64::INFINITY).expect("infinite capacity is valid")
    }

    /// Bits currently queued, `Q(i)`.
    pub fn len_bits(&self) -> f64 {
        self.q
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    /// Appends up to the free space; the excess is dropped.
    pub fn enqueue(&mut self, bits: f64, slot: u64) -> Admission {
        debug_assert!(bits >= 0.0);
        if !(bits > 0.0) {
            return Admission {
                admitted: 0.0,
                dropped: 0.0,
            };
        }
        let room = (self.capacity - self.q).max(0.0);
        let admitted = bits.min(room);
        let dropped = bits - admitted;
        if admitted > 0.0 {
            debug_assert!(self.batches.back().is_none_or(|b| b.arrival_slot <= slot));
            self.q = (self.q + admitted).min(self.capacity);
            self.batches.push_back(Batch {
                bits: admitted,
                arrival_slot: slot,
            });
            self.admitted.add(admitted);
        }
        if dropped > 0.0 {
            self.dropped.add(dropped);
        }
        Admission { admitted, dropped }
    }

    /// Sends `min(link_capacity_bits, Q)` bits, oldest first.
    pub fn dequeue(&mut self, link_capacity_bits: f64, slot: u64) -> f64 {
        debug_assert!(link_capacity_bits >= 0.0);
        if !(link_capacity_bits > 0.0) || self.batches.is_empty() {
            return 0.0;
        }
        if link_capacity_bits >= self.q {
            let sent = self.q;
            while let Some(b) = self.batches.pop_front() {
                self.bit_slots.add(b.bits * (slot - b.arrival_slot) as f64);
            }
            self.q = 0.0;
            self.departed.add(sent);
            return sent;
        }
        let mut remaining = link_capacity_bits;
        while remaining > 0.0 {
            let Some(front) = self.batches.front_mut() else {
                break;
            };
            let age = (slot - front.arrival_slot) as f64;
            if front.bits <= remaining {
                remaining -= front.bits;
                self.bit_slots.add(front.bits * age);
                self.batches.pop_front();
            } else {
                front.bits -= remaining;
                self.bit_slots.add(remaining * age);
                remaining = 0.0;
            }
        }
        let sent = link_capacity_bits - remaining;
        self.q = (self.q - sent).max(0.0);
        if self.batches.is_empty() {
            self.q = 0.0;
        }
        self.departed.add(sent);
        sent
    }

    /// Discards everything queued (end of a fixed-schedule frame); the bits
    /// count as dropped.
    pub fn flush(&mut self) -> f64 {
        let lost = self.q;
        self.batches.clear();
        self.q = 0.0;
        if lost > 0.0 {
            self.dropped.add(lost);
        }
        lost
    }

    pub fn admitted_bits(&self) -> f64 {
        self.admitted.value()
    }

    pub fn departed_bits(&self) -> f64 {
        self.departed.value()
    }

    pub fn dropped_bits(&self) -> f64 {
        self.dropped.value()
    }

    /// `Σ bits · delay` over everything that has departed.
    pub fn departed_bit_slots(&self) -> f64 {
        self.bit_slots.value()
    }

    /// Mean per-bit delay in slots of the bits that have departed, FIFO
    /// measured. `None` before anything departs.
    pub fn mean_delay_fifo(&self) -> Option<f64> {
        let d = self.departed_bits();
        (d > 0.0).then(|| self.departed_bit_slots() / d)
    }

    /// Zeroes the flow counters but keeps the queue contents.
    pub fn reset_counters(&mut self) {
        self.admitted = CompensatedSum::default();
        self.departed = CompensatedSum::default();
        self.dropped = CompensatedSum::default();
        self.bit_slots = CompensatedSum::default();
    }

    /// `Σ batch bits`, for invariant checks.
    pub fn batch_total(&self) -> f64 {
        self.batches.iter().map(|b| b.bits).sum()
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }
}

/// Little's law: mean delay in slots from mean queue (bits) and arrival rate
/// (bits/slot).
pub fn mean_delay_little(mean_queue: f64, arrival_rate: f64) -> Result<f64> {
    if !(arrival_rate > 0.0) {
        return Err(Error::domain(format!(
            "Little's law needs a positive arrival rate, got {arrival_rate}"
        )));
    }
    Ok(mean_queue / arrival_rate)
}
