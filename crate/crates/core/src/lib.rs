//! Buffer-aided half-duplex decode-and-forward relaying with adaptive link
//! selection.
//!
//! The crate has two halves that check each other:
//!
//! * analytic: [`closed_form`] throughputs, threshold balance equations,
//!   power-allocation conditions and delay bounds, driven to their optimal
//!   operating points by [`solver`];
//! * empirical: the slot-by-slot Monte-Carlo engine in [`sim`], which draws
//!   fading, applies a [`policy`] and tracks the relay queue in a
//!   [`buffer::RelayBuffer`].
//!
//! [`experiments`] ties both together into reproducible parameter sweeps that
//! emit CSV tables.

pub mod buffer;
pub mod channel;
pub mod closed_form;
mod error;
pub mod experiments;
pub mod policy;
pub mod sim;
pub mod solver;
pub mod special;

pub use error::{Error, Result};

/// Bits carried by a slot of instantaneous SNR `snr`: `log2(1 + snr)`.
#[inline]
pub fn capacity_bits(snr: f64) -> f64 {
    snr.ln_1p() / std::f64::consts::LN_2
}
