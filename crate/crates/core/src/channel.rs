//! Fading models for the source-relay and relay-destination links.
//!
//! A [`FadingModel`] describes one link either by its Rayleigh mean (the
//! link SNR or the squared channel gain is exponentially distributed) or by
//! a user-supplied density and sampler. The same model feeds the simulator
//! (draws) and the quadrature paths (density).

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::special::{integrate_semi_infinite_scaled, QuadratureSpec};
use crate::{Error, Result};

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SamplerFn = Arc<dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingKind {
    Rayleigh,
    Custom,
}

#[derive(Clone)]
enum Law {
    Rayleigh,
    Custom { pdf: DensityFn, sampler: SamplerFn },
}

/// Statistical description of one link. Immutable once built.
#[derive(Clone)]
pub struct FadingModel {
    mean: f64,
    law: Law,
}

impl fmt::Debug for FadingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FadingModel")
            .field("kind", &self.kind())
            .field("mean", &self.mean)
            .finish()
    }
}

impl FadingModel {
    /// Exponentially distributed link SNR (or gain) with the given mean.
    pub fn rayleigh(mean: f64) -> Result<Self> {
        check_mean(mean)?;
        Ok(FadingModel {
            mean,
            law: Law::Rayleigh,
        })
    }

    /// A model given by its density on `[0, ∞)` and a matching sampler.
    ///
    /// The density must integrate to one within 1e-9; `mean` sets the decay
    /// length used when integrating against it.
    pub fn custom(mean: f64, pdf: DensityFn, sampler: SamplerFn) -> Result<Self> {
        check_mean(mean)?;
        let spec = QuadratureSpec::new(1e-12, 1e-12, 4000)?;
        let mass = integrate_semi_infinite_scaled(|x| pdf(x), 0.0, mean, &spec)?;
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "custom density integrates to {mass}, not 1"
            )));
        }
        Ok(FadingModel {
            mean,
            law: Law::Custom { pdf, sampler },
        })
    }

    pub fn kind(&self) -> FadingKind {
        match self.law {
            Law::Rayleigh => FadingKind::Rayleigh,
            Law::Custom { .. } => FadingKind::Custom,
        }
    }

    pub fn is_rayleigh(&self) -> bool {
        matches!(self.law, Law::Rayleigh)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// One i.i.d. draw. Rayleigh draws use the inverse CDF `-Ω ln U`.
    pub fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::Rayleigh => {
                // gen() is in [0, 1); 1 - U keeps the log finite
                let u: f64 = 1.0 - rng.gen::<f64>();
                -self.mean * u.ln()
            }
            Law::Custom { sampler, .. } => sampler(rng as &mut dyn RngCore),
        }
    }

    /// Density at `x ≥ 0`.
    pub fn pdf_at(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("density evaluated at x = {x} < 0")));
        }
        Ok(self.density(x))
    }

    /// Density without the domain check, for use inside integrands.
    pub(crate) fn density(&self, x: f64) -> f64 {
        match &self.law {
            Law::Rayleigh => (-x / self.mean).exp() / self.mean,
            Law::Custom { pdf, .. } => pdf(x),
        }
    }
}

fn check_mean(mean: f64) -> Result<()> {
    if mean > 0.0 && mean.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("link mean must be positive, got {mean}")))
    }
}

/// The pair of instantaneous link qualities seen in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSnapshot {
    pub s: f64,
    pub r: f64,
    pub slot_index: u64,
}

impl LinkSnapshot {
    /// Draws the source-relay value first, then the relay-destination value.
    pub fn draw<R: RngCore>(
        model_s: &FadingModel,
        model_r: &FadingModel,
        rng: &mut R,
        slot_index: u64,
    ) -> Self {
        let s = model_s.sample(rng);
        let r = model_r.sample(rng);
        LinkSnapshot { s, r, slot_index }
    }
}
