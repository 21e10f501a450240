//! Calibrated sample containers.
//!
//! Amplitudes are linear and calibrated so that an rms of 1.0 corresponds to
//! 100 dB SPL. A full-scale sine therefore sits at about 97 dB SPL.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Level in dB SPL of an rms amplitude of 1.0.
pub const REFERENCE_DB_SPL: f64 = 100.0;

/// Converts a level in dB SPL to an rms amplitude.
pub fn db_spl_to_rms(level_db: f64) -> f64 {
    10f64.powf((level_db - REFERENCE_DB_SPL) / 20.0)
}

/// Converts an rms amplitude to dB SPL. Silence maps to negative infinity.
pub fn rms_to_db_spl(rms: f64) -> f64 {
    20.0 * rms.log10() + REFERENCE_DB_SPL
}

/// Converts a mean-square value (intensity) to dB SPL.
pub fn power_to_db_spl(power: f64) -> f64 {
    10.0 * power.log10() + REFERENCE_DB_SPL
}

/// Overall level of a band given its spectral (per-Hz) level.
pub fn spectral_to_overall_level(spectral_db: f64, bandwidth_hz: f64) -> f64 {
    spectral_db + 10.0 * bandwidth_hz.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate: sample_rate.max(1),
        }
    }

    pub(crate) fn from_raw(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(samples.iter().all(|x| x.is_finite()));
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    pub fn level_db(&self) -> f64 {
        rms_to_db_spl(self.rms())
    }

    pub fn scaled(mut self, gain: f64) -> Self {
        self.samples.iter_mut().for_each(|x| *x *= gain);
        self
    }

    /// Sample-wise sum. Both signals must share length and rate.
    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Signal::from_raw(samples, self.sample_rate))
    }

    pub(crate) fn check_compatible(&self, other: &Signal) -> Result<()> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::shape(format!(
                "sample rates differ: {} vs {}",
                self.sample_rate, other.sample_rate
            )));
        }
        if self.len() != other.len() {
            return Err(Error::shape(format!(
                "lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// A left/right pair of equally long signals at a common rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoSignal {
    left: Signal,
    right: Signal,
}

impl StereoSignal {
    pub fn new(left: Signal, right: Signal) -> Result<Self> {
        left.check_compatible(&right)?;
        Ok(Self { left, right })
    }

    /// Identical signal at both ears.
    pub fn diotic(signal: Signal) -> Self {
        Self {
            right: signal.clone(),
            left: signal,
        }
    }

    /// Signal at the left ear only, silence at the right.
    pub fn left_only(signal: Signal) -> Self {
        let right = Signal::silence(signal.len(), signal.sample_rate());
        Self {
            left: signal,
            right,
        }
    }

    pub fn left(&self) -> &Signal {
        &self.left
    }

    pub fn right(&self) -> &Signal {
        &self.right
    }

    pub fn into_parts(self) -> (Signal, Signal) {
        (self.left, self.right)
    }

    pub fn sample_rate(&self) -> u32 {
        self.left.sample_rate()
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.left.duration()
    }

    /// Swaps the ears.
    pub fn mirrored(&self) -> Self {
        Self {
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }

    pub fn add(&self, other: &StereoSignal) -> Result<StereoSignal> {
        Ok(Self {
            left: self.left.add(&other.left)?,
            right: self.right.add(&other.right)?,
        })
    }

    pub fn scaled(self, gain: f64) -> Self {
        Self {
            left: self.left.scaled(gain),
            right: self.right.scaled(gain),
        }
    }

    pub fn check_compatible(&self, other: &StereoSignal) -> Result<()> {
        self.left.check_compatible(&other.left)
    }
}
