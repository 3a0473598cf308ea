use alloc::vec::Vec;

use super::C64;
use crate::error::{param_err, Result};

/// Uniformly sampled complex baseband signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexWaveform {
    samples: Vec<C64>,
    sample_rate_hz: f64,
}

impl ComplexWaveform {
    pub fn new(samples: Vec<C64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(param_err!("sample rate must be positive, got {sample_rate_hz}"));
        }
        Ok(ComplexWaveform {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Mean squared magnitude; zero for an empty waveform.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    /// Same sample rate, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<C64>) -> Self {
        ComplexWaveform {
            samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}
