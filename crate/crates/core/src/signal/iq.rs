use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VlabError};

/// Complex baseband sample buffer with its sample rate and emulated carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    /// Emulated carrier; metadata only, never applied to the samples.
    pub center_freq_hz: f64,
    #[serde(default)]
    pub label: String,
}

impl IqSignal {
    /// Builds a signal, rejecting non-positive rates and non-finite samples.
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(VlabError::param("sample_rate_hz", "must be positive and finite"));
        }
        if let Some(i) = samples.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(VlabError::param("samples", format!("non-finite value at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            center_freq_hz: 0.0,
            label: String::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_center_freq(mut self, hz: f64) -> Self {
        self.center_freq_hz = hz;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean of |x|² over all samples.
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

pub fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

pub fn amplitude_to_db(amp: f64) -> f64 {
    20.0 * amp.log10()
}
