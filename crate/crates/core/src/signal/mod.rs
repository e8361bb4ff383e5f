//! Signal types, seeded randomness, resampling and the analyser views.

pub mod fir;
mod iq;
pub mod iqfile;
mod measure;
mod psd;
mod resample;
mod rng;

pub use iq::{amplitude_to_db, db_to_amplitude, db_to_linear, linear_to_db, mean_power, IqSignal};
pub use measure::{
    default_ccdf_thresholds, erfc, evm_rms, eye_diagram, measure_ber, papr_at_probability, papr_ccdf, q_function,
    BerCount, CcdfCurve, EyeGrid, Rail,
};
pub use psd::{spectrogram, welch_psd, PsdEstimate, Spectrogram, Window};
pub use resample::{fractional_delay, rational_approx, resample};
pub use rng::{SimRng, RNG_ALGORITHM};

use num_complex::Complex64;
use std::f64::consts::PI;

/// Unit-amplitude complex exponential at `freq_hz`.
pub fn tone(freq_hz: f64, sample_rate_hz: f64, len: usize) -> IqSignal {
    let samples = (0..len)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * freq_hz * k as f64 / sample_rate_hz))
        .collect();
    IqSignal {
        samples,
        sample_rate_hz,
        center_freq_hz: 0.0,
        label: String::new(),
    }
}
