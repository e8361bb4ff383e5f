//! Emulated broadcast-band survey: FM stations at known distances seen
//! through a path-loss model.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PathLossModel;
use crate::error::{Result, VlabError};
use crate::signal::{db_to_amplitude, IqSignal, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmStation {
    pub offset_hz: f64,
    pub distance_m: f64,
    pub tx_power_db: f64,
    pub deviation_hz: f64,
    pub tone_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmSurvey {
    pub signal: IqSignal,
    /// Received power of each station after path loss and shadowing.
    pub rx_power_db: Vec<f64>,
    pub loss_db: Vec<f64>,
}

/// Sum of tone-modulated FM carriers, each attenuated by one path-loss draw.
pub fn fm_survey(
    stations: &[FmStation],
    model: &PathLossModel,
    sample_rate_hz: f64,
    n_samples: usize,
    rng: &mut SimRng,
) -> Result<FmSurvey> {
    if stations.is_empty() {
        return Err(VlabError::param("stations", "empty"));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n_samples];
    let mut rx = Vec::new();
    let mut losses = Vec::new();
    for st in stations {
        if st.offset_hz.abs() + st.deviation_hz + st.tone_hz >= sample_rate_hz / 2.0 {
            return Err(VlabError::param("offset_hz", "station exceeds Nyquist"));
        }
        let loss = model.loss_db(st.distance_m, rng)?;
        let p = st.tx_power_db - loss;
        let a = db_to_amplitude(p);
        let beta = if st.tone_hz > 0.0 {
            st.deviation_hz / st.tone_hz
        } else {
            0.0
        };
        let ph0 = rng.uniform_range(0.0, 2.0 * PI);
        for (k, o) in out.iter_mut().enumerate() {
            let t = k as f64 / sample_rate_hz;
            let phase = 2.0 * PI * st.offset_hz * t + beta * (2.0 * PI * st.tone_hz * t).sin() + ph0;
            *o += Complex64::from_polar(a, phase);
        }
        rx.push(p);
        losses.push(loss);
    }
    Ok(FmSurvey {
        signal: IqSignal::new(out, sample_rate_hz)?.with_label("fm-survey"),
        rx_power_db: rx,
        loss_db: losses,
    })
}
