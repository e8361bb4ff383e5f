use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{apply_subcarrier_cfo, ofdm_demodulate, ofdm_modulate, CpSync, OfdmConfig};
use crate::error::{Result, VlabError};
use crate::impairments::add_noise;
use crate::signal::{db_to_amplitude, db_to_linear, measure_ber, papr_at_probability, IqSignal, SimRng};

const SWEEP_PAPR_PROB: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathTap {
    pub delay_samples: usize,
    pub gain_db: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

/// Sample-spaced static multipath.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Multipath {
    pub taps: Vec<PathTap>,
}

impl Multipath {
    pub fn two_tap(delay_samples: usize, echo_db: f64) -> Self {
        Multipath {
            taps: vec![
                PathTap {
                    delay_samples: 0,
                    gain_db: 0.0,
                    phase_rad: 0.0,
                },
                PathTap {
                    delay_samples,
                    gain_db: echo_db,
                    phase_rad: 0.0,
                },
            ],
        }
    }

    /// Output keeps the input length.
    pub fn apply(&self, signal: &IqSignal) -> IqSignal {
        if self.taps.is_empty() {
            return signal.clone();
        }
        let mut out = signal.clone();
        out.samples.iter_mut().for_each(|s| *s = Complex64::new(0.0, 0.0));
        for t in &self.taps {
            let g = Complex64::from_polar(db_to_amplitude(t.gain_db), t.phase_rad);
            for k in t.delay_samples..signal.len() {
                out.samples[k] += g * signal.samples[k - t.delay_samples];
            }
        }
        out
    }
}

/// Channel and impairments applied to every configuration of a sweep.
/// Timing is genie-aided; CFO is corrected with the injected value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFixture {
    #[serde(default)]
    pub channel: Multipath,
    /// Per-sample SNR against the unit-power transmit signal.
    pub snr_db: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: OfdmConfig,
    pub papr_db: f64,
    pub evm_pct: f64,
    pub ber: f64,
    pub flags: Vec<String>,
}

/// Runs each configuration through the fixture and reports PAPR at
/// probability 1e-3, EVM and BER.
pub fn parameter_sweep(grid: &[OfdmConfig], fixture: &SweepFixture) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(VlabError::param("grid", "must not be empty"));
    }
    let mut root = SimRng::new(fixture.seed);
    grid.iter()
        .enumerate()
        .map(|(i, config)| {
            let mut rng = root.fork(i as u64);
            let bits = rng.bits(config.capacity_bits());
            let frame = ofdm_modulate(&bits, config, 1.0, &mut rng)?;
            let papr_db = papr_at_probability(&frame.signal.samples, SWEEP_PAPR_PROB)?;
            let rx = fixture.channel.apply(&frame.signal);
            let rx = apply_subcarrier_cfo(&rx, fixture.eps, config.fft_size);
            let rx = if fixture.snr_db.is_finite() {
                add_noise(&rx, db_to_linear(-fixture.snr_db), &mut rng)?
            } else {
                rx
            };
            let out = ofdm_demodulate(
                &rx,
                config,
                &CpSync {
                    theta: 0,
                    eps: fixture.eps,
                },
            )?;
            let ber = measure_ber(&bits, &out.bits)?.rate;
            Ok(SweepRow {
                config: config.clone(),
                papr_db,
                evm_pct: out.evm_pct,
                ber,
                flags: out.flags,
            })
        })
        .collect()
}
