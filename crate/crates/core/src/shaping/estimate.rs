//! Blind pulse-shape identification from the averaged spectrum.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{design_filter, PulseKind, PulseShape};
use crate::error::{Result, VlabError};
use crate::signal::{welch_psd, IqSignal, Window};

const MIN_SYMBOLS: f64 = 1000.0;
/// Fit region, in multiples of the symbol rate.
const FIT_LIMIT: f64 = 1.5;
/// Dynamic range of the fit below the spectral peak.
const FLOOR_DB: f64 = -45.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterEstimate {
    pub kind: PulseKind,
    /// Roll-off for rc/rrc, BT for gaussian, 0 otherwise.
    pub parameter: f64,
    /// Mean squared dB error of the winning fit.
    pub fit_error_db2: f64,
}

fn candidates() -> Vec<PulseShape> {
    let mut v = Vec::new();
    for i in 0..=100 {
        let b = i as f64 / 100.0;
        v.push(PulseShape::rc(b));
        v.push(PulseShape::rrc(b));
    }
    for i in 15..=120 {
        v.push(PulseShape::gaussian(i as f64 / 100.0));
    }
    v.push(PulseShape::rect());
    v.push(PulseShape::half_sine());
    v
}

/// |H(nu)|^2 of the designed taps at frequencies `nu` in cycles per symbol.
fn model_power(shape: &PulseShape, nu: &[f64]) -> Result<Vec<f64>> {
    let h = design_filter(shape)?;
    let c = shape.group_delay_samples() as f64;
    let sps = shape.sps as f64;
    Ok(nu
        .iter()
        .map(|&f| {
            let w = -2.0 * std::f64::consts::PI * f / sps;
            h.iter()
                .enumerate()
                .map(|(n, &v)| Complex64::from_polar(v, w * (n as f64 - c)))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect())
}

/// Fits each candidate's power response plus a white floor to the Welch
/// spectrum over `|f| < 1.5 Rs`, in dB. The spectrum is assumed centred.
pub fn estimate_filter_params(signal: &IqSignal, symbol_rate_hz: f64) -> Result<FilterEstimate> {
    fit(signal, symbol_rate_hz, None)
}

/// As [`estimate_filter_params`] with the family known; only its parameter
/// is searched.
pub fn estimate_filter_family(signal: &IqSignal, symbol_rate_hz: f64, kind: PulseKind) -> Result<FilterEstimate> {
    fit(signal, symbol_rate_hz, Some(kind))
}

fn fit(signal: &IqSignal, symbol_rate_hz: f64, family: Option<PulseKind>) -> Result<FilterEstimate> {
    if !(symbol_rate_hz > 0.0 && symbol_rate_hz < signal.sample_rate_hz) {
        return Err(VlabError::param("symbol_rate_hz", "must be in (0, sample rate)"));
    }
    let sps = signal.sample_rate_hz / symbol_rate_hz;
    if (signal.len() as f64) < MIN_SYMBOLS * sps {
        return Err(VlabError::InsufficientSamples {
            needed: (MIN_SYMBOLS * sps).ceil() as usize,
            got: signal.len(),
        });
    }
    let seg = ((64.0 * sps) as usize).next_power_of_two().min(signal.len());
    let psd = welch_psd(signal, seg, 0.5, Window::Hann)?;
    let (nu, meas): (Vec<f64>, Vec<f64>) = psd
        .freq_bins_hz
        .iter()
        .zip(&psd.power_db)
        .map(|(f, p)| (f / symbol_rate_hz, 10f64.powf(p / 10.0)))
        .filter(|(n, _)| n.abs() < FIT_LIMIT)
        .unzip();
    let peak = meas.iter().cloned().fold(0.0, f64::max);
    let floor = peak * 10f64.powf(FLOOR_DB / 10.0);
    // White floor estimated from the far band, where every candidate is low.
    let outer: Vec<f64> = psd
        .freq_bins_hz
        .iter()
        .zip(&psd.power_db)
        .filter(|(f, _)| (f.abs() / symbol_rate_hz) > 1.6)
        .map(|(_, p)| 10f64.powf(p / 10.0))
        .collect();
    let noise = if outer.is_empty() {
        0.0
    } else {
        let mut o = outer.clone();
        o.sort_by(|a, b| a.partial_cmp(b).unwrap());
        o[o.len() / 2]
    };
    let meas_db: Vec<f64> = meas.iter().map(|&p| 10.0 * p.max(floor).log10()).collect();

    let mut best: Option<FilterEstimate> = None;
    for shape in candidates().into_iter().filter(|c| family.is_none_or(|k| c.kind == k)) {
        let m = model_power(&shape, &nu)?;
        // Amplitude from the band centre, where shapes agree most.
        let (num, den) = nu
            .iter()
            .zip(meas.iter().zip(&m))
            .filter(|(n, _)| n.abs() < 0.25)
            .fold((0.0, 0.0), |(a, b), (_, (p, mv))| (a + (p - noise).max(0.0), b + mv));
        if den <= 0.0 {
            continue;
        }
        let amp = num / den;
        let err = m
            .iter()
            .zip(&meas_db)
            .map(|(mv, md)| {
                let model_db = 10.0 * (amp * mv + noise).max(floor).log10();
                (model_db - md).powi(2)
            })
            .sum::<f64>()
            / m.len() as f64;
        let parameter = match shape.kind {
            PulseKind::Rc | PulseKind::Rrc => shape.rolloff,
            PulseKind::Gaussian => shape.bt,
            _ => 0.0,
        };
        if best.is_none_or(|b| err < b.fit_error_db2) {
            best = Some(FilterEstimate {
                kind: shape.kind,
                parameter,
                fit_error_db2: err,
            });
        }
    }
    best.ok_or_else(|| VlabError::param("signal", "no candidate fit"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{map_bits, ModulationScheme};
    use crate::shaping::pulse_shape;
    use crate::signal::SimRng;

    fn shaped(shape: PulseShape, n: usize, seed: u64) -> IqSignal {
        let mut rng = SimRng::new(seed);
        let bits = rng.bits(2 * n);
        let st = map_bits(&bits, ModulationScheme::Qpsk, &mut rng).unwrap();
        pulse_shape(&st, &shape, 8000.0).unwrap().signal
    }

    #[test]
    fn rc_full_rolloff() {
        let e = estimate_filter_params(&shaped(PulseShape::rc(1.0), 4000, 1), 1000.0).unwrap();
        assert_eq!(e.kind, PulseKind::Rc);
        assert!((0.9..=1.0).contains(&e.parameter), "{e:?}");
    }

    #[test]
    fn rrc_022() {
        let e = estimate_filter_params(&shaped(PulseShape::rrc(0.22), 4000, 2), 1000.0).unwrap();
        assert_eq!(e.kind, PulseKind::Rrc);
        assert!((0.12..=0.32).contains(&e.parameter), "{e:?}");
    }

    #[test]
    fn gaussian_bt_05() {
        let e = estimate_filter_params(&shaped(PulseShape::gaussian(0.5), 4000, 3), 1000.0).unwrap();
        assert_eq!(e.kind, PulseKind::Gaussian);
        assert!((0.4..=0.6).contains(&e.parameter), "{e:?}");
    }

    #[test]
    fn short_signal_rejected() {
        assert!(estimate_filter_params(&shaped(PulseShape::rc(0.5), 100, 1), 1000.0).is_err());
    }
}
