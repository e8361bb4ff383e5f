use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::msequence::MSequence;
use crate::error::{Result, VlabError};
use crate::modem::{decide, ModulationScheme};
use crate::signal::IqSignal;

/// Detection threshold on the energy-normalized delayed autocorrelation.
pub const COARSE_THRESHOLD: f64 = 0.5;
/// Fine-sync peak-to-sidelobe ratio below which the result is flagged.
pub const MIN_PEAK_TO_SIDELOBE: f64 = 2.0;

/// Delayed-autocorrelation sums over every window start `d`:
/// `P(d) = sum conj(r[k]) r[k+L]` and the energies of both halves.
pub(crate) struct DelayCorrelation {
    pub p: Vec<Complex64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

impl DelayCorrelation {
    pub fn new(x: &[Complex64], lag: usize, window: usize) -> Self {
        let n_win = x.len() + 1 - (lag + window);
        let prod: Vec<Complex64> = (0..x.len() - lag).map(|k| x[k].conj() * x[k + lag]).collect();
        let en: Vec<f64> = x.iter().map(|v| v.norm_sqr()).collect();
        let mut p = Vec::with_capacity(n_win);
        let mut e1 = Vec::with_capacity(n_win);
        let mut e2 = Vec::with_capacity(n_win);
        let mut sp: Complex64 = prod[..window].iter().sum();
        let mut s1: f64 = en[..window].iter().sum();
        let mut s2: f64 = en[lag..lag + window].iter().sum();
        for d in 0..n_win {
            if d > 0 {
                sp += prod[d + window - 1] - prod[d - 1];
                s1 += en[d + window - 1] - en[d - 1];
                s2 += en[d + lag + window - 1] - en[d + lag - 1];
            }
            p.push(sp);
            e1.push(s1);
            e2.push(s2);
        }
        DelayCorrelation { p, e1, e2 }
    }

    pub fn normalized(&self, d: usize) -> f64 {
        let den = (self.e1[d] * self.e2[d]).sqrt();
        if den > 0.0 {
            self.p[d].norm() / den
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseSync {
    pub start: usize,
    /// Energy-normalized metric at `start`, in [0, 1].
    pub metric: f64,
    pub detected: bool,
}

/// Argmax of `|sum conj(r[k]) r[k+L]|` over windows of `L` samples.
pub fn coarse_sync(signal: &IqSignal, seq_len_samples: usize) -> Result<CoarseSync> {
    let l = seq_len_samples;
    if l == 0 {
        return Err(VlabError::param("seq_len_samples", "must be positive"));
    }
    if signal.len() < 2 * l {
        return Err(VlabError::InsufficientSamples {
            needed: 2 * l,
            got: signal.len(),
        });
    }
    let dc = DelayCorrelation::new(&signal.samples, l, l);
    let peak = (0..dc.p.len())
        .max_by(|&a, &b| dc.p[a].norm().partial_cmp(&dc.p[b].norm()).unwrap())
        .unwrap();
    let start = plateau_start(&dc, peak, l);
    let metric = dc.normalized(start);
    Ok(CoarseSync {
        start,
        metric,
        detected: metric >= COARSE_THRESHOLD,
    })
}

/// Payload symbols that happen to continue the sequence extend the
/// plateau to the right, so take its first sample within half a sample's
/// worth of the peak.
fn plateau_start(dc: &DelayCorrelation, peak: usize, l: usize) -> usize {
    let floor = dc.p[peak].norm() * (1.0 - 0.5 / l as f64);
    (peak.saturating_sub(l / 4)..=peak)
        .find(|&d| dc.p[d].norm() >= floor)
        .unwrap_or(peak)
}

/// Window starts whose normalized metric clears the threshold, one per
/// local region of `L` samples, strongest first.
pub fn coarse_candidates(signal: &IqSignal, seq_len_samples: usize) -> Result<Vec<CoarseSync>> {
    let l = seq_len_samples;
    if signal.len() < 2 * l || l == 0 {
        return Err(VlabError::InsufficientSamples {
            needed: 2 * l,
            got: signal.len(),
        });
    }
    let dc = DelayCorrelation::new(&signal.samples, l, l);
    let mut idx: Vec<usize> = (0..dc.p.len())
        .filter(|&d| dc.normalized(d) >= COARSE_THRESHOLD)
        .collect();
    idx.sort_by(|&a, &b| dc.p[b].norm().partial_cmp(&dc.p[a].norm()).unwrap());
    let mut out: Vec<CoarseSync> = Vec::new();
    for d in idx {
        if out.iter().all(|c| c.start.abs_diff(d) > l) {
            let start = plateau_start(&dc, d, l);
            out.push(CoarseSync {
                start,
                metric: dc.normalized(start),
                detected: true,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfoEstimate {
    pub cfo_hz: f64,
    /// `|P|/sqrt(E1 E2)` at the estimate; low values mean noise dominated
    /// or out of range.
    pub metric: f64,
    pub low_confidence: bool,
    /// Largest unambiguous offset, `fs / (2 L)`.
    pub ambiguity_hz: f64,
}

/// `angle(sum conj(r[k]) r[k+L]) * fs / (2 pi L)` over the window at `start`.
pub fn estimate_cfo(signal: &IqSignal, start: usize, seq_len_samples: usize) -> Result<CfoEstimate> {
    let l = seq_len_samples;
    if l == 0 || start + 2 * l > signal.len() {
        return Err(VlabError::InsufficientSamples {
            needed: start + 2 * l,
            got: signal.len(),
        });
    }
    let x = &signal.samples[start..start + 2 * l];
    let dc = DelayCorrelation::new(x, l, l);
    let fs = signal.sample_rate_hz;
    let metric = dc.normalized(0);
    Ok(CfoEstimate {
        cfo_hz: dc.p[0].arg() * fs / (2.0 * PI * l as f64),
        metric,
        low_confidence: metric < COARSE_THRESHOLD,
        ambiguity_hz: fs / (2.0 * l as f64),
    })
}

/// Removes a frequency offset, phase referenced to sample 0.
pub fn correct_cfo(signal: &IqSignal, cfo_hz: f64) -> IqSignal {
    let step = -cfo_hz / signal.sample_rate_hz;
    let mut out = signal.clone();
    for (k, s) in out.samples.iter_mut().enumerate() {
        *s *= Complex64::from_polar(1.0, 2.0 * PI * (step * k as f64).fract());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineSync {
    /// Sample of the first preamble symbol in the searched buffer.
    pub start: usize,
    pub peak: f64,
    pub peak_to_sidelobe: f64,
    pub low_confidence: bool,
}

/// Cross-correlates symbol-spaced samples with `repeats` copies of the
/// local sequence for every candidate start in `search`, returning the
/// largest magnitude. Run on matched-filtered, CFO-corrected samples.
pub fn fine_sync(
    samples: &[Complex64],
    local: &MSequence,
    repeats: usize,
    sps: usize,
    search: std::ops::Range<usize>,
) -> Result<FineSync> {
    let n = local.len() * repeats.max(1);
    let need = (n - 1) * sps + 1;
    if samples.len() < need {
        return Err(VlabError::InsufficientSamples {
            needed: need,
            got: samples.len(),
        });
    }
    let hi = search.end.min(samples.len() - need + 1);
    if search.start >= hi {
        return Err(VlabError::param("search", "empty search range"));
    }
    let corr: Vec<f64> = (search.start..hi)
        .map(|d| {
            (0..n)
                .map(|k| samples[d + k * sps] * local.chips[k % local.len()] as f64)
                .sum::<Complex64>()
                .norm()
        })
        .collect();
    let (bi, peak) = corr
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    let side = corr
        .iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(bi) >= sps)
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    let psr = if side > 0.0 { peak / side } else { f64::INFINITY };
    Ok(FineSync {
        start: search.start + bi,
        peak,
        peak_to_sidelobe: psr,
        low_confidence: psr < MIN_PEAK_TO_SIDELOBE,
    })
}

/// Least-squares single tap `sum conj(c) r / sum |c|^2`.
pub fn estimate_channel(rx: &[Complex64], chips: &[f64]) -> Result<Complex64> {
    if rx.len() != chips.len() || rx.is_empty() {
        return Err(VlabError::LengthMismatch {
            left: rx.len(),
            right: chips.len(),
        });
    }
    let num: Complex64 = rx.iter().zip(chips).map(|(r, &c)| r * c).sum();
    let den: f64 = chips.iter().map(|c| c * c).sum();
    let h = num / den;
    if h.norm() < 1e-6 {
        return Err(VlabError::ChannelSingular(h.norm()));
    }
    Ok(h)
}

pub fn equalize(symbols: &[Complex64], h: Complex64) -> Vec<Complex64> {
    symbols.iter().map(|s| s / h).collect()
}

const TRACK_KP: f64 = 0.03;
const TRACK_KI: f64 = 3e-4;

/// Decision-directed second-order phase tracker over equalized symbols;
/// removes residual CFO and slow phase noise left after the preamble.
pub fn track_phase(symbols: &[Complex64], scheme: ModulationScheme) -> Vec<Complex64> {
    let (mut phase, mut freq) = (0.0f64, 0.0f64);
    symbols
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let z = y * Complex64::from_polar(1.0, -phase);
            let d = decide(scheme, k, z);
            let e = (z * d.conj()).im / d.norm_sqr().max(1e-12);
            freq += TRACK_KI * e;
            phase += TRACK_KP * e + freq;
            z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impairments::add_noise;
    use crate::modem::ModulationScheme;
    use crate::rx::testutil::{received, FS};
    use crate::rx::FrameSpec;
    use crate::shaping::{matched_filter, sample_symbols};
    use crate::signal::SimRng;

    fn spec() -> FrameSpec {
        FrameSpec::standard(ModulationScheme::Bpsk, 256)
    }

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    #[test]
    fn coarse_clean_rect_within_two_samples() {
        let mut s = spec();
        s.shape = crate::shaping::PulseShape::rect();
        for seed in 0..10 {
            let r = received(&s, ONE, 0.0, f64::INFINITY, &mut SimRng::new(seed));
            let c = coarse_sync(&r.signal, s.seq_len_samples()).unwrap();
            let frame_start = r.first_peak - s.sps / 2;
            assert!(c.start.abs_diff(frame_start) <= 2, "{} vs {}", c.start, frame_start);
            assert!(c.detected && c.metric > 0.95);
        }
    }

    #[test]
    fn coarse_clean_rrc_within_eighth_of_sequence() {
        let s = spec();
        for seed in 0..20 {
            let r = received(&s, ONE, 0.0, f64::INFINITY, &mut SimRng::new(seed));
            let c = coarse_sync(&r.signal, s.seq_len_samples()).unwrap();
            assert!(
                c.start.abs_diff(r.first_peak) <= s.seq_len_samples() / 8,
                "{} vs {}",
                c.start,
                r.first_peak
            );
        }
    }

    #[test]
    fn coarse_at_zero_db() {
        let s = spec();
        let l = s.seq_len_samples();
        let hits = (0..100)
            .filter(|&seed| {
                let r = received(&s, ONE, 0.0, 0.0, &mut SimRng::new(seed));
                coarse_sync(&r.signal, l).unwrap().start.abs_diff(r.first_peak) <= l / 4
            })
            .count();
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn noise_only_stays_below_threshold() {
        let l = spec().seq_len_samples();
        let below = (0..100)
            .filter(|&seed| {
                let z = IqSignal::new(vec![Complex64::new(0.0, 0.0); 4 * l], FS).unwrap();
                let n = add_noise(&z, 1.0, &mut SimRng::new(seed)).unwrap();
                !coarse_sync(&n, l).unwrap().detected
            })
            .count();
        assert!(below >= 99, "{below}");
    }

    #[test]
    fn cfo_examples() {
        let s = spec();
        let l = s.seq_len_samples();
        let r = received(&s, ONE, 0.0, f64::INFINITY, &mut SimRng::new(1));
        let e = estimate_cfo(&r.signal, r.first_peak, l).unwrap();
        assert!(e.cfo_hz.abs() < FS / (1e6 * l as f64), "{}", e.cfo_hz);
        let r = received(&s, ONE, 100.0, f64::INFINITY, &mut SimRng::new(2));
        let c = coarse_sync(&r.signal, l).unwrap();
        let e = estimate_cfo(&r.signal, c.start, l).unwrap();
        assert!((e.cfo_hz - 100.0).abs() <= 0.5, "{}", e.cfo_hz);
        assert!((e.ambiguity_hz - FS / (2.0 * l as f64)).abs() < 1e-9);
    }

    #[test]
    fn cfo_near_ambiguity_limit() {
        let s = spec();
        let l = s.seq_len_samples();
        let f = 0.9 * FS / (2.0 * l as f64);
        let hits = (0..100)
            .filter(|&seed| {
                let r = received(&s, ONE, f, 20.0, &mut SimRng::new(seed));
                let c = coarse_sync(&r.signal, l).unwrap();
                let e = estimate_cfo(&r.signal, c.start, l).unwrap();
                (e.cfo_hz - f).abs() <= 0.02 * f
            })
            .count();
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn cfo_estimator_unbiased() {
        let s = FrameSpec::standard(ModulationScheme::Bpsk, 8);
        let l = s.seq_len_samples();
        let f = 60.0;
        let mean = (0..1000)
            .map(|seed| {
                let r = received(&s, ONE, f, 20.0, &mut SimRng::new(seed));
                estimate_cfo(&r.signal, r.first_peak, l).unwrap().cfo_hz
            })
            .sum::<f64>()
            / 1000.0;
        assert!((mean / f - 1.0).abs() <= 0.01, "{mean}");
    }

    fn fine_from(r: &crate::rx::testutil::Rx, s: &FrameSpec) -> FineSync {
        let shape = s.pulse();
        let mf = matched_filter(&r.signal, &shape).unwrap();
        let centre = r.first_peak + shape.group_delay_samples();
        let l = s.seq_len_samples();
        let search = centre - l / 4..centre + l / 4;
        fine_sync(&mf.samples, &s.sequence().unwrap(), 2, s.sps, search).unwrap()
    }

    #[test]
    fn fine_sync_exact_when_clean() {
        let s = spec();
        let r = received(&s, ONE, 0.0, f64::INFINITY, &mut SimRng::new(4));
        let f = fine_from(&r, &s);
        assert_eq!(f.start, r.first_peak + s.pulse().group_delay_samples());
        assert!(!f.low_confidence && f.peak_to_sidelobe > 2.0);
    }

    #[test]
    fn fine_sync_at_zero_db() {
        let s = spec();
        let gd = s.pulse().group_delay_samples();
        let hits = (0..100)
            .filter(|&seed| {
                let r = received(&s, ONE, 0.0, 0.0, &mut SimRng::new(seed));
                fine_from(&r, &s).start.abs_diff(r.first_peak + gd) <= 1
            })
            .count();
        assert!(hits >= 90, "{hits}");
    }

    #[test]
    fn half_sample_offset() {
        let s = spec();
        let r = received(&s, ONE, 0.0, f64::INFINITY, &mut SimRng::new(6));
        let shifted = IqSignal::new(crate::signal::fractional_delay(&r.signal.samples, 0.5), FS).unwrap();
        let shape = s.pulse();
        let gd = shape.group_delay_samples();
        let mf = matched_filter(&shifted, &shape).unwrap();
        let centre = r.first_peak + gd;
        let f = fine_sync(&mf.samples, &s.sequence().unwrap(), 2, 8, centre - 100..centre + 100).unwrap();
        assert!(f.start.abs_diff(centre) <= 1);
        let pre = sample_symbols(&mf.samples, f.start, 8, 126, 0);
        let seq = s.sequence().unwrap();
        let chips: Vec<f64> = (0..126).map(|k| seq.chips[k % 63] as f64).collect();
        let h = estimate_channel(&pre, &chips).unwrap();
        let eq = equalize(&pre, h);
        let reference: Vec<Complex64> = chips.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        let evm = crate::signal::evm_rms(&eq, &reference).unwrap();
        assert!(evm < 15.0, "{evm}");
    }

    #[test]
    fn channel_estimate_examples() {
        let chips: Vec<f64> = crate::rx::msequence(6).unwrap().chips_f64();
        let h = Complex64::from_polar(0.5, std::f64::consts::FRAC_PI_3);
        let rx: Vec<Complex64> = chips.iter().map(|&c| h * c).collect();
        assert!((estimate_channel(&rx, &chips).unwrap() - h).norm() < 1e-6);
        let id = equalize(&rx, ONE);
        assert!(id.iter().zip(&rx).all(|(a, b)| (a - b).norm() < 1e-12));
        let zero = vec![Complex64::new(0.0, 0.0); chips.len()];
        assert!(matches!(
            estimate_channel(&zero, &chips),
            Err(VlabError::ChannelSingular(_))
        ));

        let hits = (0..100)
            .filter(|&seed| {
                let mut rng = SimRng::new(seed);
                let h = Complex64::from_polar(rng.uniform_range(0.2, 2.0), rng.uniform_range(-3.0, 3.0));
                let noise_var = h.norm_sqr() / 100.0;
                let rx: Vec<Complex64> = chips.iter().map(|&c| h * c + rng.complex_gaussian(noise_var)).collect();
                ((estimate_channel(&rx, &chips).unwrap() - h).norm() / h.norm()) < 0.05
            })
            .count();
        assert!(hits >= 95, "{hits}");
    }
}
