//! Scalar and statistical measurements: CCDF, EVM, eye grid, BER.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{mean_power, IqSignal};
use crate::error::{Result, VlabError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfCurve {
    /// dB above mean power.
    pub threshold_db: Vec<f64>,
    pub prob_exceed: Vec<f64>,
}

/// Probability that instantaneous power exceeds `mean * 10^(t/10)` for each
/// threshold `t`.
pub fn papr_ccdf(signal: &IqSignal, thresholds_db: &[f64]) -> Result<CcdfCurve> {
    if signal.is_empty() {
        return Err(VlabError::EmptySignal);
    }
    let mean = signal.mean_power();
    if mean <= 0.0 {
        return Err(VlabError::ZeroPower);
    }
    let mut ratios: Vec<f64> = signal.samples.iter().map(|s| s.norm_sqr() / mean).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = ratios.len() as f64;
    let mut order: Vec<usize> = (0..thresholds_db.len()).collect();
    order.sort_by(|&a, &b| thresholds_db[a].partial_cmp(&thresholds_db[b]).unwrap());
    let mut threshold_db = Vec::with_capacity(order.len());
    let mut prob_exceed = Vec::with_capacity(order.len());
    for i in order {
        let t = 10f64.powf(thresholds_db[i] / 10.0);
        // First index with ratio > t.
        let idx = ratios.partition_point(|&r| r <= t);
        threshold_db.push(thresholds_db[i]);
        prob_exceed.push((ratios.len() - idx) as f64 / n);
    }
    Ok(CcdfCurve {
        threshold_db,
        prob_exceed,
    })
}

/// Power level (dB above mean) exceeded with probability `prob`.
pub fn papr_at_probability(samples: &[Complex64], prob: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(VlabError::EmptySignal);
    }
    let mean = mean_power(samples);
    if mean <= 0.0 {
        return Err(VlabError::ZeroPower);
    }
    let mut ratios: Vec<f64> = samples.iter().map(|s| s.norm_sqr() / mean).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = ((1.0 - prob) * ratios.len() as f64).floor() as usize;
    Ok(10.0 * ratios[k.min(ratios.len() - 1)].log10())
}

/// Default threshold grid for CCDF views: 0 to 12 dB in 0.25 dB steps.
pub fn default_ccdf_thresholds() -> Vec<f64> {
    (0..=48).map(|k| k as f64 * 0.25).collect()
}

/// RMS error vector magnitude in percent, normalised by reference RMS.
pub fn evm_rms(rx: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if rx.len() != reference.len() {
        return Err(VlabError::LengthMismatch {
            left: rx.len(),
            right: reference.len(),
        });
    }
    if rx.is_empty() {
        return Err(VlabError::EmptySignal);
    }
    let err: f64 = rx.iter().zip(reference).map(|(r, s)| (r - s).norm_sqr()).sum();
    let ref_p: f64 = reference.iter().map(|s| s.norm_sqr()).sum();
    if ref_p <= 0.0 {
        return Err(VlabError::ZeroPower);
    }
    Ok(100.0 * (err / ref_p).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rail {
    I,
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeGrid {
    /// Each row spans two symbol periods.
    pub traces: Vec<Vec<f64>>,
    pub samples_per_symbol: usize,
    pub rail: Rail,
}

impl EyeGrid {
    /// Vertical opening at `col`: smallest positive sample minus largest
    /// negative sample. Negative when the eye is closed.
    pub fn opening_at(&self, col: usize) -> f64 {
        let mut min_pos = f64::INFINITY;
        let mut max_neg = f64::NEG_INFINITY;
        for row in &self.traces {
            let v = row[col];
            if v >= 0.0 {
                min_pos = min_pos.min(v);
            } else {
                max_neg = max_neg.max(v);
            }
        }
        if min_pos.is_infinite() || max_neg.is_infinite() {
            return 0.0;
        }
        min_pos - max_neg
    }
}

/// Non-overlapping two-symbol traces starting at `offset`; a partial tail is
/// discarded.
pub fn eye_diagram(signal: &IqSignal, samples_per_symbol: usize, offset: usize, rail: Rail) -> Result<EyeGrid> {
    if samples_per_symbol < 2 {
        return Err(VlabError::param("samples_per_symbol", "must be at least 2"));
    }
    let width = 2 * samples_per_symbol;
    if signal.len() < offset + width {
        return Err(VlabError::InsufficientSamples {
            needed: offset + width,
            got: signal.len(),
        });
    }
    let traces = signal.samples[offset..]
        .chunks_exact(width)
        .map(|c| {
            c.iter()
                .map(|s| match rail {
                    Rail::I => s.re,
                    Rail::Q => s.im,
                })
                .collect()
        })
        .collect();
    Ok(EyeGrid {
        traces,
        samples_per_symbol,
        rail,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerCount {
    pub errors: usize,
    pub bits: usize,
    pub rate: f64,
}

pub fn measure_ber(tx: &[u8], rx: &[u8]) -> Result<BerCount> {
    if tx.len() != rx.len() {
        return Err(VlabError::LengthMismatch {
            left: tx.len(),
            right: rx.len(),
        });
    }
    if tx.is_empty() {
        return Err(VlabError::EmptySignal);
    }
    let errors = tx.iter().zip(rx).filter(|(a, b)| (*a & 1) != (*b & 1)).count();
    Ok(BerCount {
        errors,
        bits: tx.len(),
        rate: errors as f64 / tx.len() as f64,
    })
}

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Complementary error function (W. J. Cody's rational approximations via
/// the Numerical Recipes erfc Chebyshev fit; relative error < 1.2e-7).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.265_512_23
            + t * (1.000_023_68
                + t * (0.374_091_96
                    + t * (0.096_784_18
                        + t * (-0.186_288_06
                            + t * (0.278_868_07
                                + t * (-1.135_203_98
                                    + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SimRng;

    fn sig(v: Vec<Complex64>) -> IqSignal {
        IqSignal::new(v, 1.0).unwrap()
    }

    #[test]
    fn ccdf_constant_envelope() {
        let s = sig((0..100).map(|k| Complex64::from_polar(2.0, k as f64)).collect());
        let c = papr_ccdf(&s, &[-1.0, -0.01, 0.01, 1.0]).unwrap();
        assert_eq!(c.prob_exceed, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn ccdf_two_level() {
        // Half at power 2P, half at 0: mean P.
        let mut v = vec![Complex64::new(2f64.sqrt(), 0.0); 50];
        v.extend(vec![Complex64::new(0.0, 0.0); 50]);
        let c = papr_ccdf(&sig(v), &[0.0, 1.0, 2.0, 3.0, 3.02, 5.0]).unwrap();
        assert_eq!(c.prob_exceed, vec![0.5, 0.5, 0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn ccdf_zero_power_errors() {
        let s = sig(vec![Complex64::new(0.0, 0.0); 4]);
        assert!(matches!(papr_ccdf(&s, &[0.0]), Err(VlabError::ZeroPower)));
    }

    #[test]
    fn evm_examples() {
        let r: Vec<Complex64> = (0..4)
            .map(|k| {
                Complex64::from_polar(
                    1.0,
                    std::f64::consts::FRAC_PI_4 + k as f64 * std::f64::consts::FRAC_PI_2,
                )
            })
            .collect();
        assert_eq!(evm_rms(&r, &r).unwrap(), 0.0);
        let off: Vec<Complex64> = r.iter().map(|s| s + Complex64::new(0.06, 0.08)).collect();
        assert!((evm_rms(&off, &r).unwrap() - 10.0).abs() < 1e-9);
        assert!(evm_rms(&r[..3], &r).is_err());
    }

    #[test]
    fn evm_tracks_snr() {
        // Oracle: EVM% = 100/sqrt(SNR) for unit-energy symbols under AWGN.
        let mut rng = SimRng::new(3);
        let n = 100_000;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let reference: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(if rng.bit() == 0 { s } else { -s }, if rng.bit() == 0 { s } else { -s }))
            .collect();
        let rx: Vec<Complex64> = reference.iter().map(|x| x + rng.complex_gaussian(0.01)).collect();
        let evm = evm_rms(&rx, &reference).unwrap();
        assert!((evm - 10.0).abs() < 0.5, "{evm}");
    }

    #[test]
    fn ber_examples() {
        let a: Vec<u8> = (0..1000).map(|i| (i % 3 == 0) as u8).collect();
        assert_eq!(measure_ber(&a, &a).unwrap().errors, 0);
        let inv: Vec<u8> = a.iter().map(|b| 1 - b).collect();
        let c = measure_ber(&a, &inv).unwrap();
        assert_eq!((c.errors, c.rate), (1000, 1.0));
        let mut one = a.clone();
        one[500] ^= 1;
        assert_eq!(measure_ber(&a, &one).unwrap().rate, 0.001);
        assert!(measure_ber(&a, &a[1..]).is_err());
    }

    #[test]
    fn eye_alternating_rect_traces_identical() {
        let sps = 4;
        let v: Vec<Complex64> = (0..40)
            .flat_map(|k| vec![Complex64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0); sps])
            .collect();
        let eye = eye_diagram(&sig(v), sps, 0, Rail::I).unwrap();
        assert_eq!(eye.traces.len(), 20);
        assert!(eye.traces.iter().all(|t| t == &eye.traces[0] && t.len() == 8));
        assert!(eye_diagram(&sig(vec![Complex64::new(0.0, 0.0); 10]), 1, 0, Rail::I).is_err());
    }

    #[test]
    fn q_function_reference_values() {
        // Q(sqrt 2) = 0.0786496 (tabulated).
        assert!((q_function(2f64.sqrt()) - 0.078_649_6).abs() < 1e-6);
        assert!((q_function(0.0) - 0.5).abs() < 1e-7);
        assert!((q_function(3.0) - 1.349_898e-3).abs() < 1e-8);
    }
}
