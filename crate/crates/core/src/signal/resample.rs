//! Rational polyphase resampling and fractional delay, both built on the
//! Kaiser windowed-sinc kernel from [`super::fir`].

use num_complex::Complex64;

use super::fir::{bessel_i0, kaiser_beta, lowpass, sinc};
use super::IqSignal;
use crate::error::{Result, VlabError};

const MAX_FACTOR: u64 = 4096;
const RATIO_TOLERANCE: f64 = 1e-9;
const STOPBAND_DB: f64 = 70.0;

/// Best rational approximation `p/q` of `x` with both terms <= `MAX_FACTOR`.
pub fn rational_approx(x: f64) -> Option<(u64, u64)> {
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a > MAX_FACTOR as f64 {
            break;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if h2 > MAX_FACTOR || k2 > MAX_FACTOR {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        if ((h1 as f64 / k1 as f64) - x).abs() <= RATIO_TOLERANCE * x {
            return Some((h1, k1));
        }
        let frac = v - v.floor();
        if frac < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    if k1 > 0 && ((h1 as f64 / k1 as f64) - x).abs() <= RATIO_TOLERANCE * x {
        Some((h1, k1))
    } else {
        None
    }
}

/// Resamples to `new_rate_hz`. The ratio must be rational with numerator and
/// denominator at most 4096 (relative error 1e-9). Passband flat to
/// 0.4 x min(old, new) rate, stopband from the new Nyquist frequency, 70 dB.
pub fn resample(signal: &IqSignal, new_rate_hz: f64) -> Result<IqSignal> {
    if !(new_rate_hz > 0.0) || !new_rate_hz.is_finite() {
        return Err(VlabError::param("new_rate_hz", "must be positive"));
    }
    let ratio = new_rate_hz / signal.sample_rate_hz;
    let (p, q) = rational_approx(ratio)
        .ok_or_else(|| VlabError::param("new_rate_hz", format!("ratio {ratio} not representable as p/q <= 4096")))?;
    let mut out = signal.clone();
    out.sample_rate_hz = new_rate_hz;
    if p == q {
        return Ok(out);
    }
    out.samples = resample_samples(&signal.samples, p as usize, q as usize);
    Ok(out)
}

pub(crate) fn resample_samples(x: &[Complex64], p: usize, q: usize) -> Vec<Complex64> {
    // Work in units of the upsampled rate p * fs_old.
    let min_rate = (1.0f64).min(p as f64 / q as f64) / p as f64;
    let h: Vec<f64> = lowpass(0.45 * min_rate, 0.1 * min_rate, STOPBAND_DB)
        .into_iter()
        .map(|t| t * p as f64)
        .collect();
    let len = h.len() as i64;
    let delay = (len - 1) / 2;
    let out_len = (x.len() * p).div_ceil(q);
    let (p, q) = (p as i64, q as i64);
    (0..out_len as i64)
        .map(|m| {
            let t = m * q + delay;
            let n_hi = (t / p).min(x.len() as i64 - 1);
            let n_lo = ((t - len + 1 + p - 1).div_euclid(p)).max(0);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut n = n_lo;
            while n <= n_hi {
                acc += x[n as usize] * h[(t - n * p) as usize];
                n += 1;
            }
            acc
        })
        .collect()
}

const FRAC_HALF_LEN: i64 = 16;

/// Delays `x` by `delay` samples (may be fractional) using a 33-tap Kaiser
/// windowed-sinc interpolator. Output keeps the input length.
pub fn fractional_delay(x: &[Complex64], delay: f64) -> Vec<Complex64> {
    let d_int = delay.floor() as i64;
    let frac = delay - delay.floor();
    let n = x.len() as i64;
    if frac.abs() < 1e-12 {
        return (0..n)
            .map(|i| {
                let j = i - d_int;
                if j >= 0 && j < n {
                    x[j as usize]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
    }
    let beta = kaiser_beta(STOPBAND_DB);
    let norm = bessel_i0(beta);
    let span = (FRAC_HALF_LEN + 1) as f64;
    // y[i] = x(i - delay) = sum_k x[i - d_int - k] h(k - frac)
    let kernel: Vec<f64> = (-FRAC_HALF_LEN..=FRAC_HALF_LEN + 1)
        .map(|k| {
            let t = k as f64 - frac;
            let r = t / span;
            let w = if r.abs() < 1.0 {
                bessel_i0(beta * (1.0 - r * r).sqrt()) / norm
            } else {
                0.0
            };
            sinc(t) * w
        })
        .collect();
    (0..n)
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (ki, k) in (-FRAC_HALF_LEN..=FRAC_HALF_LEN + 1).enumerate() {
                let j = i - d_int - k;
                if j >= 0 && j < n {
                    acc += x[j as usize] * kernel[ki];
                }
            }
            acc
        })
        .collect()
}
