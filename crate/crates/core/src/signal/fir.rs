//! FIR helpers: linear convolution (direct or FFT overlap-add) and Kaiser
//! windowed-sinc design.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

const FFT_THRESHOLD_TAPS: usize = 48;

/// Full linear convolution, output length `x.len() + h.len() - 1`.
pub fn convolve(x: &[Complex64], h: &[f64]) -> Vec<Complex64> {
    let hc: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    convolve_complex(x, &hc)
}

pub fn convolve_complex(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    if h.len() < FFT_THRESHOLD_TAPS || x.len() < 2 * h.len() {
        direct(x, h)
    } else {
        overlap_add(x, h)
    }
}

/// Convolution trimmed to the input length with the filter's centre tap
/// aligned to each input sample (zero group delay for odd symmetric taps).
pub fn filter_same(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    let full = convolve_complex(x, h);
    let d = (h.len() - 1) / 2;
    full[d..d + x.len()].to_vec()
}

fn direct(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    let mut y = vec![Complex64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (i, &xv) in x.iter().enumerate() {
        if xv == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (j, &hv) in h.iter().enumerate() {
            y[i + j] += xv * hv;
        }
    }
    y
}

fn overlap_add(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    let fft_len = (4 * h.len()).next_power_of_two();
    let step = fft_len - h.len() + 1;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);

    let mut hf = vec![Complex64::new(0.0, 0.0); fft_len];
    hf[..h.len()].copy_from_slice(h);
    fwd.process(&mut hf);

    let out_len = x.len() + h.len() - 1;
    let mut y = vec![Complex64::new(0.0, 0.0); out_len];
    let scale = 1.0 / fft_len as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    let mut start = 0;
    while start < x.len() {
        let end = (start + step).min(x.len());
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        buf[..end - start].copy_from_slice(&x[start..end]);
        fwd.process(&mut buf);
        for (b, hv) in buf.iter_mut().zip(&hf) {
            *b *= hv;
        }
        inv.process(&mut buf);
        let valid = (end - start + h.len() - 1).min(out_len - start);
        for k in 0..valid {
            y[start + k] += buf[k] * scale;
        }
        start = end;
    }
    y
}

/// Zeroth-order modified Bessel function of the first kind.
pub fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Odd tap count needed for a Kaiser design with the given normalised
/// transition width (cycles/sample).
pub fn kaiser_len(atten_db: f64, transition: f64) -> usize {
    let n = ((atten_db - 7.95) / (2.285 * 2.0 * PI * transition)).ceil() as usize + 1;
    n | 1
}

pub fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = bessel_i0(beta);
    let m = (len - 1) as f64;
    (0..len)
        .map(|n| {
            let r = 2.0 * n as f64 / m - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Kaiser windowed-sinc lowpass with unit DC gain. `cutoff` and `transition`
/// in cycles/sample; `cutoff` is the -6 dB point.
pub fn lowpass(cutoff: f64, transition: f64, atten_db: f64) -> Vec<f64> {
    let len = kaiser_len(atten_db, transition);
    let win = kaiser_window(len, kaiser_beta(atten_db));
    let mid = (len - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..len)
        .map(|n| 2.0 * cutoff * sinc(2.0 * cutoff * (n as f64 - mid)) * win[n])
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    taps
}
