//! Spectral views: Welch PSD and spectrogram.
//!
//! Conventions: forward FFT unnormalised, PSD two-sided and centred on 0 Hz,
//! powers relative to unit impedance.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::IqSignal;
use crate::error::{Result, VlabError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rect,
    #[default]
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; len],
            // Periodic Hann: sums to a constant under 50 % overlap.
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freq_bins_hz: Vec<f64>,
    /// dB relative to unit power per Hz.
    pub power_db: Vec<f64>,
    pub resolution_bw_hz: f64,
}

impl PsdEstimate {
    pub fn bin_width_hz(&self) -> f64 {
        if self.freq_bins_hz.len() < 2 {
            return 0.0;
        }
        self.freq_bins_hz[1] - self.freq_bins_hz[0]
    }

    /// Linear power integrated over `[lo, hi]` Hz.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        let df = self.bin_width_hz();
        self.freq_bins_hz
            .iter()
            .zip(&self.power_db)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| 10f64.powf(p / 10.0) * df)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        let df = self.bin_width_hz();
        self.power_db.iter().map(|p| 10f64.powf(p / 10.0) * df).sum()
    }

    /// Frequency of the strongest bin.
    pub fn peak_freq_hz(&self) -> f64 {
        let (i, _) =
            self.power_db.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
            );
        self.freq_bins_hz[i]
    }

    /// Two-sided bandwidth containing `fraction` of total power, grown
    /// symmetrically around the power centroid.
    pub fn occupied_bandwidth_hz(&self, fraction: f64) -> f64 {
        let lin: Vec<f64> = self.power_db.iter().map(|p| 10f64.powf(p / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        let mut sorted = lin.clone();
        // Smallest set of bins holding `fraction` of the power.
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut acc = 0.0;
        let mut count = 0;
        for v in sorted {
            acc += v;
            count += 1;
            if acc >= fraction * total {
                break;
            }
        }
        count as f64 * self.bin_width_hz()
    }
}

fn shifted_freqs(n: usize, fs: f64) -> Vec<f64> {
    (0..n).map(|k| (k as f64 - (n / 2) as f64) * fs / n as f64).collect()
}

fn fftshift<T: Copy>(v: &[T]) -> Vec<T> {
    let n = v.len();
    let h = n - n / 2;
    v[h..].iter().chain(&v[..h]).copied().collect()
}

/// Averaged modified periodogram. Integrated PSD equals the window-weighted
/// mean-square of the samples.
pub fn welch_psd(signal: &IqSignal, segment_len: usize, overlap_frac: f64, window: Window) -> Result<PsdEstimate> {
    if segment_len == 0 {
        return Err(VlabError::param("segment_len", "must be positive"));
    }
    if !(0.0..1.0).contains(&overlap_frac) {
        return Err(VlabError::param("overlap_frac", "must lie in [0, 1)"));
    }
    if signal.len() < segment_len {
        return Err(VlabError::InsufficientSamples {
            needed: segment_len,
            got: signal.len(),
        });
    }
    let hop = (((1.0 - overlap_frac) * segment_len as f64).round() as usize).max(1);
    let w = window.coefficients(segment_len);
    let w_energy: f64 = w.iter().map(|v| v * v).sum();
    let w_sum: f64 = w.iter().sum();
    let fs = signal.sample_rate_hz;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(segment_len);
    let mut acc = vec![0.0; segment_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut count = 0usize;
    let mut start = 0;
    while start + segment_len <= signal.len() {
        for (b, (x, wv)) in buf.iter_mut().zip(signal.samples[start..].iter().zip(&w)) {
            *b = x * wv;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 1.0 / (count as f64 * fs * w_energy);
    let lin: Vec<f64> = acc.iter().map(|a| a * scale).collect();
    let power_db = fftshift(&lin)
        .into_iter()
        .map(|p| 10.0 * p.max(1e-300).log10())
        .collect();
    Ok(PsdEstimate {
        freq_bins_hz: shifted_freqs(segment_len, fs),
        power_db,
        resolution_bw_hz: fs * w_energy / (w_sum * w_sum),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub freq_bins_hz: Vec<f64>,
    /// Start time of each frame.
    pub frame_times_s: Vec<f64>,
    /// `power_db[frame][bin]`.
    pub power_db: Vec<Vec<f64>>,
    pub hop: usize,
    pub fft_len: usize,
}

impl Spectrogram {
    pub fn ridge_bins(&self) -> Vec<usize> {
        self.power_db
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
                    )
                    .0
            })
            .collect()
    }

    pub fn ridge_freqs_hz(&self) -> Vec<f64> {
        self.ridge_bins().into_iter().map(|b| self.freq_bins_hz[b]).collect()
    }
}

/// Short-time power spectra; frame `k` covers samples `[k*hop, k*hop+fft_len)`.
pub fn spectrogram(signal: &IqSignal, fft_len: usize, hop: usize, window: Window) -> Result<Spectrogram> {
    if signal.is_empty() {
        return Err(VlabError::EmptySignal);
    }
    if hop == 0 || fft_len < hop {
        return Err(VlabError::param("hop", "require fft_len >= hop >= 1"));
    }
    if signal.len() < fft_len {
        return Err(VlabError::InsufficientSamples {
            needed: fft_len,
            got: signal.len(),
        });
    }
    let w = window.coefficients(fft_len);
    let w_energy: f64 = w.iter().map(|v| v * v).sum();
    let fs = signal.sample_rate_hz;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    let mut rows = Vec::new();
    let mut times = Vec::new();
    let mut start = 0;
    while start + fft_len <= signal.len() {
        for (b, (x, wv)) in buf.iter_mut().zip(signal.samples[start..].iter().zip(&w)) {
            *b = x * wv;
        }
        fft.process(&mut buf);
        let lin: Vec<f64> = buf.iter().map(|b| b.norm_sqr() / (fs * w_energy)).collect();
        rows.push(
            fftshift(&lin)
                .into_iter()
                .map(|p| 10.0 * p.max(1e-300).log10())
                .collect(),
        );
        times.push(start as f64 / fs);
        start += hop;
    }
    Ok(Spectrogram {
        freq_bins_hz: shifted_freqs(fft_len, fs),
        frame_times_s: times,
        power_db: rows,
        hop,
        fft_len,
    })
}
