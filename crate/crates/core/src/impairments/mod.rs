//! RF front-end impairments, individually and as an ordered chain.

mod chain;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, VlabError};
use crate::signal::fir::{filter_same, lowpass};
use crate::signal::{IqSignal, SimRng};

pub use chain::{apply_chain, ImpairmentChain, Stage};

/// Default Rapp smoothness.
pub const DEFAULT_RAPP_P: f64 = 2.0;
/// Internal rate multiple used by the chain's mixer stage.
pub const MIXER_OVERSAMPLE: usize = 8;
const BPF_ATTEN_DB: f64 = 65.0;

/// Adds circular Gaussian noise of the given total variance.
pub fn add_noise(signal: &IqSignal, noise_power: f64, rng: &mut SimRng) -> Result<IqSignal> {
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(VlabError::param("noise_power", "must be finite and non-negative"));
    }
    if noise_power == 0.0 {
        return Ok(signal.clone());
    }
    let mut out = signal.clone();
    for s in &mut out.samples {
        *s += rng.complex_gaussian(noise_power);
    }
    Ok(out)
}

/// Noise variance is the measured signal power over `10^(snr/10)`.
/// `snr_db = +inf` returns the input unchanged.
pub fn add_awgn(signal: &IqSignal, snr_db: f64, rng: &mut SimRng) -> Result<IqSignal> {
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    let p = signal.mean_power();
    if !(p > 0.0 && p.is_finite()) {
        return Err(VlabError::ZeroPower);
    }
    add_noise(signal, p / 10f64.powf(snr_db / 10.0), rng)
}

/// Rotates sample `k` by `2*pi*offset*k/fs + phase0`. Offsets up to and
/// including `fs/2` are accepted.
pub fn apply_cfo(signal: &IqSignal, offset_hz: f64, phase0_rad: f64) -> Result<IqSignal> {
    let fs = signal.sample_rate_hz;
    if !(offset_hz.abs() <= fs / 2.0) {
        return Err(VlabError::param(
            "offset_hz",
            format!("|{offset_hz}| exceeds fs/2 = {}", fs / 2.0),
        ));
    }
    let step = offset_hz / fs;
    let mut out = signal.clone();
    for (k, s) in out.samples.iter_mut().enumerate() {
        // Keep the phase argument small so long buffers stay exact.
        let cycles = (step * k as f64).fract();
        *s *= Complex64::from_polar(1.0, 2.0 * PI * cycles + phase0_rad);
    }
    Ok(out)
}

/// Wiener phase walk with increment variance `2*pi*linewidth/fs`.
pub fn apply_phase_noise(signal: &IqSignal, linewidth_hz: f64, rng: &mut SimRng) -> Result<IqSignal> {
    if !(linewidth_hz >= 0.0 && linewidth_hz.is_finite()) {
        return Err(VlabError::param("linewidth_hz", "must be non-negative"));
    }
    if linewidth_hz == 0.0 {
        return Ok(signal.clone());
    }
    let sigma = (2.0 * PI * linewidth_hz / signal.sample_rate_hz).sqrt();
    let mut phi = 0.0f64;
    let mut out = signal.clone();
    for s in &mut out.samples {
        *s *= Complex64::from_polar(1.0, phi);
        phi += sigma * rng.gaussian();
    }
    Ok(out)
}

fn iq_gains(gain_imbalance_db: f64) -> (f64, f64) {
    (
        10f64.powf(gain_imbalance_db / 40.0),
        10f64.powf(-gain_imbalance_db / 40.0),
    )
}

/// `I' = gI*I + Re(dc)`, `Q' = gQ*(Q cos e + I sin e) + Im(dc)` with the
/// imbalance split evenly between the rails.
pub fn apply_iq_impairments(
    signal: &IqSignal,
    gain_imbalance_db: f64,
    quadrature_offset_deg: f64,
    dc_offset: Complex64,
) -> Result<IqSignal> {
    let (gi, gq) = iq_gains(gain_imbalance_db);
    let (se, ce) = quadrature_offset_deg.to_radians().sin_cos();
    let mut out = signal.clone();
    for s in &mut out.samples {
        let (i, q) = (s.re, s.im);
        *s = Complex64::new(gi * i + dc_offset.re, gq * (q * ce + i * se) + dc_offset.im);
    }
    Ok(out)
}

/// Analytic image rejection ratio of [`apply_iq_impairments`], in dB.
pub fn image_rejection_ratio_db(gain_imbalance_db: f64, quadrature_offset_deg: f64) -> f64 {
    let (gi, gq) = iq_gains(gain_imbalance_db);
    let e = quadrature_offset_deg.to_radians();
    let want = Complex64::new(gi, 0.0) + gq * Complex64::from_polar(1.0, e);
    let image = Complex64::new(gi, 0.0) - gq * Complex64::from_polar(1.0, -e);
    10.0 * (want.norm_sqr() / image.norm_sqr()).log10()
}

/// Mid-rise uniform quantizer per rail with `2^bits` levels spanning
/// `[-full_scale, full_scale]`; inputs beyond the range clip to the
/// outermost level.
pub fn quantize(signal: &IqSignal, bits: u32, full_scale: f64) -> Result<IqSignal> {
    if !(1..=16).contains(&bits) {
        return Err(VlabError::param("bits", "must be in [1, 16]"));
    }
    if !(full_scale > 0.0 && full_scale.is_finite()) {
        return Err(VlabError::param("full_scale", "must be positive"));
    }
    let delta = 2.0 * full_scale / (1u64 << bits) as f64;
    let top = full_scale - delta / 2.0;
    let q = |x: f64| (delta * ((x / delta).floor() + 0.5)).clamp(-top, top);
    let mut out = signal.clone();
    for s in &mut out.samples {
        *s = Complex64::new(q(s.re), q(s.im));
    }
    Ok(out)
}

/// Rapp AM/AM, saturation amplitude chosen so that the mean input power sits
/// `input_backoff_db` below saturation power. Negative backoff overdrives.
pub fn pa_nonlinearity(signal: &IqSignal, smoothness_p: f64, input_backoff_db: f64) -> Result<IqSignal> {
    let p_in = signal.mean_power();
    if !(p_in > 0.0) {
        return Err(VlabError::ZeroPower);
    }
    let a_sat = (p_in * 10f64.powf(input_backoff_db / 10.0)).sqrt();
    rapp(signal, smoothness_p, a_sat)
}

/// Rapp AM/AM with an absolute saturation amplitude.
pub fn rapp(signal: &IqSignal, smoothness_p: f64, a_sat: f64) -> Result<IqSignal> {
    if !(smoothness_p > 0.0) {
        return Err(VlabError::param("smoothness_p", "must be positive"));
    }
    if !(a_sat > 0.0 && a_sat.is_finite()) {
        return Err(VlabError::param("a_sat", "must be positive"));
    }
    let two_p = 2.0 * smoothness_p;
    let mut out = signal.clone();
    for s in &mut out.samples {
        let r = s.norm() / a_sat;
        *s /= (1.0 + r.powf(two_p)).powf(1.0 / two_p);
    }
    Ok(out)
}

/// Translates by `lo_norm_freq` (cycles/sample) and adds copies at
/// `k*lo_norm_freq`, k = 2, 3, ..., with the given levels relative to the
/// fundamental.
pub fn mixer_upconvert(signal: &IqSignal, lo_norm_freq: f64, harmonic_levels_db: &[f64]) -> Result<IqSignal> {
    let mut comps = vec![(lo_norm_freq, 1.0)];
    for (i, l) in harmonic_levels_db.iter().enumerate() {
        comps.push(((i + 2) as f64 * lo_norm_freq, 10f64.powf(l / 20.0)));
    }
    for (k, (f, _)) in comps.iter().enumerate() {
        if f.abs() >= 0.5 {
            return Err(VlabError::param(
                "lo_norm_freq",
                format!("component {} at {f} cycles/sample is beyond Nyquist", k + 1),
            ));
        }
    }
    let mut out = signal.clone();
    for (n, s) in out.samples.iter_mut().enumerate() {
        let x = *s;
        *s = comps
            .iter()
            .map(|&(f, a)| x * Complex64::from_polar(a, 2.0 * PI * (f * n as f64).fract()))
            .sum();
    }
    Ok(out)
}

/// Kaiser windowed-sinc band-pass (65 dB stopband), zero group delay.
/// Transition width is a quarter of the passband, at least 0.2% of fs.
pub fn bandpass_filter(signal: &IqSignal, f_lo_hz: f64, f_hi_hz: f64) -> Result<IqSignal> {
    let fs = signal.sample_rate_hz;
    if !(f_hi_hz > f_lo_hz) || f_lo_hz < -fs / 2.0 || f_hi_hz > fs / 2.0 {
        return Err(VlabError::param("bpf", "need -fs/2 <= f_lo < f_hi <= fs/2"));
    }
    let taps = bandpass_taps(f_lo_hz / fs, f_hi_hz / fs);
    let mut out = signal.clone();
    out.samples = filter_same(&signal.samples, &taps);
    Ok(out)
}

pub(crate) fn bandpass_taps(lo: f64, hi: f64) -> Vec<Complex64> {
    let bw = hi - lo;
    let transition = (bw / 4.0).max(0.002);
    let centre = (lo + hi) / 2.0;
    let lp = lowpass(bw / 2.0 + transition / 2.0, transition, BPF_ATTEN_DB);
    let mid = (lp.len() - 1) as f64 / 2.0;
    lp.iter()
        .enumerate()
        .map(|(n, &h)| Complex64::from_polar(h, 2.0 * PI * centre * (n as f64 - mid)))
        .collect()
}
