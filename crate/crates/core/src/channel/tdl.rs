use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VlabError};
use crate::signal::{db_to_linear, fractional_delay, IqSignal, SimRng};

/// Sinusoids per Jakes tap.
pub const JAKES_SINUSOIDS: usize = 32;
/// Reflection-path power relative to the fan's line-of-sight path.
const FAN_REFLECTION_POWER: f64 = 0.5;
const FAN_NORM_GRID: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanParams {
    pub rot_hz: f64,
    pub blades: u32,
    pub f_max_hz: f64,
    pub duty: f64,
}

impl FanParams {
    pub fn blade_rate_hz(&self) -> f64 {
        self.rot_hz * self.blades as f64
    }
}

/// Time variation of one tap's complex gain.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Doppler {
    /// Time-invariant Rayleigh gain drawn once per seed.
    #[default]
    Static,
    /// Time-invariant deterministic gain `sqrt(p) * e^{j phase}`.
    Fixed {
        #[serde(default)]
        phase_rad: f64,
    },
    /// Sum-of-sinusoids Rayleigh process with classical spectrum.
    Jakes {
        f_max_hz: f64,
    },
    Fan(FanParams),
}

impl Doppler {
    fn f_max(&self) -> f64 {
        match self {
            Doppler::Static | Doppler::Fixed { .. } => 0.0,
            Doppler::Jakes { f_max_hz } => *f_max_hz,
            Doppler::Fan(p) => p.f_max_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay_s: f64,
    pub power_db: f64,
    #[serde(default)]
    pub doppler: Doppler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdlChannel {
    pub taps: Vec<Tap>,
    #[serde(default)]
    pub seed: u64,
}

impl TdlChannel {
    pub fn new(taps: Vec<Tap>, seed: u64) -> Self {
        TdlChannel { taps, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps.is_empty() {
            return Err(VlabError::param("taps", "at least one tap required"));
        }
        let mut last = -1.0;
        for t in &self.taps {
            if !(t.delay_s >= 0.0 && t.delay_s > last) {
                return Err(VlabError::param(
                    "taps",
                    "delays must be non-negative and strictly increasing",
                ));
            }
            if !t.power_db.is_finite() {
                return Err(VlabError::param("taps", "power_db must be finite"));
            }
            last = t.delay_s;
            match t.doppler {
                Doppler::Jakes { f_max_hz } if !(f_max_hz >= 0.0) => {
                    return Err(VlabError::param("taps", "jakes f_max_hz must be non-negative"));
                }
                Doppler::Fan(p) => validate_fan(&p)?,
                _ => {}
            }
        }
        Ok(())
    }

    /// Linear tap powers normalized to unit sum.
    pub fn normalized_powers(&self) -> Vec<f64> {
        let p: Vec<f64> = self.taps.iter().map(|t| db_to_linear(t.power_db)).collect();
        let s: f64 = p.iter().sum();
        p.iter().map(|v| v / s).collect()
    }

    pub fn rms_delay_spread_s(&self) -> f64 {
        let p = self.normalized_powers();
        let mean: f64 = p.iter().zip(&self.taps).map(|(w, t)| w * t.delay_s).sum();
        let second: f64 = p.iter().zip(&self.taps).map(|(w, t)| w * t.delay_s * t.delay_s).sum();
        (second - mean * mean).max(0.0).sqrt()
    }

    /// Applies the channel with its own seed.
    pub fn apply(&self, signal: &IqSignal) -> Result<IqSignal> {
        apply_tdl(signal, self, &mut SimRng::new(self.seed))
    }
}

fn validate_fan(p: &FanParams) -> Result<()> {
    if !(p.rot_hz >= 0.0) || !(p.f_max_hz >= 0.0) || !(0.0..=1.0).contains(&p.duty) {
        return Err(VlabError::param(
            "fan",
            "need rot_hz >= 0, f_max_hz >= 0, duty in [0, 1]",
        ));
    }
    Ok(())
}

struct FanProcess {
    a_los: Complex64,
    a_ref: Complex64,
    fb: f64,
    f_max: f64,
    duty: f64,
    gate_phase: f64,
}

impl FanProcess {
    fn new(p: &FanParams, rng: &mut SimRng) -> Self {
        let los_phase = rng.uniform_range(0.0, 2.0 * PI);
        let ref_phase = rng.uniform_range(0.0, 2.0 * PI);
        let gate_phase = rng.uniform();
        let mut fp = FanProcess {
            a_los: Complex64::from_polar(1.0, los_phase),
            a_ref: Complex64::from_polar(FAN_REFLECTION_POWER.sqrt(), ref_phase),
            fb: p.blade_rate_hz(),
            f_max: p.f_max_hz,
            duty: p.duty,
            gate_phase,
        };
        // Unit mean power over one blade period.
        let mean = if fp.fb > 0.0 {
            (0..FAN_NORM_GRID)
                .map(|i| fp.raw(i as f64 / FAN_NORM_GRID as f64 / fp.fb).norm_sqr())
                .sum::<f64>()
                / FAN_NORM_GRID as f64
        } else {
            fp.raw(0.0).norm_sqr()
        };
        let k = 1.0 / mean.sqrt();
        fp.a_los *= k;
        fp.a_ref *= k;
        fp
    }

    fn raw(&self, t: f64) -> Complex64 {
        if self.fb <= 0.0 {
            return self.a_los
                + if self.duty >= 1.0 {
                    self.a_ref
                } else {
                    Complex64::new(0.0, 0.0)
                };
        }
        let cyc = (self.fb * t + self.gate_phase).fract();
        let gated = cyc < self.duty;
        if !gated {
            return self.a_los;
        }
        // Instantaneous Doppler f_max * sin(2 pi fb t).
        let phi = self.f_max / self.fb * (1.0 - (2.0 * PI * (self.fb * t).fract()).cos());
        self.a_los + self.a_ref * Complex64::from_polar(1.0, phi)
    }
}

fn gain_process(d: &Doppler, power: f64, n: usize, fs: f64, rng: &mut SimRng) -> Vec<Complex64> {
    let amp = power.sqrt();
    match d {
        Doppler::Static => vec![rng.complex_gaussian(power); n],
        Doppler::Fixed { phase_rad } => vec![Complex64::from_polar(amp, *phase_rad); n],
        Doppler::Jakes { f_max_hz } => {
            let m = JAKES_SINUSOIDS;
            let theta = rng.uniform_range(0.0, 2.0 * PI);
            let comps: Vec<(f64, f64)> = (0..m)
                .map(|i| {
                    let alpha = (2.0 * PI * i as f64 + theta) / m as f64;
                    (f_max_hz * alpha.cos() / fs, rng.uniform_range(0.0, 2.0 * PI))
                })
                .collect();
            let scale = amp / (m as f64).sqrt();
            (0..n)
                .map(|k| {
                    comps
                        .iter()
                        .map(|&(f, ph)| Complex64::from_polar(scale, 2.0 * PI * (f * k as f64).fract() + ph))
                        .sum()
                })
                .collect()
        }
        Doppler::Fan(p) => {
            let fp = FanProcess::new(p, rng);
            (0..n).map(|k| amp * fp.raw(k as f64 / fs)).collect()
        }
    }
}

/// Sum of delayed, time-varying weighted copies; output keeps the input
/// length. Requires the largest delay below a tenth of the duration.
pub fn apply_tdl(signal: &IqSignal, channel: &TdlChannel, rng: &mut SimRng) -> Result<IqSignal> {
    channel.validate()?;
    if signal.is_empty() {
        return Err(VlabError::EmptySignal);
    }
    let max_delay = channel.taps.last().unwrap().delay_s;
    if max_delay >= signal.duration_s() / 10.0 {
        return Err(VlabError::param(
            "taps",
            format!(
                "max delay {max_delay} s not below a tenth of the {} s signal",
                signal.duration_s()
            ),
        ));
    }
    let fs = signal.sample_rate_hz;
    let n = signal.len();
    let powers = channel.normalized_powers();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, (tap, p)) in channel.taps.iter().zip(&powers).enumerate() {
        let mut r = rng.fork(i as u64);
        let g = gain_process(&tap.doppler, *p, n, fs, &mut r);
        let delayed = fractional_delay(&signal.samples, tap.delay_s * fs);
        for ((o, x), gk) in out.iter_mut().zip(&delayed).zip(&g) {
            *o += x * gk;
        }
    }
    let mut y = signal.clone();
    y.samples = out;
    Ok(y)
}

/// Line-of-sight path plus a blade reflection gated at the blade rate with
/// the given duty and a sinusoidal Doppler of peak `f_max_hz`. Unit mean
/// power gain.
pub fn fan_doppler(signal: &IqSignal, params: FanParams, rng: &mut SimRng) -> Result<IqSignal> {
    validate_fan(&params)?;
    let fs = signal.sample_rate_hz;
    if !(params.blade_rate_hz() < fs / 4.0) {
        return Err(VlabError::param("rot_hz", "blade rate must be below fs/4"));
    }
    let fp = FanProcess::new(&params, rng);
    let mut y = signal.clone();
    for (k, s) in y.samples.iter_mut().enumerate() {
        *s *= fp.raw(k as f64 / fs);
    }
    Ok(y)
}

/// `coherence_bw = 1/(5 tau_rms)`, `coherence_time = 0.423/f_max`;
/// infinity when the spread is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherenceMetrics {
    pub rms_delay_spread_s: f64,
    pub max_doppler_hz: f64,
    pub coherence_bw_hz: f64,
    pub coherence_time_s: f64,
}

pub fn coherence_metrics(channel: &TdlChannel) -> Result<CoherenceMetrics> {
    channel.validate()?;
    let tau = channel.rms_delay_spread_s();
    let fd = channel.taps.iter().map(|t| t.doppler.f_max()).fold(0.0, f64::max);
    Ok(CoherenceMetrics {
        rms_delay_spread_s: tau,
        max_doppler_hz: fd,
        coherence_bw_hz: if tau > 0.0 { 1.0 / (5.0 * tau) } else { f64::INFINITY },
        coherence_time_s: if fd > 0.0 { 0.423 / fd } else { f64::INFINITY },
    })
}
