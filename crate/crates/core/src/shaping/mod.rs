//! Pulse-shaping filters, waveform synthesis and matched filtering.
//!
//! Time in the tap formulas is in symbol periods. Designed taps have unit
//! energy; [`pulse_shape`] rescales them to a unit peak so that a single
//! symbol reproduces the pulse with amplitude 1, and [`matched_filter`]
//! rescales so that the transmit/receive cascade also peaks at 1.

mod estimate;

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VlabError};
use crate::modem::{ModulationScheme, SymbolStream};
use crate::signal::fir::{convolve, sinc};
use crate::signal::IqSignal;

pub use estimate::{estimate_filter_family, estimate_filter_params, FilterEstimate};

pub const DEFAULT_SPAN: usize = 16;
pub const DEFAULT_SPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseKind {
    #[serde(rename = "rc")]
    Rc,
    #[serde(rename = "rrc")]
    Rrc,
    #[serde(rename = "gaussian")]
    Gaussian,
    #[serde(rename = "rect")]
    Rect,
    #[serde(rename = "half-sine")]
    HalfSine,
}

impl PulseKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rc => "rc",
            Self::Rrc => "rrc",
            Self::Gaussian => "gaussian",
            Self::Rect => "rect",
            Self::HalfSine => "half-sine",
        }
    }
}

fn default_span() -> usize {
    DEFAULT_SPAN
}

fn default_sps() -> usize {
    DEFAULT_SPS
}

fn default_bt() -> f64 {
    0.5
}

fn default_rolloff() -> f64 {
    0.35
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub kind: PulseKind,
    #[serde(default = "default_rolloff")]
    pub rolloff: f64,
    #[serde(default = "default_bt")]
    pub bt: f64,
    #[serde(default = "default_span")]
    pub span: usize,
    #[serde(default = "default_sps")]
    pub sps: usize,
}

impl PulseShape {
    fn with_kind(kind: PulseKind) -> Self {
        PulseShape {
            kind,
            rolloff: default_rolloff(),
            bt: default_bt(),
            span: DEFAULT_SPAN,
            sps: DEFAULT_SPS,
        }
    }

    pub fn rc(rolloff: f64) -> Self {
        PulseShape {
            rolloff,
            ..Self::with_kind(PulseKind::Rc)
        }
    }

    pub fn rrc(rolloff: f64) -> Self {
        PulseShape {
            rolloff,
            ..Self::with_kind(PulseKind::Rrc)
        }
    }

    pub fn gaussian(bt: f64) -> Self {
        PulseShape {
            bt,
            ..Self::with_kind(PulseKind::Gaussian)
        }
    }

    pub fn rect() -> Self {
        Self::with_kind(PulseKind::Rect)
    }

    pub fn half_sine() -> Self {
        Self::with_kind(PulseKind::HalfSine)
    }

    pub fn with_sps(mut self, sps: usize) -> Self {
        self.sps = sps;
        self
    }

    pub fn with_span(mut self, span: usize) -> Self {
        self.span = span;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, PulseKind::Rc | PulseKind::Rrc) && !(0.0..=1.0).contains(&self.rolloff) {
            return Err(VlabError::param("rolloff", format!("{} outside [0, 1]", self.rolloff)));
        }
        if self.kind == PulseKind::Gaussian && !(self.bt > 0.0 && self.bt.is_finite()) {
            return Err(VlabError::param("bt", "must be positive"));
        }
        if self.span == 0 || !self.span.is_multiple_of(2) {
            return Err(VlabError::param("span", "must be even and positive"));
        }
        if self.sps < 2 {
            return Err(VlabError::param("sps", "must be at least 2"));
        }
        Ok(())
    }

    pub fn num_taps(&self) -> usize {
        self.span * self.sps + 1
    }

    /// Delay of the symbol peak through one filter, in samples.
    pub fn group_delay_samples(&self) -> usize {
        self.span * self.sps / 2
    }
}

fn rc_value(t: f64, beta: f64) -> f64 {
    if beta > 0.0 && (2.0 * beta * t.abs() - 1.0).abs() < 1e-9 {
        return PI / 4.0 * sinc(1.0 / (2.0 * beta));
    }
    sinc(t) * (PI * beta * t).cos() / (1.0 - (2.0 * beta * t).powi(2))
}

fn rrc_value(t: f64, beta: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && (4.0 * beta * t.abs() - 1.0).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

fn prototype(shape: &PulseShape, t: f64) -> f64 {
    match shape.kind {
        PulseKind::Rc => rc_value(t, shape.rolloff),
        PulseKind::Rrc => rrc_value(t, shape.rolloff),
        PulseKind::Gaussian => (-2.0 * PI * PI * shape.bt * shape.bt * t * t / LN_2).exp(),
        PulseKind::Rect => {
            if t > -0.5 - 1e-12 && t <= 0.5 - 1e-12 {
                1.0
            } else {
                0.0
            }
        }
        PulseKind::HalfSine => {
            if t.abs() <= 0.5 {
                (PI * t).cos()
            } else {
                0.0
            }
        }
    }
}

/// Symmetric (rect excepted) unit-energy taps of length `span*sps + 1`.
pub fn design_filter(shape: &PulseShape) -> Result<Vec<f64>> {
    shape.validate()?;
    let c = shape.group_delay_samples() as f64;
    let sps = shape.sps as f64;
    let mut h: Vec<f64> = (0..shape.num_taps())
        .map(|n| prototype(shape, (n as f64 - c) / sps))
        .collect();
    let e: f64 = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    h.iter_mut().for_each(|v| *v /= e);
    Ok(h)
}

fn peak_taps(shape: &PulseShape) -> Result<Vec<f64>> {
    let h = design_filter(shape)?;
    let peak = h[shape.group_delay_samples()];
    Ok(h.iter().map(|v| v / peak).collect())
}

/// Synthesized waveform plus the alignment facts a receiver needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapedSignal {
    pub signal: IqSignal,
    pub shape: PulseShape,
    pub n_symbols: usize,
    /// Index of symbol 0's peak (I rail).
    pub group_delay_samples: usize,
    /// Extra delay of the Q rail for offset schemes.
    pub q_delay_samples: usize,
}

/// Upsamples by `sps` and filters. Output has `(n_symbols + span) * sps`
/// samples; symbol `k` peaks at `k*sps + span*sps/2`.
pub fn pulse_shape(stream: &SymbolStream, shape: &PulseShape, sample_rate_hz: f64) -> Result<ShapedSignal> {
    shape.validate()?;
    if stream.scheme == ModulationScheme::Msk && shape.kind != PulseKind::HalfSine {
        return Err(VlabError::param(
            "shape",
            format!("msk requires half-sine, got {}", shape.kind.name()),
        ));
    }
    if stream.scheme.is_offset() && !shape.sps.is_multiple_of(2) {
        return Err(VlabError::param("sps", "offset schemes need an even sps"));
    }
    let taps = peak_taps(shape)?;
    let sps = shape.sps;
    let n = stream.symbols.len();
    let out_len = (n + shape.span) * sps;
    let q_delay = if stream.scheme.is_offset() { sps / 2 } else { 0 };

    let mut up = vec![Complex64::new(0.0, 0.0); n * sps];
    for (k, s) in stream.symbols.iter().enumerate() {
        up[k * sps] = *s;
    }
    let mut y = if q_delay == 0 {
        convolve(&up, &taps)
    } else {
        let i_rail: Vec<Complex64> = up.iter().map(|s| Complex64::new(s.re, 0.0)).collect();
        let mut q_rail = vec![Complex64::new(0.0, 0.0); q_delay];
        q_rail.extend(up.iter().map(|s| Complex64::new(0.0, s.im)));
        let yi = convolve(&i_rail, &taps);
        let yq = convolve(&q_rail, &taps);
        (0..out_len)
            .map(|k| yi.get(k).copied().unwrap_or_default() + yq.get(k).copied().unwrap_or_default())
            .collect()
    };
    y.resize(out_len, Complex64::new(0.0, 0.0));
    let signal = IqSignal::new(y, sample_rate_hz)?;
    Ok(ShapedSignal {
        signal,
        shape: *shape,
        n_symbols: n,
        group_delay_samples: shape.group_delay_samples(),
        q_delay_samples: q_delay,
    })
}

/// Time-reversed taps of the receive filter, scaled so that `pulse ⊛ mf`
/// peaks at 1 for the matched case.
pub fn matched_taps(shape: &PulseShape) -> Result<Vec<f64>> {
    let h = design_filter(shape)?;
    let peak = h[shape.group_delay_samples()];
    Ok(h.iter().rev().map(|v| v * peak).collect())
}

/// Full convolution with the (real) receive taps; output is
/// `span*sps` samples longer than the input and adds one group delay.
pub fn matched_filter(signal: &IqSignal, shape: &PulseShape) -> Result<IqSignal> {
    let taps = matched_taps(shape)?;
    let mut out = signal.clone();
    out.samples = convolve(&signal.samples, &taps);
    Ok(out)
}

/// Samples `n` symbols at `start + k*sps`, taking Q from `q_delay` samples
/// later for offset schemes.
pub fn sample_symbols(samples: &[Complex64], start: usize, sps: usize, n: usize, q_delay: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let i = start + k * sps;
            let re = samples.get(i).map_or(0.0, |s| s.re);
            let im = samples.get(i + q_delay).map_or(0.0, |s| s.im);
            Complex64::new(re, im)
        })
        .collect()
}

/// Per-sample complex noise variance that gives `es_n0_db` at the output
/// of [`matched_filter`] for a signal from [`pulse_shape`] with unit-energy
/// symbols.
pub fn noise_power_for_es_n0(shape: &PulseShape, es_n0_db: f64) -> Result<f64> {
    let h = design_filter(shape)?;
    let c = h[shape.group_delay_samples()];
    Ok(1.0 / (c * c * 10f64.powf(es_n0_db / 10.0)))
}

/// Symbol-instant ISI power relative to the main tap, in dB. `rx = None`
/// measures the transmit pulse alone.
pub fn isi_db(tx: &PulseShape, rx: Option<&PulseShape>) -> Result<f64> {
    let p = design_filter(tx)?;
    let (g, centre) = match rx {
        Some(r) => {
            if r.sps != tx.sps {
                return Err(VlabError::param("sps", "tx and rx sps differ"));
            }
            let m = design_filter(r)?;
            let g = convolve(&p.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>(), &m);
            (
                g.iter().map(|c| c.re).collect::<Vec<f64>>(),
                tx.group_delay_samples() + r.group_delay_samples(),
            )
        }
        None => (p, tx.group_delay_samples()),
    };
    let main = g[centre].powi(2);
    let sps = tx.sps;
    let isi: f64 = g
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != centre && (i as isize - centre as isize).rem_euclid(sps as isize) == 0)
        .map(|(_, v)| v * v)
        .sum();
    Ok(10.0 * (isi / main).log10())
}
