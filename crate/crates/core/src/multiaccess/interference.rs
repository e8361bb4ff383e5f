use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spread::{dsss_despread, dsss_spread, SpreadingCode};
use crate::error::{Result, VlabError};
use crate::modem::{demap_symbols, map_bits, ModulationScheme, SymbolStream};
use crate::shaping::{design_filter, matched_filter, pulse_shape, sample_symbols, PulseShape};
use crate::signal::{db_to_amplitude, db_to_linear, IqSignal, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceKind {
    Aci,
    Cci,
    NearFar,
}

impl InterferenceKind {
    pub fn name(self) -> &'static str {
        match self {
            InterferenceKind::Aci => "aci",
            InterferenceKind::Cci => "cci",
            InterferenceKind::NearFar => "near-far",
        }
    }
}

impl fmt::Display for InterferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterferenceKind {
    type Err = VlabError;

    fn from_str(s: &str) -> Result<Self> {
        [InterferenceKind::Aci, InterferenceKind::Cci, InterferenceKind::NearFar]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| VlabError::param("kind", format!("unknown interference kind `{s}`")))
    }
}

/// Two-user scenario knobs. User 0 is the victim; `None` fields take the
/// kind's default (spacing one symbol rate for ACI/near-far and 0 for CCI;
/// interferer +20 dB for near-far and 0 dB otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterferenceParams {
    pub scheme: ModulationScheme,
    pub symbol_rate_hz: f64,
    pub sps: usize,
    pub rolloff: f64,
    pub n_symbols: usize,
    pub spacing_hz: Option<f64>,
    pub interferer_power_db: Option<f64>,
    /// Victim Es/N0 at the matched-filter output.
    pub snr_db: f64,
    /// Spread user 1 with the m-sequence of this degree.
    pub interferer_dsss_degree: Option<u32>,
    pub seed: u64,
}

impl Default for InterferenceParams {
    fn default() -> Self {
        InterferenceParams {
            scheme: ModulationScheme::Qpsk,
            symbol_rate_hz: 1e3,
            sps: 8,
            rolloff: 0.35,
            n_symbols: 4000,
            spacing_hz: None,
            interferer_power_db: None,
            snr_db: 20.0,
            interferer_dsss_degree: None,
            seed: 0,
        }
    }
}

/// Hidden per-user record used for grading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTruth {
    pub user_id: u32,
    pub bits: Vec<u8>,
    pub power_db: f64,
    pub offset_hz: f64,
    pub phase_rad: f64,
    pub code: Option<SpreadingCode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceScenario {
    pub kind: InterferenceKind,
    pub params: InterferenceParams,
    pub composite: IqSignal,
    pub users: Vec<UserTruth>,
}

impl InterferenceScenario {
    fn shape(&self) -> PulseShape {
        PulseShape::rrc(self.params.rolloff).with_sps(self.params.sps)
    }
}

fn nominal_power(shape: &PulseShape) -> Result<f64> {
    let h = design_filter(shape)?;
    let c = h[shape.group_delay_samples()];
    Ok(h.iter().map(|v| (v / c).powi(2)).sum::<f64>() / shape.sps as f64)
}

fn shift(samples: &mut [Complex64], offset_hz: f64, fs: f64, phase: f64) {
    let step = offset_hz / fs;
    for (k, s) in samples.iter_mut().enumerate() {
        *s *= Complex64::from_polar(1.0, 2.0 * PI * (step * k as f64).fract() + phase);
    }
}

/// Builds a two-user composite plus truth. Both users share symbol timing
/// and sample clock; each gets a random carrier phase.
pub fn compose_interference(kind: InterferenceKind, params: &InterferenceParams) -> Result<InterferenceScenario> {
    let p = params;
    if !(p.symbol_rate_hz > 0.0) || p.sps < 2 || p.n_symbols == 0 {
        return Err(VlabError::param(
            "params",
            "need positive symbol rate, sps >= 2, n_symbols >= 1",
        ));
    }
    let shape = PulseShape::rrc(p.rolloff).with_sps(p.sps);
    shape.validate()?;
    let fs = p.symbol_rate_hz * p.sps as f64;
    let spacing = p.spacing_hz.unwrap_or(match kind {
        InterferenceKind::Cci => 0.0,
        _ => p.symbol_rate_hz,
    });
    let p_int = p.interferer_power_db.unwrap_or(match kind {
        InterferenceKind::NearFar => 20.0,
        _ => 0.0,
    });
    if spacing.abs() / 2.0 + p.symbol_rate_hz * (1.0 + p.rolloff) / 2.0 > fs / 2.0 {
        return Err(VlabError::param(
            "spacing_hz",
            "users exceed the composite Nyquist band",
        ));
    }
    let mut rng = SimRng::new(p.seed);
    let norm = nominal_power(&shape)?.sqrt();
    let bps = p.scheme.bits_per_symbol();
    let n_out = (p.n_symbols + shape.span) * p.sps;
    let mut composite = vec![Complex64::new(0.0, 0.0); n_out];
    let mut users = Vec::new();
    for u in 0..2u32 {
        let mut r = rng.fork(u as u64);
        let code = match (u, p.interferer_dsss_degree) {
            (1, Some(d)) => Some(SpreadingCode::m_sequence(d)?),
            _ => None,
        };
        let l = code.as_ref().map_or(1, SpreadingCode::len);
        let n_sym = p.n_symbols / l;
        if n_sym == 0 {
            return Err(VlabError::param("n_symbols", "shorter than one spread symbol"));
        }
        let bits = r.bits(n_sym * bps);
        let st = map_bits(&bits, p.scheme, &mut r)?;
        let chips = match &code {
            Some(c) => dsss_spread(&st.symbols, c)?,
            None => st.symbols.clone(),
        };
        let stream = SymbolStream {
            symbols: chips,
            scheme: p.scheme,
            carries_memory_state: false,
            data_bits: bits.len(),
            pad_bits: 0,
        };
        let mut sig = pulse_shape(&stream, &shape, fs)?.signal;
        let power_db = if u == 0 { 0.0 } else { p_int };
        let offset_hz = if u == 0 { -spacing / 2.0 } else { spacing / 2.0 };
        let phase_rad = r.uniform_range(0.0, 2.0 * PI);
        let g = db_to_amplitude(power_db) / norm;
        sig.samples.iter_mut().for_each(|v| *v *= g);
        shift(&mut sig.samples, offset_hz, fs, phase_rad);
        for (c, v) in composite.iter_mut().zip(&sig.samples) {
            *c += v;
        }
        users.push(UserTruth {
            user_id: u,
            bits,
            power_db,
            offset_hz,
            phase_rad,
            code,
        });
    }
    if p.snr_db.is_finite() {
        // Victim symbol amplitude after the matched filter is 1/norm.
        let h = design_filter(&shape)?;
        let hc = h[shape.group_delay_samples()];
        let sigma2 = 1.0 / (norm * norm * db_to_linear(p.snr_db) * hc * hc);
        let mut nr = rng.fork(99);
        composite.iter_mut().for_each(|c| *c += nr.complex_gaussian(sigma2));
    }
    Ok(InterferenceScenario {
        kind,
        params: p.clone(),
        composite: IqSignal::new(composite, fs)?.with_label(kind.name()),
        users,
    })
}

/// Genie-aided coherent receiver for one user: known offset, phase, power
/// and code.
pub fn demodulate_user(scenario: &InterferenceScenario, user: usize) -> Result<Vec<u8>> {
    let t = scenario
        .users
        .get(user)
        .ok_or_else(|| VlabError::param("user", "index out of range"))?;
    let shape = scenario.shape();
    let fs = scenario.composite.sample_rate_hz;
    let mut base = scenario.composite.clone();
    shift(&mut base.samples, -t.offset_hz, fs, -t.phase_rad);
    let mf = matched_filter(&base, &shape)?;
    let scale = nominal_power(&shape)?.sqrt() / db_to_amplitude(t.power_db);
    let bps = scenario.params.scheme.bits_per_symbol();
    let n_sym = t.bits.len() / bps;
    let l = t.code.as_ref().map_or(1, SpreadingCode::len);
    let start = 2 * shape.group_delay_samples();
    let mut y = sample_symbols(&mf.samples, start, shape.sps, n_sym * l, 0);
    y.iter_mut().for_each(|v| *v *= scale);
    let syms = match &t.code {
        Some(c) => dsss_despread(&y, c)?,
        None => y,
    };
    let mut bits = demap_symbols(&syms, scenario.params.scheme);
    bits.truncate(t.bits.len());
    Ok(bits)
}
