//! Session specification: what the virtual signal generator transmits, the
//! impairments and channel it passes through, and which views are computed.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vlab_core::channel::{preset, TdlChannel};
use vlab_core::impairments::{ImpairmentChain, Stage};
use vlab_core::modem::ModulationScheme;
use vlab_core::ofdm::OfdmConfig;
use vlab_core::shaping::PulseShape;
use vlab_core::VlabError;

pub const MAX_SAMPLES: usize = 1 << 21;

/// A rejected value and the JSON path that holds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Prefixes the core error's parameter name with `section`.
    pub fn from_core(section: &str, err: VlabError) -> Self {
        match err {
            VlabError::InvalidParameter { name, reason } => FieldError::new(format!("{section}.{name}"), reason),
            other => FieldError::new(section, other.to_string()),
        }
    }
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for FieldError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxSpec {
    pub scheme: ModulationScheme,
    pub shape: PulseShape,
    pub sample_rate_hz: f64,
    pub n_symbols: usize,
    /// Replaces the single-carrier waveform when set.
    #[serde(default)]
    pub ofdm: Option<OfdmConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Preset { preset: String },
    Custom(TdlChannel),
}

impl ChannelSpec {
    pub fn resolve(&self, seed: u64) -> Result<TdlChannel, FieldError> {
        match self {
            ChannelSpec::Preset { preset: name } => {
                preset(name, seed).map_err(|e| FieldError::new("channel.preset", e.to_string()))
            }
            ChannelSpec::Custom(c) => {
                c.validate().map_err(|e| FieldError::from_core("channel", e))?;
                Ok(c.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub psd_fft_len: usize,
    pub constellation_points: usize,
    pub eye_traces: usize,
    pub ccdf_thresholds_db: Vec<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            psd_fft_len: 1024,
            constellation_points: 1000,
            eye_traces: 100,
            ccdf_thresholds_db: (0..=24).map(|k| k as f64 * 0.5).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabSpec {
    pub seed: u64,
    pub tx: TxSpec,
    pub chain: ImpairmentChain,
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl Default for LabSpec {
    /// QPSK, RRC 0.35 at 8 samples/symbol, 10^5 samples at 1 MHz, 30 dB SNR.
    fn default() -> Self {
        LabSpec {
            seed: 1,
            tx: TxSpec {
                scheme: ModulationScheme::Qpsk,
                shape: PulseShape::rrc(0.35),
                sample_rate_hz: 1e6,
                n_symbols: 12_500,
                ofdm: None,
            },
            chain: ImpairmentChain::new(vec![Stage::Awgn {
                snr_db: Some(30.0),
                reference_power: None,
            }]),
            channel: None,
            analysis: AnalysisConfig::default(),
        }
    }
}

impl LabSpec {
    pub fn from_value(v: Value) -> Result<Self, FieldError> {
        let spec: LabSpec = serde_path_to_error::deserialize(v).map_err(|e| {
            let path = e.path().to_string();
            FieldError::new(
                if path == "." { String::new() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        spec.validate()?;
        Ok(spec)
    }

    /// Applies an RFC 7386 merge patch and validates the result.
    pub fn patched(&self, patch: &Value) -> Result<Self, FieldError> {
        if !patch.is_object() {
            return Err(FieldError::new("", "patch must be a JSON object"));
        }
        let mut v = serde_json::to_value(self).expect("spec serializes");
        json_patch::merge(&mut v, patch);
        Self::from_value(v)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let tx = &self.tx;
        if !(tx.sample_rate_hz > 0.0 && tx.sample_rate_hz.is_finite()) {
            return Err(FieldError::new("tx.sample_rate_hz", "must be positive and finite"));
        }
        if tx.n_symbols < 64 {
            return Err(FieldError::new("tx.n_symbols", "must be at least 64"));
        }
        match &tx.ofdm {
            Some(cfg) => {
                cfg.validate().map_err(|e| FieldError::from_core("tx.ofdm", e))?;
                if cfg.total_symbols() * cfg.symbol_len() > MAX_SAMPLES {
                    return Err(FieldError::new("tx.ofdm.n_symbols", "buffer too long"));
                }
            }
            None => {
                tx.shape.validate().map_err(|e| FieldError::from_core("tx.shape", e))?;
                if tx.n_symbols.saturating_mul(tx.shape.sps) > MAX_SAMPLES {
                    return Err(FieldError::new("tx.n_symbols", "buffer too long"));
                }
            }
        }
        for (i, stage) in self.chain.stages.iter().enumerate() {
            check_stage(stage).map_err(|m| FieldError::new(format!("chain[{i}]"), m))?;
        }
        if let Some(ch) = &self.channel {
            ch.resolve(self.seed)?;
        }
        let a = &self.analysis;
        if !a.psd_fft_len.is_power_of_two() || a.psd_fft_len < 16 {
            return Err(FieldError::new("analysis.psd_fft_len", "must be a power of two >= 16"));
        }
        if a.constellation_points == 0 {
            return Err(FieldError::new("analysis.constellation_points", "must be >= 1"));
        }
        if a.ccdf_thresholds_db.is_empty() || a.ccdf_thresholds_db.iter().any(|t| !t.is_finite()) {
            return Err(FieldError::new("analysis.ccdf_thresholds_db", "need finite thresholds"));
        }
        Ok(())
    }
}

fn check_stage(stage: &Stage) -> Result<(), String> {
    match stage {
        Stage::Awgn { snr_db, .. } if snr_db.is_some_and(|s| !s.is_finite()) => Err("snr_db must be finite".into()),
        Stage::Quantizer { bits, full_scale } if *bits == 0 || *bits > 24 || !(*full_scale > 0.0) => {
            Err("need 1..=24 bits and positive full_scale".into())
        }
        Stage::PhaseNoise { linewidth_hz } if !(*linewidth_hz >= 0.0) => Err("linewidth_hz must be >= 0".into()),
        Stage::Mixer { oversample, .. } if *oversample == 0 || *oversample > 16 => {
            Err("oversample must be in 1..=16".into())
        }
        _ => Ok(()),
    }
}
