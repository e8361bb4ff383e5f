//! Seeded per-trainee micro-task challenges with sealed ground truth,
//! reference solvers, grading, per-module demos and the analyser views.
//!
//! Trainee-visible artifacts are the IQ file, its metadata sidecar and
//! `scenario.json`. `truth.json` is instructor-only and is written by a
//! separate code path; nothing in [`ChallengeScenario`] derives from it.

mod analyze;
mod demo;
mod generate;
mod grade;
mod solve;

pub use analyze::{analyze, AnalyzeOptions};
pub use demo::{run_module_demo, DemoOutput, MODULE_TITLES};
pub use generate::{challenge_seed, generate_challenge, Challenge};
pub use grade::{grade_submission, Criterion, GradeReport};
pub use solve::solve;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VlabError};
use crate::modem::ModulationScheme;
use crate::rx::{FrameSpec, PreambleSpec};
use crate::shaping::{PulseKind, PulseShape};

/// Sample rate of every generated challenge.
pub const CHALLENGE_RATE_HZ: f64 = 256e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChallengeKind {
    HiddenMessage,
    BlindModulation,
    FilterParams,
    SlotLocation,
    HopPattern,
    CfoHunt,
}

impl ChallengeKind {
    pub const ALL: [ChallengeKind; 6] = [
        Self::HiddenMessage,
        Self::BlindModulation,
        Self::FilterParams,
        Self::SlotLocation,
        Self::HopPattern,
        Self::CfoHunt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::HiddenMessage => "hidden-message",
            Self::BlindModulation => "blind-modulation",
            Self::FilterParams => "filter-params",
            Self::SlotLocation => "slot-location",
            Self::HopPattern => "hop-pattern",
            Self::CfoHunt => "cfo-hunt",
        }
    }
}

impl fmt::Display for ChallengeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts `hidden-message`, `hidden_message` and `HIDDEN_MESSAGE`.
impl FromStr for ChallengeKind {
    type Err = VlabError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| VlabError::param("kind", format!("unknown challenge kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Self::Easy, Self::Medium, Self::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Self::Easy => "easy",
            Self::Medium => "medium",
            Self::Hard => "hard",
        }
    }

    pub fn preset(self) -> DifficultyPreset {
        match self {
            Self::Easy => DifficultyPreset {
                snr_db: 20.0,
                cfo_fraction: 0.0,
                iq_gain_imbalance_db: 0.0,
                phase_noise_linewidth_hz: None,
                quantizer_bits: None,
            },
            Self::Medium => DifficultyPreset {
                snr_db: 10.0,
                cfo_fraction: 0.25,
                iq_gain_imbalance_db: 0.5,
                phase_noise_linewidth_hz: None,
                quantizer_bits: None,
            },
            Self::Hard => DifficultyPreset {
                snr_db: 5.0,
                cfo_fraction: 0.45,
                iq_gain_imbalance_db: 0.0,
                phase_noise_linewidth_hz: Some(0.02),
                quantizer_bits: Some(6),
            },
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Difficulty {
    type Err = VlabError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|d| d.name() == norm)
            .ok_or_else(|| VlabError::param("difficulty", format!("unknown difficulty `{s}`")))
    }
}

/// Impairment levels of a difficulty. SNR is per sample against the burst
/// power; CFO is a fraction of the coarse estimator's ambiguity range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyPreset {
    pub snr_db: f64,
    pub cfo_fraction: f64,
    pub iq_gain_imbalance_db: f64,
    pub phase_noise_linewidth_hz: Option<f64>,
    pub quantizer_bits: Option<u32>,
}

/// Everything a trainee is told about a challenge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PublicParams {
    HiddenMessage {
        frame: FrameSpec,
    },
    BlindModulation {
        preamble: PreambleSpec,
        shape: PulseShape,
        sps: usize,
        n_payload_symbols: usize,
        candidates: Vec<ModulationScheme>,
    },
    FilterParams {
        family: PulseKind,
        symbol_rate_hz: f64,
    },
    SlotLocation {
        slot_len_symbols: usize,
        guard_symbols: usize,
        n_slots: usize,
        slot_index: usize,
        sps: usize,
    },
    HopPattern {
        candidates: Vec<Vec<f64>>,
        hop_len: usize,
    },
    CfoHunt {
        preamble: PreambleSpec,
        shape: PulseShape,
        sps: usize,
        ambiguity_hz: f64,
    },
}

impl PublicParams {
    pub fn kind(&self) -> ChallengeKind {
        match self {
            Self::HiddenMessage { .. } => ChallengeKind::HiddenMessage,
            Self::BlindModulation { .. } => ChallengeKind::BlindModulation,
            Self::FilterParams { .. } => ChallengeKind::FilterParams,
            Self::SlotLocation { .. } => ChallengeKind::SlotLocation,
            Self::HopPattern { .. } => ChallengeKind::HopPattern,
            Self::CfoHunt { .. } => ChallengeKind::CfoHunt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeScenario {
    pub kind: ChallengeKind,
    pub difficulty: Difficulty,
    pub trainee_id: String,
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub preset: DifficultyPreset,
    pub params: PublicParams,
}

/// Instructor-only answer key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Truth {
    HiddenMessage { message: String },
    BlindModulation { scheme: ModulationScheme },
    FilterParams { family: PulseKind, parameter: f64 },
    SlotLocation { start_sample: usize, end_sample: usize },
    HopPattern { pattern_id: usize },
    CfoHunt { cfo_hz: f64 },
}

/// A trainee's answer. Same tags as [`Truth`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Submission {
    HiddenMessage { message: String },
    BlindModulation { scheme: ModulationScheme },
    FilterParams { parameter: f64 },
    SlotLocation { start_sample: usize, end_sample: usize },
    HopPattern { pattern_id: usize },
    CfoHunt { cfo_hz: f64 },
}

impl Truth {
    pub fn kind(&self) -> ChallengeKind {
        match self {
            Self::HiddenMessage { .. } => ChallengeKind::HiddenMessage,
            Self::BlindModulation { .. } => ChallengeKind::BlindModulation,
            Self::FilterParams { .. } => ChallengeKind::FilterParams,
            Self::SlotLocation { .. } => ChallengeKind::SlotLocation,
            Self::HopPattern { .. } => ChallengeKind::HopPattern,
            Self::CfoHunt { .. } => ChallengeKind::CfoHunt,
        }
    }
}

impl Submission {
    pub fn kind(&self) -> ChallengeKind {
        match self {
            Self::HiddenMessage { .. } => ChallengeKind::HiddenMessage,
            Self::BlindModulation { .. } => ChallengeKind::BlindModulation,
            Self::FilterParams { .. } => ChallengeKind::FilterParams,
            Self::SlotLocation { .. } => ChallengeKind::SlotLocation,
            Self::HopPattern { .. } => ChallengeKind::HopPattern,
            Self::CfoHunt { .. } => ChallengeKind::CfoHunt,
        }
    }
}

/// Named output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn text(name: impl Into<String>, text: impl Into<String>) -> Self {
        Artifact {
            name: name.into(),
            bytes: text.into().into_bytes(),
        }
    }

    pub fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Result<Self> {
        Ok(Artifact {
            name: name.into(),
            bytes: serde_json::to_vec_pretty(value)?,
        })
    }
}

/// Writes each artifact under `dir`, creating it if needed. Names must be
/// plain file names.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        if a.name.is_empty() || a.name.contains(['/', '\\']) || a.name.starts_with('.') {
            return Err(VlabError::param("artifact", format!("bad file name `{}`", a.name)));
        }
        std::fs::write(dir.join(&a.name), &a.bytes)?;
    }
    Ok(())
}
