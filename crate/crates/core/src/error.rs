use thiserror::Error;

/// Errors raised by the DSP and lab layers.
#[derive(Debug, Error)]
pub enum VlabError {
    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("zero mean power")]
    ZeroPower,

    #[error("channel singular (|h| = {0:e})")]
    ChannelSingular(f64),

    #[error("empty signal")]
    EmptySignal,

    #[error("polynomial {poly:#x} is not primitive for degree {degree} (period {period})")]
    NonPrimitive { degree: u32, poly: u32, period: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl VlabError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        VlabError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by caller-supplied values (maps to exit code 2 / HTTP 422).
    pub fn is_validation(&self) -> bool {
        !matches!(self, VlabError::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, VlabError>;
