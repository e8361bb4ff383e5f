//! Request and response bodies shared by the server and the client.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use vlab_core::trainer::{AnalyzeOptions, Artifact, ChallengeScenario, Submission, Truth};

use crate::frame::AnalysisFrame;
use crate::spec::{FieldError, LabSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// `not_found`, `invalid_parameter`, `conflict` or `bad_request`.
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireArtifact {
    pub name: String,
    /// Base64 (standard alphabet) file contents.
    pub data: String,
}

impl From<&Artifact> for WireArtifact {
    fn from(a: &Artifact) -> Self {
        WireArtifact {
            name: a.name.clone(),
            data: STANDARD.encode(&a.bytes),
        }
    }
}

impl WireArtifact {
    pub fn decode(&self) -> Result<Artifact, FieldError> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| FieldError::new("data", e.to_string()))?;
        Ok(Artifact {
            name: self.name.clone(),
            bytes,
        })
    }
}

pub fn encode_bytes(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn decode_bytes(field: &str, text: &str) -> Result<Vec<u8>, FieldError> {
    STANDARD.decode(text).map_err(|e| FieldError::new(field, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub revision: u64,
    pub spec: LabSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ChallengeScenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionAck {
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeAttached {
    pub revision: u64,
    pub scenario: ChallengeScenario,
}

/// Client-to-server stream messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ClientMessage {
    /// Same merge patch as `PATCH /sessions/{id}`.
    Patch { patch: Value },
    /// Re-send the current frame.
    Refresh,
}

/// Server-to-client stream messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ServerMessage {
    Frame(Box<AnalysisFrame>),
    Ack { revision: u64 },
    Error { error: ErrorBody },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRequest {
    pub module: u8,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoResponse {
    pub module: u8,
    pub title: String,
    pub headline: String,
    pub data: Value,
    pub artifacts: Vec<WireArtifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedChallenge {
    pub scenario: ChallengeScenario,
    /// Trainee-visible files.
    pub artifacts: Vec<WireArtifact>,
    /// Instructor-only `truth.json`.
    pub truth: WireArtifact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeRequest {
    pub scenario: ChallengeScenario,
    pub truth: Truth,
    pub submission: Submission,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeRequest {
    pub sample_rate_hz: f64,
    /// Base64 of interleaved little-endian f32 I/Q.
    pub samples: String,
    #[serde(default)]
    pub options: AnalyzeOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactSet {
    pub artifacts: Vec<WireArtifact>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artifact_round_trip() {
        let a = Artifact {
            name: "x.bin".into(),
            bytes: vec![0, 255, 7],
        };
        assert_eq!(WireArtifact::from(&a).decode().unwrap(), a);
        assert!(WireArtifact {
            name: "y".into(),
            data: "!!".into()
        }
        .decode()
        .is_err());
    }

    #[test]
    fn stream_message_tags() {
        let m: ClientMessage = serde_json::from_str(r#"{"type":"patch","patch":{"seed":3}}"#).unwrap();
        assert!(matches!(m, ClientMessage::Patch { .. }));
        let ack = serde_json::to_value(ServerMessage::Ack { revision: 4 }).unwrap();
        assert_eq!(ack, serde_json::json!({"type": "ack", "revision": 4}));
    }
}
