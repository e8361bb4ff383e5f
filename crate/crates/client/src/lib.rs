//! Thin async client for the lab service, and an embedded server for
//! running the CLI without a separate `vlab-server` process.

use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use vlab_core::signal::iqfile::decode_iq;
use vlab_core::signal::IqSignal;
use vlab_core::trainer::{AnalyzeOptions, ChallengeScenario, GradeReport, Submission, Truth};
use vlab_service::{
    encode_bytes, serve, AnalysisFrame, AnalyzeRequest, AppState, ArtifactSet, ChallengeAttached, ChallengeRequest,
    DemoRequest, DemoResponse, ErrorBody, ErrorResponse, GeneratedChallenge, GradeRequest, MutationLog, RevisionAck,
    SessionInfo,
};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("{status}: {}", .body.message)]
    Api { status: StatusCode, body: ErrorBody },
    #[error(transparent)]
    Transport(#[from] reqwest::Error),
    #[error("bad response: {0}")]
    Decode(String),
}

impl ClientError {
    /// The server rejected the request's content rather than failing.
    pub fn is_validation(&self) -> bool {
        matches!(self, ClientError::Api { status, .. }
            if *status == StatusCode::UNPROCESSABLE_ENTITY || *status == StatusCode::BAD_REQUEST)
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct LabClient {
    base: String,
    http: reqwest::Client,
}

impl LabClient {
    /// `base` is e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        LabClient {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn send(
        &self,
        method: Method,
        path: &str,
        body: Option<&(impl Serialize + ?Sized)>,
    ) -> Result<reqwest::Response> {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await?;
        let body = serde_json::from_str::<ErrorResponse>(&text)
            .map(|e| e.error)
            .unwrap_or(ErrorBody {
                code: "http".into(),
                message: text,
                field: None,
            });
        Err(ClientError::Api { status, body })
    }

    async fn call<T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&(impl Serialize + ?Sized)>,
    ) -> Result<T> {
        let bytes = self.send(method, path, body).await?.bytes().await?;
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    /// `spec` is a merge patch over the default lab spec.
    pub async fn create_session(&self, spec: &Value) -> Result<SessionInfo> {
        self.call(Method::POST, "/sessions", Some(spec)).await
    }

    pub async fn session(&self, id: &str) -> Result<SessionInfo> {
        self.call(Method::GET, &format!("/sessions/{id}"), None::<&()>).await
    }

    pub async fn patch_session(&self, id: &str, patch: &Value) -> Result<u64> {
        let ack: RevisionAck = self
            .call(Method::PATCH, &format!("/sessions/{id}"), Some(patch))
            .await?;
        Ok(ack.revision)
    }

    pub async fn delete_session(&self, id: &str) -> Result<()> {
        self.send(Method::DELETE, &format!("/sessions/{id}"), None::<&()>)
            .await?;
        Ok(())
    }

    pub async fn frame(&self, id: &str) -> Result<AnalysisFrame> {
        self.call(Method::GET, &format!("/sessions/{id}/frame"), None::<&()>)
            .await
    }

    /// Current signal and the revision it belongs to.
    pub async fn iq(&self, id: &str) -> Result<(IqSignal, u64)> {
        let resp = self
            .send(Method::GET, &format!("/sessions/{id}/iq"), None::<&()>)
            .await?;
        let header = |name: &str| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
                .ok_or_else(|| ClientError::Decode(format!("missing {name}")))
        };
        let rate: f64 = header("x-sample-rate-hz")?
            .parse()
            .map_err(|e| ClientError::Decode(format!("x-sample-rate-hz: {e}")))?;
        let revision: u64 = header("x-revision")?
            .parse()
            .map_err(|e| ClientError::Decode(format!("x-revision: {e}")))?;
        let bytes = resp.bytes().await?;
        let samples = decode_iq(&bytes).map_err(|e| ClientError::Decode(e.to_string()))?;
        let signal = IqSignal::new(samples, rate).map_err(|e| ClientError::Decode(e.to_string()))?;
        Ok((signal, revision))
    }

    pub async fn log(&self, id: &str) -> Result<MutationLog> {
        self.call(Method::GET, &format!("/sessions/{id}/log"), None::<&()>)
            .await
    }

    pub async fn attach_challenge(&self, id: &str, req: &ChallengeRequest) -> Result<ChallengeAttached> {
        self.call(Method::POST, &format!("/sessions/{id}/challenge"), Some(req))
            .await
    }

    pub async fn answer(&self, id: &str, submission: &Submission) -> Result<GradeReport> {
        self.call(
            Method::POST,
            &format!("/sessions/{id}/challenge/answer"),
            Some(submission),
        )
        .await
    }

    pub async fn demo(&self, module: u8, seed: u64) -> Result<DemoResponse> {
        self.call(Method::POST, "/demo", Some(&DemoRequest { module, seed }))
            .await
    }

    pub async fn generate_challenge(&self, req: &ChallengeRequest) -> Result<GeneratedChallenge> {
        self.call(Method::POST, "/challenges", Some(req)).await
    }

    pub async fn grade(
        &self,
        scenario: ChallengeScenario,
        truth: Truth,
        submission: Submission,
    ) -> Result<GradeReport> {
        let req = GradeRequest {
            scenario,
            truth,
            submission,
        };
        self.call(Method::POST, "/challenges/grade", Some(&req)).await
    }

    pub async fn analyze(&self, signal: &IqSignal, options: AnalyzeOptions) -> Result<ArtifactSet> {
        let req = AnalyzeRequest {
            sample_rate_hz: signal.sample_rate_hz,
            samples: encode_bytes(&vlab_core::signal::iqfile::encode_iq(&signal.samples)),
            options,
        };
        self.call(Method::POST, "/analyze", Some(&req)).await
    }
}

/// In-process server on an ephemeral loopback port, stopped on drop.
pub struct EmbeddedServer {
    client: LabClient,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
}

impl EmbeddedServer {
    pub async fn start() -> std::io::Result<Self> {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        tokio::spawn(serve(listener, AppState::new(), async {
            let _ = rx.await;
        }));
        Ok(EmbeddedServer {
            client: LabClient::new(format!("http://{addr}")),
            stop: Some(tx),
        })
    }

    pub fn client(&self) -> &LabClient {
        &self.client
    }
}

impl Drop for EmbeddedServer {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
    }
}
