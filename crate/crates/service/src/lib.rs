//! Virtual instrument service: live lab sessions streamed as analysis
//! frames, plus batch endpoints for demos, challenges and file analysis.
//!
//! Routes:
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | partial [`LabSpec`] (merge patch on defaults) | [`SessionInfo`] |
//! | GET | `/sessions/{id}` | | [`SessionInfo`] |
//! | PATCH | `/sessions/{id}` | merge patch | [`RevisionAck`] |
//! | DELETE | `/sessions/{id}` | | 204 |
//! | GET | `/sessions/{id}/frame` | | [`AnalysisFrame`] |
//! | GET | `/sessions/{id}/iq` | | f32 LE interleaved IQ |
//! | GET | `/sessions/{id}/log` | | [`MutationLog`] |
//! | POST | `/sessions/{id}/challenge` | [`ChallengeRequest`] | [`ChallengeAttached`] |
//! | POST | `/sessions/{id}/challenge/answer` | [`Submission`] | [`GradeReport`] |
//! | GET | `/sessions/{id}/stream` | websocket | [`ServerMessage`]s |
//! | POST | `/demo` | [`DemoRequest`] | [`DemoResponse`] |
//! | POST | `/challenges` | [`ChallengeRequest`] | [`GeneratedChallenge`] |
//! | POST | `/challenges/grade` | [`GradeRequest`] | [`GradeReport`] |
//! | POST | `/analyze` | [`AnalyzeRequest`] | [`ArtifactSet`] |
//!
//! Errors are `{"error": {"code", "message", "field"}}` with 404 for an
//! unknown session, 422 for invalid parameters and 409 for answers to a
//! session without a challenge.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod api;
pub mod frame;
pub mod session;
pub mod spec;
mod stream;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use vlab_core::signal::iqfile::{decode_iq, encode_iq};
use vlab_core::signal::IqSignal;
use vlab_core::trainer::{analyze, grade_submission, run_module_demo, GradeReport, Submission};

pub use api::*;
pub use frame::{compute_frame, AnalysisFrame, Scalars};
pub use session::{replay, ChallengeRequest, LogEntry, Mutation, MutationLog, Revision, Session};
pub use spec::{FieldError, LabSpec};

const BODY_LIMIT: usize = 256 << 20;

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Invalid(FieldError),
    Conflict(String),
    Internal(String),
}

impl From<FieldError> for ApiError {
    fn from(e: FieldError) -> Self {
        ApiError::Invalid(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::Invalid(FieldError::new("", e.body_text()))
    }
}

impl ApiError {
    pub fn body(&self) -> ErrorBody {
        let (code, message, field) = match self {
            ApiError::NotFound(m) => ("not_found", m.clone(), None),
            ApiError::Invalid(e) => ("invalid_parameter", e.message.clone(), Some(e.field.clone())),
            ApiError::Conflict(m) => ("conflict", m.clone(), None),
            ApiError::Internal(m) => ("internal", m.clone(), None),
        };
        ErrorBody {
            code: code.into(),
            message,
            field,
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(ErrorResponse { error: self.body() })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Every session's mutation log; restoring replays them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub sessions: Vec<MutationLog>,
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Session>>>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))
    }

    pub fn insert(&self, session: Session) -> Arc<Session> {
        let s = Arc::new(session);
        self.sessions.write().unwrap().insert(s.id.clone(), s.clone());
        s
    }

    pub async fn snapshot(&self) -> Snapshot {
        let sessions: Vec<Arc<Session>> = self.sessions.read().unwrap().values().cloned().collect();
        let mut logs = Vec::with_capacity(sessions.len());
        for s in sessions {
            logs.push(s.log().await);
        }
        logs.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        Snapshot { sessions: logs }
    }

    pub fn restore(snapshot: &Snapshot) -> Result<Self, FieldError> {
        let state = Self::new();
        for log in &snapshot.sessions {
            state.insert(Session::restore(log.session_id.clone(), log.entries.clone())?);
        }
        Ok(state)
    }

    pub async fn save_snapshot(&self, path: &Path) -> std::io::Result<()> {
        let snap = self.snapshot().await;
        std::fs::write(path, serde_json::to_vec_pretty(&snap)?)
    }

    pub fn load_snapshot(path: &Path) -> anyhow::Result<Self> {
        let snap: Snapshot = serde_json::from_slice(&std::fs::read(path)?)?;
        Ok(Self::restore(&snap)?)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route(
            "/sessions/{id}",
            get(session_info).patch(patch_session).delete(delete_session),
        )
        .route("/sessions/{id}/frame", get(get_frame))
        .route("/sessions/{id}/iq", get(export_iq))
        .route("/sessions/{id}/log", get(session_log))
        .route("/sessions/{id}/challenge", post(attach_challenge))
        .route("/sessions/{id}/challenge/answer", post(answer_challenge))
        .route("/sessions/{id}/stream", get(stream::stream))
        .route("/demo", post(demo))
        .route("/challenges", post(generate_challenge))
        .route("/challenges/grade", post(grade))
        .route("/analyze", post(analyze_iq))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

fn info(s: &Session) -> SessionInfo {
    let cur = s.current();
    SessionInfo {
        session_id: s.id.clone(),
        revision: cur.revision,
        spec: cur.spec.clone(),
        scenario: cur.challenge.as_ref().map(|c| c.scenario.clone()),
    }
}

async fn create_session(State(st): State<AppState>, body: Option<Json<Value>>) -> ApiResult<SessionInfo> {
    let patch = body
        .map(|Json(v)| v)
        .unwrap_or_else(|| Value::Object(Default::default()));
    let spec = LabSpec::default().patched(&patch)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let s = st.insert(Session::create(id, spec)?);
    tracing::info!(session = %s.id, "created");
    Ok(Json(info(&s)))
}

async fn session_info(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<SessionInfo> {
    Ok(Json(info(st.session(&id)?.as_ref())))
}

async fn delete_session(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<StatusCode, ApiError> {
    st.session(&id)?;
    st.sessions.write().unwrap().remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

async fn patch_session(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<Value>, JsonRejection>,
) -> ApiResult<RevisionAck> {
    let s = st.session(&id)?;
    let Json(patch) = body?;
    let rev = s.mutate(Mutation::Patch { patch }).await?;
    Ok(Json(RevisionAck { revision: rev.revision }))
}

async fn get_frame(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<AnalysisFrame> {
    let s = st.session(&id)?;
    Ok(Json(s.frame().await?.as_ref().clone()))
}

async fn export_iq(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let s = st.session(&id)?;
    let rev = s.current();
    let signal: IqSignal = match &rev.challenge {
        Some(c) => c.signal.clone(),
        None => {
            let spec = rev.spec.clone();
            tokio::task::spawn_blocking(move || frame::generate(&spec))
                .await
                .map_err(|e| ApiError::Internal(e.to_string()))??
                .signal
        }
    };
    Ok((
        [
            (header::CONTENT_TYPE, "application/octet-stream".to_string()),
            (
                header::HeaderName::from_static("x-sample-rate-hz"),
                signal.sample_rate_hz.to_string(),
            ),
            (header::HeaderName::from_static("x-revision"), rev.revision.to_string()),
        ],
        encode_iq(&signal.samples),
    )
        .into_response())
}

async fn session_log(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<MutationLog> {
    Ok(Json(st.session(&id)?.log().await))
}

async fn attach_challenge(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ChallengeRequest>, JsonRejection>,
) -> ApiResult<ChallengeAttached> {
    let s = st.session(&id)?;
    let Json(request) = body?;
    let rev = s.mutate(Mutation::AttachChallenge { request }).await?;
    let scenario = rev.challenge.as_ref().unwrap().scenario.clone();
    Ok(Json(ChallengeAttached {
        revision: rev.revision,
        scenario,
    }))
}

async fn answer_challenge(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<Submission>, JsonRejection>,
) -> ApiResult<GradeReport> {
    let s = st.session(&id)?;
    let Json(sub) = body?;
    let rev = s.current();
    let Some(ch) = &rev.challenge else {
        return Err(ApiError::Conflict("session has no challenge attached".into()));
    };
    let report = grade_submission(&ch.scenario, &ch.truth, &sub).map_err(|e| FieldError::from_core("submission", e))?;
    Ok(Json(report))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn demo(body: Result<Json<DemoRequest>, JsonRejection>) -> ApiResult<DemoResponse> {
    let Json(req) = body?;
    let out =
        blocking(move || run_module_demo(req.module, req.seed).map_err(|e| FieldError::from_core("demo", e).into()))
            .await?;
    Ok(Json(DemoResponse {
        module: out.module,
        title: out.title,
        headline: out.headline,
        data: out.data,
        artifacts: out.artifacts.iter().map(WireArtifact::from).collect(),
    }))
}

async fn generate_challenge(body: Result<Json<ChallengeRequest>, JsonRejection>) -> ApiResult<GeneratedChallenge> {
    let Json(req) = body?;
    let ch = blocking(move || Ok(req.generate()?)).await?;
    let artifacts = ch.trainee_artifacts().map_err(|e| ApiError::Internal(e.to_string()))?;
    let truth = ch.truth_artifact().map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(GeneratedChallenge {
        scenario: ch.scenario,
        artifacts: artifacts.iter().map(WireArtifact::from).collect(),
        truth: WireArtifact::from(&truth),
    }))
}

async fn grade(body: Result<Json<GradeRequest>, JsonRejection>) -> ApiResult<GradeReport> {
    let Json(req) = body?;
    let report = grade_submission(&req.scenario, &req.truth, &req.submission)
        .map_err(|e| FieldError::from_core("submission", e))?;
    Ok(Json(report))
}

async fn analyze_iq(body: Result<Json<AnalyzeRequest>, JsonRejection>) -> ApiResult<ArtifactSet> {
    let Json(req) = body?;
    let bytes = decode_bytes("samples", &req.samples)?;
    let out = blocking(move || {
        let samples = decode_iq(&bytes).map_err(|e| FieldError::from_core("samples", e))?;
        let signal = IqSignal::new(samples, req.sample_rate_hz).map_err(|e| FieldError::from_core("signal", e))?;
        analyze(&signal, &req.options).map_err(|e| FieldError::from_core("options", e).into())
    })
    .await?;
    Ok(Json(ArtifactSet {
        artifacts: out.iter().map(WireArtifact::from).collect(),
    }))
}

/// Serves on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
