//! Live sessions: revisioned spec snapshots, the mutation log and a
//! per-session frame cache.

use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::{watch, Mutex};
use vlab_core::trainer::{generate_challenge, Challenge, ChallengeKind, Difficulty};

use crate::frame::{compute_frame, AnalysisFrame};
use crate::spec::{FieldError, LabSpec};

/// Minimum spacing between two frame computations of one session.
pub const MIN_FRAME_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeRequest {
    pub kind: ChallengeKind,
    pub difficulty: Difficulty,
    pub trainee_id: String,
    pub seed: u64,
}

impl ChallengeRequest {
    pub fn generate(&self) -> Result<Challenge, FieldError> {
        generate_challenge(self.kind, self.difficulty, &self.trainee_id, self.seed)
            .map_err(|e| FieldError::from_core("challenge", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Mutation {
    Create { spec: LabSpec },
    Patch { patch: Value },
    AttachChallenge { request: ChallengeRequest },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub revision: u64,
    pub timestamp_ms: u64,
    pub mutation: Mutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationLog {
    pub session_id: String,
    pub entries: Vec<LogEntry>,
}

/// Everything a frame is computed from.
#[derive(Debug, Clone)]
pub struct Revision {
    pub revision: u64,
    pub timestamp_ms: u64,
    pub spec: LabSpec,
    pub challenge: Option<Arc<Challenge>>,
}

impl Revision {
    pub fn frame(&self) -> Result<AnalysisFrame, FieldError> {
        compute_frame(&self.spec, self.challenge.as_deref(), self.revision, self.timestamp_ms)
    }

    fn apply(&self, entry: &LogEntry) -> Result<Revision, FieldError> {
        let mut next = Revision {
            revision: entry.revision,
            timestamp_ms: entry.timestamp_ms,
            spec: self.spec.clone(),
            challenge: self.challenge.clone(),
        };
        match &entry.mutation {
            Mutation::Create { .. } => return Err(FieldError::new("op", "create must be the first entry")),
            Mutation::Patch { patch } => next.spec = self.spec.patched(patch)?,
            Mutation::AttachChallenge { request } => next.challenge = Some(Arc::new(request.generate()?)),
        }
        Ok(next)
    }
}

/// Rebuilds every revision of a session from its log.
pub fn replay(entries: &[LogEntry]) -> Result<Vec<Revision>, FieldError> {
    let Some(first) = entries.first() else {
        return Err(FieldError::new("entries", "empty log"));
    };
    let Mutation::Create { spec } = &first.mutation else {
        return Err(FieldError::new("entries[0]", "log must start with create"));
    };
    spec.validate()?;
    let mut out = vec![Revision {
        revision: first.revision,
        timestamp_ms: first.timestamp_ms,
        spec: spec.clone(),
        challenge: None,
    }];
    for (i, e) in entries.iter().enumerate().skip(1) {
        let prev = out.last().unwrap();
        if e.revision != prev.revision + 1 {
            return Err(FieldError::new(
                format!("entries[{i}].revision"),
                "revisions must be consecutive",
            ));
        }
        out.push(prev.apply(e)?);
    }
    Ok(out)
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Default)]
struct FrameCache {
    last: Option<Arc<AnalysisFrame>>,
    computed_at: Option<Instant>,
}

pub struct Session {
    pub id: String,
    /// Held while a mutation is validated and committed.
    log: Mutex<Vec<LogEntry>>,
    current: watch::Sender<Arc<Revision>>,
    frames: Mutex<FrameCache>,
}

impl Session {
    pub fn create(id: String, spec: LabSpec) -> Result<Self, FieldError> {
        let entry = LogEntry {
            revision: 1,
            timestamp_ms: now_ms(),
            mutation: Mutation::Create { spec },
        };
        Self::restore(id, vec![entry])
    }

    pub fn restore(id: String, entries: Vec<LogEntry>) -> Result<Self, FieldError> {
        let last = replay(&entries)?.pop().unwrap();
        Ok(Session {
            id,
            log: Mutex::new(entries),
            current: watch::channel(Arc::new(last)).0,
            frames: Mutex::new(FrameCache::default()),
        })
    }

    pub fn current(&self) -> Arc<Revision> {
        self.current.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<Arc<Revision>> {
        self.current.subscribe()
    }

    pub async fn log(&self) -> MutationLog {
        MutationLog {
            session_id: self.id.clone(),
            entries: self.log.lock().await.clone(),
        }
    }

    /// Validates and commits one mutation; readers see either the old or
    /// the new revision, never a mix.
    pub async fn mutate(&self, mutation: Mutation) -> Result<Arc<Revision>, FieldError> {
        let mut log = self.log.lock().await;
        let cur = self.current();
        let entry = LogEntry {
            revision: cur.revision + 1,
            timestamp_ms: now_ms(),
            mutation,
        };
        let next = match &entry.mutation {
            Mutation::AttachChallenge { .. } => {
                let (cur, e) = (cur.clone(), entry.clone());
                tokio::task::spawn_blocking(move || cur.apply(&e))
                    .await
                    .map_err(|e| FieldError::new("challenge", e.to_string()))??
            }
            _ => cur.apply(&entry)?,
        };
        let next = Arc::new(next);
        log.push(entry);
        self.current.send_replace(next.clone());
        Ok(next)
    }

    /// Frame of the latest revision, computed at most once per revision and
    /// no more often than every [`MIN_FRAME_INTERVAL`].
    pub async fn frame(&self) -> Result<Arc<AnalysisFrame>, FieldError> {
        let mut cache = self.frames.lock().await;
        if let Some(f) = &cache.last {
            if f.revision == self.current().revision {
                return Ok(f.clone());
            }
        }
        if let Some(t) = cache.computed_at {
            let since = t.elapsed();
            if since < MIN_FRAME_INTERVAL {
                tokio::time::sleep(MIN_FRAME_INTERVAL - since).await;
            }
        }
        let rev = self.current();
        let frame = tokio::task::spawn_blocking(move || rev.frame())
            .await
            .map_err(|e| FieldError::new("frame", e.to_string()))??;
        let frame = Arc::new(frame);
        cache.computed_at = Some(Instant::now());
        cache.last = Some(frame.clone());
        Ok(frame)
    }
}
