use serde::{Deserialize, Serialize};

use super::{ChallengeKind, ChallengeScenario, PublicParams, Submission, Truth};
use crate::error::{Result, VlabError};

pub const FILTER_TOLERANCE: f64 = 0.1;
/// CFO tolerance as a fraction of the unambiguous range `[-A, A]`.
pub const CFO_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub score: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeReport {
    pub kind: ChallengeKind,
    /// In [0, 1].
    pub score: f64,
    pub criteria: Vec<Criterion>,
    pub feedback: String,
}

fn criterion(name: &str, score: f64, detail: String) -> Criterion {
    Criterion {
        name: name.to_string(),
        score,
        detail,
    }
}

/// Positional character matches over the longer of the two strings.
fn char_accuracy(truth: &str, answer: &str) -> f64 {
    let t: Vec<char> = truth.chars().collect();
    let a: Vec<char> = answer.chars().collect();
    let n = t.len().max(a.len());
    if n == 0 {
        return 1.0;
    }
    t.iter().zip(&a).filter(|(x, y)| x == y).count() as f64 / n as f64
}

fn overlap_ratio(t: (usize, usize), a: (usize, usize)) -> f64 {
    let inter = t.1.min(a.1).saturating_sub(t.0.max(a.0));
    let union = (t.1 - t.0) + (a.1 - a.0) - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn binary(ok: bool) -> f64 {
    if ok {
        1.0
    } else {
        0.0
    }
}

/// Deterministic given its inputs. Kinds of all three must agree.
pub fn grade_submission(scenario: &ChallengeScenario, truth: &Truth, submission: &Submission) -> Result<GradeReport> {
    let kind = scenario.kind;
    if truth.kind() != kind || submission.kind() != kind || scenario.params.kind() != kind {
        return Err(VlabError::param(
            "kind",
            format!("scenario {kind}, truth {}, answer {}", truth.kind(), submission.kind()),
        ));
    }
    let c = match (truth, submission) {
        (Truth::HiddenMessage { message: t }, Submission::HiddenMessage { message: a }) => {
            let s = char_accuracy(t, a);
            let n = t.chars().count().max(a.chars().count());
            criterion(
                "character-accuracy",
                s,
                format!("{} of {n} characters correct", (s * n as f64).round()),
            )
        }
        (Truth::BlindModulation { scheme: t }, Submission::BlindModulation { scheme: a }) => {
            criterion("scheme", binary(t == a), format!("answered {a}"))
        }
        (Truth::FilterParams { family, parameter: t }, Submission::FilterParams { parameter: a }) => {
            let err = (a - t).abs();
            let label = if *family == crate::shaping::PulseKind::Gaussian {
                "bt"
            } else {
                "rolloff"
            };
            criterion(
                label,
                binary(err <= FILTER_TOLERANCE + 1e-9),
                format!("error {err:.3}, tolerance {FILTER_TOLERANCE}"),
            )
        }
        (
            Truth::SlotLocation {
                start_sample: ts,
                end_sample: te,
            },
            Submission::SlotLocation {
                start_sample: a0,
                end_sample: a1,
            },
        ) => {
            if a1 <= a0 {
                criterion("overlap", 0.0, "empty or reversed range".to_string())
            } else {
                let s = overlap_ratio((*ts, *te), (*a0, *a1));
                criterion("overlap", s, format!("overlap ratio {s:.3}"))
            }
        }
        (Truth::HopPattern { pattern_id: t }, Submission::HopPattern { pattern_id: a }) => {
            criterion("pattern", binary(t == a), format!("answered pattern {a}"))
        }
        (Truth::CfoHunt { cfo_hz: t }, Submission::CfoHunt { cfo_hz: a }) => {
            let PublicParams::CfoHunt { ambiguity_hz, .. } = scenario.params else {
                unreachable!()
            };
            let tol = CFO_TOLERANCE * 2.0 * ambiguity_hz;
            let err = (a - t).abs();
            criterion(
                "cfo",
                binary(err <= tol),
                format!("error {err:.2} Hz, tolerance {tol:.2} Hz"),
            )
        }
        _ => unreachable!("kinds checked above"),
    };
    let score = c.score;
    let feedback = match score {
        s if s >= 1.0 => "Correct.".to_string(),
        s if s >= 0.9 => format!("Nearly there ({s:.2}). {}", c.detail),
        s if s > 0.0 => format!("Partially correct ({s:.2}). {}", c.detail),
        _ => format!("Not correct. {}", c.detail),
    };
    Ok(GradeReport {
        kind,
        score,
        criteria: vec![c],
        feedback,
    })
}
