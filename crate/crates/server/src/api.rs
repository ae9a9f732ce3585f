//! Wire records of the annotation API. Nothing here carries a pair label or a
//! score; those stay on the server.

use pairpop_core::Label;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    A,
    B,
}

impl From<Choice> for Label {
    fn from(c: Choice) -> Self {
        match c {
            Choice::A => Label::AWins,
            Choice::B => Label::BWins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Side {
    pub id: String,
    pub title: String,
    /// `/img/{id}` when the submission has an image.
    pub image_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairView {
    pub pair_id: String,
    pub a: Side,
    pub b: Side,
}

/// Next unjudged pair of a session; `pair` is absent once all are judged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextPair {
    pub session_id: String,
    pub judged: usize,
    pub total: usize,
    pub pair: Option<PairView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRequest {
    pub session_id: String,
    pub pair_id: String,
    pub choice: Choice,
    #[serde(default)]
    pub rationale: Option<String>,
}

/// A judgment as stored in the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub session_id: String,
    pub pair_id: String,
    pub choice: Choice,
    pub rationale: Option<String>,
    /// Server receive time, unix seconds.
    pub submitted_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentAck {
    pub judged: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorStats {
    pub session_id: String,
    pub judged: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub judged: usize,
    pub correct: usize,
    /// Absent before the first judgment.
    pub accuracy: Option<f64>,
    pub annotators: Vec<AnnotatorStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
}
