//! Sessions and judgments, persisted as an append-only JSON-lines log.
//!
//! Every state change is written and flushed to the log before it becomes
//! visible, so replaying the log on start rebuilds the same state.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::Path;

use pairpop_core::eval::human_accuracy;
use pairpop_core::rng::{mix, stream_rng, streams};
use pairpop_core::Label;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::api::{AnnotatorStats, Judgment, Stats};
use crate::ServerError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LogRecord {
    Session { session_id: String, index: u64 },
    Judgment(Judgment),
}

#[derive(Debug)]
pub struct Session {
    /// Positions into the pair set, in presentation order.
    pub order: Vec<usize>,
    pub judged: Vec<bool>,
    pub n_judged: usize,
}

impl Session {
    pub fn next(&self) -> Option<usize> {
        self.order.iter().copied().find(|&p| !self.judged[p])
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum Rejection {
    UnknownSession,
    UnknownPair,
    Duplicate,
}

pub struct Store {
    seed: u64,
    n_pairs: usize,
    sessions: HashMap<String, Session>,
    n_sessions: u64,
    judgments: Vec<Judgment>,
    log: Option<File>,
}

pub fn session_id(seed: u64, index: u64) -> String {
    format!("{:016x}", mix(seed, streams::SESSION, index))
}

impl Store {
    pub fn in_memory(seed: u64, n_pairs: usize) -> Self {
        Self { seed, n_pairs, sessions: HashMap::new(), n_sessions: 0, judgments: Vec::new(), log: None }
    }

    /// Opens (or creates) the log at `path` and replays it. A torn final line
    /// from an interrupted write is cut off; any other bad line is an error.
    pub fn open(path: &Path, seed: u64, positions: impl Fn(&str) -> Option<usize>, n_pairs: usize) -> Result<Self, ServerError> {
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        let mut store = Self::in_memory(seed, n_pairs);
        let mut offset = 0usize;
        for (i, chunk) in text.split_inclusive('\n').enumerate() {
            let complete = chunk.ends_with('\n');
            let rec: LogRecord = match serde_json::from_str(chunk.trim_end()) {
                Ok(r) => r,
                Err(_) if !complete => {
                    log::warn!("{}: dropping torn final line {}", path.display(), i + 1);
                    file.set_len(offset as u64)?;
                    break;
                }
                Err(e) => return Err(ServerError::Log { line: i + 1, reason: e.to_string() }),
            };
            let bad = |reason: String| ServerError::Log { line: i + 1, reason };
            match rec {
                LogRecord::Session { session_id: id, index } => {
                    if index != store.n_sessions || id != session_id(seed, index) {
                        return Err(bad(format!("session {id} does not match seed and index {index}")));
                    }
                    store.create_session();
                }
                LogRecord::Judgment(j) => {
                    let pos = positions(&j.pair_id).ok_or_else(|| bad(format!("unknown pair {}", j.pair_id)))?;
                    store.check(&j.session_id, Some(pos)).map_err(|r| bad(format!("{r:?} judgment")))?;
                    store.apply(j, pos);
                }
            }
            offset += chunk.len();
        }
        if !text.is_empty() && !text.ends_with('\n') && offset == text.len() {
            // complete record without newline: terminate it before appending
            file.write_all(b"\n")?;
        }
        store.log = Some(file);
        Ok(store)
    }

    fn append(&mut self, rec: &LogRecord) -> Result<(), ServerError> {
        if let Some(f) = self.log.as_mut() {
            let mut line = serde_json::to_string(rec)?;
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.flush()?;
            f.sync_data()?;
        }
        Ok(())
    }

    fn create_session(&mut self) -> String {
        let index = self.n_sessions;
        let id = session_id(self.seed, index);
        let mut order: Vec<usize> = (0..self.n_pairs).collect();
        order.shuffle(&mut stream_rng(self.seed, streams::SESSION, index));
        self.sessions.insert(id.clone(), Session { order, judged: vec![false; self.n_pairs], n_judged: 0 });
        self.n_sessions += 1;
        id
    }

    pub fn new_session(&mut self) -> Result<String, ServerError> {
        let index = self.n_sessions;
        let id = session_id(self.seed, index);
        self.append(&LogRecord::Session { session_id: id.clone(), index })?;
        Ok(self.create_session())
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    pub fn check(&self, session_id: &str, position: Option<usize>) -> Result<(), Rejection> {
        let s = self.sessions.get(session_id).ok_or(Rejection::UnknownSession)?;
        let p = position.ok_or(Rejection::UnknownPair)?;
        if s.judged[p] {
            return Err(Rejection::Duplicate);
        }
        Ok(())
    }

    fn apply(&mut self, j: Judgment, position: usize) {
        let s = self.sessions.get_mut(&j.session_id).expect("checked session");
        s.judged[position] = true;
        s.n_judged += 1;
        self.judgments.push(j);
    }

    /// Validates, logs, then applies. Returns the session's judged count.
    pub fn record(&mut self, j: Judgment, position: Option<usize>) -> Result<Result<usize, Rejection>, ServerError> {
        if let Err(r) = self.check(&j.session_id, position) {
            return Ok(Err(r));
        }
        let pos = position.expect("checked position");
        let session = j.session_id.clone();
        self.append(&LogRecord::Judgment(j.clone()))?;
        self.apply(j, pos);
        Ok(Ok(self.sessions[&session].n_judged))
    }

    pub fn judgments(&self) -> &[Judgment] {
        &self.judgments
    }

    pub fn stats(&self, labels: &HashMap<String, Label>) -> Stats {
        let acc = human_accuracy(self.judgments.iter().map(|j| (j.session_id.as_str(), j.pair_id.as_str(), Label::from(j.choice))), labels)
            .expect("judgments only reference served pairs");
        Stats {
            judged: acc.judged,
            correct: acc.correct,
            accuracy: (acc.judged > 0).then_some(acc.accuracy),
            annotators: acc
                .annotators
                .into_iter()
                .map(|a| AnnotatorStats { session_id: a.annotator, judged: a.judged, correct: a.correct, accuracy: a.accuracy })
                .collect(),
        }
    }
}
