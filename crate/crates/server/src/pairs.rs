use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use pairpop_core::ingest::{read_submissions_file, DEFAULT_MAX_ERROR_RATE};
use pairpop_core::pairing::read_pairs;
use pairpop_core::{Label, Submission};

use crate::api::{PairView, Side};
use crate::ServerError;

#[derive(Debug, Clone)]
pub struct ServedPair {
    pub pair_id: String,
    pub a: Side,
    pub b: Side,
    pub label: Label,
}

impl ServedPair {
    pub fn view(&self) -> PairView {
        PairView { pair_id: self.pair_id.clone(), a: self.a.clone(), b: self.b.clone() }
    }
}

/// The immutable set of pairs under study, plus where their images live.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pairs: Vec<ServedPair>,
    index: HashMap<String, usize>,
    images: HashMap<String, PathBuf>,
}

impl PairSet {
    /// Pairs in file order. Image paths are `image_root` joined with each
    /// submission's image reference.
    pub fn new(records: Vec<(String, Submission, Submission, Label)>, image_root: Option<&Path>) -> Result<Self, ServerError> {
        let mut set = PairSet::default();
        for (pair_id, a, b, label) in records {
            if set.index.insert(pair_id.clone(), set.pairs.len()).is_some() {
                return Err(ServerError::Data(format!("duplicate pair id {pair_id}")));
            }
            let mut side = |s: &Submission| {
                let image_url = match (&s.image_ref, image_root) {
                    (Some(r), Some(root)) => {
                        set.images.insert(s.id.clone(), root.join(r));
                        Some(format!("/img/{}", s.id))
                    }
                    _ => None,
                };
                Side { id: s.id.clone(), title: s.title.clone(), image_url }
            };
            let (a, b) = (side(&a), side(&b));
            set.pairs.push(ServedPair { pair_id, a, b, label });
        }
        Ok(set)
    }

    /// Reads a pairs CSV and the submissions it references.
    pub fn load(pairs_csv: &Path, submissions: &Path, image_root: Option<&Path>) -> Result<Self, ServerError> {
        let file = File::open(pairs_csv).map_err(|e| ServerError::Data(format!("{}: {e}", pairs_csv.display())))?;
        let records = read_pairs(BufReader::new(file)).map_err(|e| ServerError::Data(format!("{}: {e}", pairs_csv.display())))?;
        let parsed = read_submissions_file(submissions, DEFAULT_MAX_ERROR_RATE).map_err(|e| ServerError::Data(e.to_string()))?;
        let by_id: HashMap<&str, &Submission> = parsed.records.iter().map(|s| (s.id.as_str(), s)).collect();
        let lookup = |id: &str| {
            by_id
                .get(id)
                .map(|s| (*s).clone())
                .ok_or_else(|| ServerError::Data(format!("{}: submission {id} not found", submissions.display())))
        };
        let rows = records
            .into_iter()
            .map(|r| Ok((r.pair_id, lookup(&r.pair.id_a)?, lookup(&r.pair.id_b)?, r.pair.label)))
            .collect::<Result<Vec<_>, ServerError>>()?;
        Self::new(rows, image_root)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, i: usize) -> &ServedPair {
        &self.pairs[i]
    }

    pub fn position(&self, pair_id: &str) -> Option<usize> {
        self.index.get(pair_id).copied()
    }

    pub fn labels(&self) -> HashMap<String, Label> {
        self.pairs.iter().map(|p| (p.pair_id.clone(), p.label)).collect()
    }

    pub fn image_path(&self, submission_id: &str) -> Option<&Path> {
        self.images.get(submission_id).map(PathBuf::as_path)
    }
}
