//! Time-controlled pair sampling.
//!
//! Candidates are all pairs of eligible submissions posted within the window
//! whose scores differ enough both absolutely and relatively. They are
//! accepted greedily by ascending gap, each submission used at most once.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ingest::{utc_day, Submission};
use crate::rng::{coin, stream_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairConfig {
    pub max_window: i64,
    pub min_score_diff: i64,
    pub min_ratio: f64,
    pub min_score: i64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self { max_window: 30, min_score_diff: 20, min_ratio: 2.0, min_score: 2 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PairError {
    #[error("invalid pair config: {0}")]
    Config(&'static str),
    #[error("no pairs to summarize")]
    Empty,
    #[error("pairs file: {0}")]
    Csv(#[from] csv::Error),
    #[error("pairs file row {row}: {reason}")]
    Row { row: usize, reason: String },
}

impl PairConfig {
    pub fn validate(&self) -> Result<(), PairError> {
        if self.max_window <= 0 {
            return Err(PairError::Config("max_window must be positive"));
        }
        if !(self.min_ratio >= 1.0) {
            return Err(PairError::Config("min_ratio must be at least 1"));
        }
        if self.min_score_diff < 0 {
            return Err(PairError::Config("min_score_diff must be non-negative"));
        }
        Ok(())
    }

    /// Score constraints for a candidate pair (the time constraint is separate).
    pub fn scores_eligible(&self, a: i64, b: i64) -> bool {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        lo >= self.min_score && hi - lo >= self.min_score_diff && hi as f64 >= self.min_ratio * lo as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    AWins,
    BWins,
}

impl Label {
    /// +1 when slot a won, -1 otherwise.
    pub fn sign(self) -> f64 {
        match self {
            Label::AWins => 1.0,
            Label::BWins => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::AWins => Label::BWins,
            Label::BWins => Label::AWins,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::AWins => "a",
            Label::BWins => "b",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "a" => Some(Label::AWins),
            "b" => Some(Label::BWins),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedPair {
    pub id_a: String,
    pub id_b: String,
    pub gap_seconds: i64,
    pub label: Label,
    pub score_a: i64,
    pub score_b: i64,
}

impl RankedPair {
    fn new(a: &Submission, b: &Submission) -> Self {
        let label = if a.score > b.score { Label::AWins } else { Label::BWins };
        Self {
            id_a: a.id.clone(),
            id_b: b.id.clone(),
            gap_seconds: (a.created_utc - b.created_utc).abs(),
            label,
            score_a: a.score,
            score_b: b.score,
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            id_a: self.id_b.clone(),
            id_b: self.id_a.clone(),
            gap_seconds: self.gap_seconds,
            label: self.label.flip(),
            score_a: self.score_b,
            score_b: self.score_a,
        }
    }

    /// True when the pair honors every constraint in `cfg`.
    pub fn satisfies(&self, cfg: &PairConfig) -> bool {
        let label_ok = match self.label {
            Label::AWins => self.score_a > self.score_b,
            Label::BWins => self.score_b > self.score_a,
        };
        self.gap_seconds <= cfg.max_window && cfg.scores_eligible(self.score_a, self.score_b) && label_ok
    }
}

/// A candidate edge between two positions of the time-sorted eligible list,
/// `first` posted no later than `second`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub gap: i64,
    pub first: usize,
    pub second: usize,
}

fn by_time_then_id(a: &Submission, b: &Submission) -> Ordering {
    a.created_utc.cmp(&b.created_utc).then_with(|| a.id.cmp(&b.id))
}

/// Eligible submissions sorted by `(created_utc, id)`, plus every in-window
/// score-eligible candidate in acceptance order: ascending gap, then
/// `(created_utc, id)` of the earlier member, then id of the later member.
pub(crate) fn candidates<'a>(subs: &'a [Submission], cfg: &PairConfig) -> (Vec<&'a Submission>, Vec<Candidate>) {
    let mut eligible: Vec<&Submission> = subs.iter().filter(|s| s.score >= cfg.min_score).collect();
    eligible.sort_by(|a, b| by_time_then_id(a, b));
    let mut out = Vec::new();
    for i in 0..eligible.len() {
        for j in i + 1..eligible.len() {
            let gap = eligible[j].created_utc - eligible[i].created_utc;
            if gap > cfg.max_window {
                break;
            }
            if cfg.scores_eligible(eligible[i].score, eligible[j].score) {
                out.push(Candidate { gap, first: i, second: j });
            }
        }
    }
    // positions already follow (created_utc, id), so they stand in for it
    out.sort_by(|x, y| {
        x.gap
            .cmp(&y.gap)
            .then(x.first.cmp(&y.first))
            .then_with(|| eligible[x.second].id.cmp(&eligible[y.second].id))
    });
    (eligible, out)
}

/// Greedy time-controlled pair sampling.
///
/// Output is ordered by acceptance (ascending gap). Which member lands in slot
/// `a` is a seeded coin flip per emitted pair, so slot position carries no
/// signal about the label.
pub fn sample_pairs(subs: &[Submission], cfg: &PairConfig, seed: u64) -> Vec<RankedPair> {
    let (eligible, cands) = candidates(subs, cfg);
    let mut used = vec![false; eligible.len()];
    let mut pairs = Vec::new();
    for c in cands {
        if used[c.first] || used[c.second] {
            continue;
        }
        used[c.first] = true;
        used[c.second] = true;
        let (x, y) = (eligible[c.first], eligible[c.second]);
        let pair = if coin(seed, streams::PAIR_SLOTS, pairs.len() as u64) {
            RankedPair::new(y, x)
        } else {
            RankedPair::new(x, y)
        };
        pairs.push(pair);
    }
    pairs
}

/// Random same-day pairs without a time window: within each UTC day the
/// eligible submissions are visited in seeded random order and each is matched
/// with the earliest-visited unmatched submission it satisfies the score
/// constraints with. Used as the wide-window contrast to [`sample_pairs`].
pub fn sample_day_pairs(subs: &[Submission], cfg: &PairConfig, seed: u64) -> Vec<RankedPair> {
    let mut days: BTreeMap<i64, Vec<&Submission>> = BTreeMap::new();
    for s in subs.iter().filter(|s| s.score >= cfg.min_score) {
        days.entry(utc_day(s.created_utc)).or_default().push(s);
    }
    let mut pairs = Vec::new();
    for (day, mut members) in days {
        members.sort_by(|a, b| by_time_then_id(a, b));
        members.shuffle(&mut stream_rng(seed, streams::DAY_PAIRS, day as u64));
        let mut pending: Vec<&Submission> = Vec::new();
        for s in members {
            match pending.iter().position(|p| cfg.scores_eligible(p.score, s.score)) {
                Some(k) => {
                    let other = pending.remove(k);
                    let pair = if coin(seed, streams::PAIR_SLOTS, pairs.len() as u64) {
                        RankedPair::new(s, other)
                    } else {
                        RankedPair::new(other, s)
                    };
                    pairs.push(pair);
                }
                None => pending.push(s),
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub count: usize,
    pub mean_gap: f64,
    pub median_gap: f64,
    pub mean_score_diff: f64,
    pub median_score_diff: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn pair_stats(pairs: &[RankedPair]) -> Result<PairStats, PairError> {
    if pairs.is_empty() {
        return Err(PairError::Empty);
    }
    let n = pairs.len() as f64;
    let mut gaps: Vec<f64> = pairs.iter().map(|p| p.gap_seconds as f64).collect();
    let mut diffs: Vec<f64> = pairs.iter().map(|p| (p.score_a - p.score_b).abs() as f64).collect();
    Ok(PairStats {
        count: pairs.len(),
        mean_gap: gaps.iter().sum::<f64>() / n,
        mean_score_diff: diffs.iter().sum::<f64>() / n,
        median_gap: median(&mut gaps),
        median_score_diff: median(&mut diffs),
    })
}

pub const PAIRS_HEADER: [&str; 7] = ["pair_id", "id_a", "id_b", "label", "gap_seconds", "score_a", "score_b"];

/// A pair together with its id in the pairs file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub pair_id: String,
    pub pair: RankedPair,
}

pub fn pair_id(index: usize) -> String {
    format!("p{index:06}")
}

/// Writes the pairs CSV with sequential ids `p000000, p000001, ...`.
pub fn write_pairs<W: Write>(out: W, pairs: &[RankedPair]) -> Result<(), PairError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(PAIRS_HEADER)?;
    for (i, p) in pairs.iter().enumerate() {
        w.write_record([
            pair_id(i).as_str(),
            &p.id_a,
            &p.id_b,
            p.label.as_str(),
            &p.gap_seconds.to_string(),
            &p.score_a.to_string(),
            &p.score_b.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_pairs<R: Read>(input: R) -> Result<Vec<PairRecord>, PairError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(PAIRS_HEADER.iter().copied()) {
        return Err(PairError::Row { row: 1, reason: format!("unexpected header {:?}", header) });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let bad = |reason: String| PairError::Row { row, reason };
        let int = |k: usize| rec[k].parse::<i64>().map_err(|e| bad(format!("column {}: {e}", PAIRS_HEADER[k])));
        let label = Label::parse(&rec[3]).ok_or_else(|| bad(format!("label {:?} is not a or b", &rec[3])))?;
        let pair = RankedPair {
            id_a: rec[1].to_owned(),
            id_b: rec[2].to_owned(),
            gap_seconds: int(4)?,
            label,
            score_a: int(5)?,
            score_b: int(6)?,
        };
        if pair.gap_seconds < 0 {
            return Err(bad("negative gap".into()));
        }
        out.push(PairRecord { pair_id: rec[0].to_owned(), pair });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    fn sub(id: &str, t: i64, score: i64) -> Submission {
        Submission {
            id: id.into(),
            author: "u".into(),
            community: "c".into(),
            created_utc: t,
            score,
            title: String::new(),
            image_ref: None,
            link_key: None,
        }
    }

    fn cfg(window: i64) -> PairConfig {
        PairConfig { max_window: window, ..PairConfig::default() }
    }

    #[test]
    fn single_candidate() {
        let subs = vec![sub("x", 1000, 100), sub("y", 1010, 30)];
        let pairs = sample_pairs(&subs, &cfg(30), 1);
        assert_eq!(pairs.len(), 1);
        let p = &pairs[0];
        assert_eq!(p.gap_seconds, 10);
        let winner = if p.label == Label::AWins { &p.id_a } else { &p.id_b };
        assert_eq!(winner, "x");
    }

    #[test]
    fn small_difference_rejected() {
        let subs = vec![sub("x", 1000, 25), sub("y", 1010, 40)];
        assert!(sample_pairs(&subs, &cfg(30), 1).is_empty());
    }

    #[test]
    fn greedy_prefers_tight_gaps() {
        let subs = vec![sub("t0", 1000, 100), sub("t5", 1005, 30), sub("t100", 1100, 100), sub("t103", 1103, 30)];
        let pairs = sample_pairs(&subs, &cfg(30), 9);
        let sets: HashSet<(String, String)> = pairs
            .iter()
            .map(|p| {
                let mut v = [p.id_a.clone(), p.id_b.clone()];
                v.sort();
                (v[0].clone(), v[1].clone())
            })
            .collect();
        assert_eq!(sets.len(), 2);
        assert!(sets.contains(&("t0".into(), "t5".into())));
        assert!(sets.contains(&("t100".into(), "t103".into())));
    }

    #[test]
    fn low_scores_never_pair() {
        // score 1 is below min_score even though ratio and diff would hold
        let subs = vec![sub("x", 1000, 1), sub("y", 1001, 50)];
        assert!(sample_pairs(&subs, &cfg(30), 0).is_empty());
    }

    #[test]
    fn ratio_boundary() {
        let c = PairConfig::default();
        assert!(c.scores_eligible(20, 40));
        assert!(!c.scores_eligible(21, 41));
        assert!(c.scores_eligible(2, 22));
    }

    #[test]
    fn stats_on_known_gaps() {
        let mk = |gap, a, b| RankedPair { id_a: "a".into(), id_b: "b".into(), gap_seconds: gap, label: Label::AWins, score_a: a, score_b: b };
        let s = pair_stats(&[mk(10, 50, 10), mk(20, 80, 20), mk(30, 30, 5)]).unwrap();
        assert_eq!(s.count, 3);
        assert_eq!(s.mean_gap, 20.0);
        assert_eq!(s.median_gap, 20.0);
        assert_eq!(s.median_score_diff, 40.0);
        assert!(matches!(pair_stats(&[]), Err(PairError::Empty)));
    }

    #[test]
    fn csv_round_trip_and_header() {
        let subs: Vec<_> = (0..40).map(|i| sub(&format!("s,{i}"), 1000 + 7 * i, if i % 2 == 0 { 100 } else { 10 })).collect();
        let pairs = sample_pairs(&subs, &cfg(30), 5);
        assert!(!pairs.is_empty());
        let mut buf = Vec::new();
        write_pairs(&mut buf, &pairs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("pair_id,id_a,id_b,label,gap_seconds,score_a,score_b\n"));
        let back = read_pairs(&buf[..]).unwrap();
        assert_eq!(back.iter().map(|r| r.pair.clone()).collect::<Vec<_>>(), pairs);
        assert_eq!(back[0].pair_id, "p000000");
    }

    #[test]
    fn bad_label_reports_row() {
        let text = "pair_id,id_a,id_b,label,gap_seconds,score_a,score_b\np0,x,y,c,3,40,10\n";
        assert!(matches!(read_pairs(text.as_bytes()), Err(PairError::Row { row: 2, .. })));
    }

    #[test]
    fn day_pairs_stay_within_a_day_and_honor_scores() {
        let day = 86_400;
        let subs: Vec<_> = (0..300).map(|i| sub(&format!("d{i}"), (i as i64 % 3) * day + 97 * i as i64 % day, 2 + (i as i64 * 37) % 200)).collect();
        let pairs = sample_day_pairs(&subs, &cfg(30), 3);
        assert!(pairs.len() > 50);
        let by_id: HashMap<&str, &Submission> = subs.iter().map(|s| (s.id.as_str(), s)).collect();
        let mut seen = HashSet::new();
        let loose = PairConfig { max_window: day, ..cfg(30) };
        for p in &pairs {
            assert!(p.satisfies(&loose));
            assert_eq!(utc_day(by_id[p.id_a.as_str()].created_utc), utc_day(by_id[p.id_b.as_str()].created_utc));
            assert!(seen.insert(p.id_a.clone()) && seen.insert(p.id_b.clone()));
        }
        assert!(pairs.iter().any(|p| p.gap_seconds > 3600));
        assert_eq!(pairs, sample_day_pairs(&subs, &cfg(30), 3));
    }
}
