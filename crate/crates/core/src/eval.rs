//! Cross validation, held-out evaluation, correlation analysis and the
//! exploratory statistics (diurnal profiles, mean normalization, moments,
//! human accuracy).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::features::{Dataset, Extractor, FeatureError, FittedFeaturizer, ItemCache};
use crate::pairing::{Label, RankedPair};
use crate::ranker::{ModelKind, PairExample, Ranker, RankerError, RankerModel, TrainConfig};
use crate::rng::{mix, stream_rng, streams};
use crate::time::calendar;
use crate::Submission;

pub const MIN_CV_PAIRS: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("need at least {min} pairs, got {n}")]
    TooFewPairs { n: usize, min: usize },
    #[error("need at least {min} values, got {n}")]
    TooFewValues { n: usize, min: usize },
    #[error("inputs differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance; statistic undefined")]
    ZeroVariance,
    #[error("judgment references unknown pair {0}")]
    UnknownPair(String),
    #[error("held-out set already evaluated with this model (digest {0}); pass --force to repeat")]
    AlreadyEvaluated(String),
    #[error("test fraction must lie in (0, 1), got {0}")]
    TestFraction(f64),
    #[error("ledger {path}: {source}")]
    Ledger { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Ranker(#[from] RankerError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Mean and 95% Student-t half-width. The half-width is NaN below two values.
pub fn t_interval(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid t").inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

/// Train/test index sets of one split: a function of `(n, test_fraction,
/// seed, split)` only.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64, split: usize) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, streams::CV_SPLIT, split as u64));
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub n_splits: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { n_splits: 15, test_fraction: 0.2, seed: 0 }
    }
}

/// Data and settings shared by every split of an experiment.
pub struct Experiment<'a> {
    pub dataset: &'a Dataset,
    pub extractor: &'a Extractor,
    pub cache: &'a ItemCache,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAccuracy {
    pub accuracy: f64,
    pub n: usize,
    pub ties: usize,
}

impl Experiment<'_> {
    pub fn examples(&self, fz: &FittedFeaturizer, pairs: &[&RankedPair]) -> Result<Vec<PairExample>, EvalError> {
        pairs
            .iter()
            .map(|p| {
                let a = fz.featurize_id(self.dataset, self.cache, &p.id_a)?;
                let b = fz.featurize_id(self.dataset, self.cache, &p.id_b)?;
                Ok(PairExample::new(a, b, p.label))
            })
            .collect()
    }

    /// Fits the featurizer on the items of `pairs` and trains on them.
    pub fn fit(&self, pairs: &[&RankedPair], seed: u64) -> Result<RankerModel, EvalError> {
        let ids = pairs.iter().flat_map(|p| [p.id_a.as_str(), p.id_b.as_str()]);
        let fz = FittedFeaturizer::fit(self.extractor, self.dataset, self.cache, ids)?;
        let examples = self.examples(&fz, pairs)?;
        let cfg = TrainConfig { seed, ..self.train };
        let ranker = Ranker::train(&examples, &cfg)?;
        Ok(RankerModel::new(fz, ranker))
    }

    /// Pair accuracy with seeded coin flips on exact ties.
    pub fn accuracy(&self, model: &RankerModel, pairs: &[&RankedPair], tie_seed: u64) -> Result<PairAccuracy, EvalError> {
        let mut correct = 0usize;
        let mut ties = 0usize;
        for (i, p) in pairs.iter().enumerate() {
            let a = model.featurizer.featurize_id(self.dataset, self.cache, &p.id_a)?;
            let b = model.featurizer.featurize_id(self.dataset, self.cache, &p.id_b)?;
            let pred = model.ranker.predict_pair(&a, &b)?;
            ties += pred.is_tie() as usize;
            correct += (pred.label(tie_seed, i as u64) == p.label) as usize;
        }
        let n = pairs.len();
        Ok(PairAccuracy { accuracy: if n == 0 { f64::NAN } else { correct as f64 / n as f64 }, n, ties })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub ties: usize,
    pub best_epoch: usize,
}

/// Share of the linear model's absolute weight mass falling in one group,
/// averaged over splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupShare {
    pub group: String,
    pub dim: usize,
    pub weight_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub features: Vec<String>,
    pub model: ModelKind,
    pub n_pairs: usize,
    pub splits: Vec<SplitResult>,
    pub mean: f64,
    pub ci_half_width: f64,
    pub groups: Vec<GroupShare>,
}

impl CvReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.splits.iter().map(|s| s.accuracy).collect()
    }

    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "features: {}   model: {:?}   pairs: {}", self.features.join(","), self.model, self.n_pairs);
        let _ = writeln!(s, "{:>5} {:>7} {:>6} {:>9} {:>5} {:>5}", "split", "train", "test", "accuracy", "ties", "epoch");
        for r in &self.splits {
            let _ = writeln!(s, "{:>5} {:>7} {:>6} {:>9.4} {:>5} {:>5}", r.split, r.n_train, r.n_test, r.accuracy, r.ties, r.best_epoch);
        }
        let _ = writeln!(s, "mean accuracy {:.2}% +/- {:.2} (95% t-interval, {} splits)", 100.0 * self.mean, 100.0 * self.ci_half_width, self.splits.len());
        if !self.groups.is_empty() {
            let _ = writeln!(s, "weight share by group:");
            for g in &self.groups {
                let _ = writeln!(s, "  {:<24} dim {:>6}  {:>6.2}%", g.group, g.dim, 100.0 * g.weight_share);
            }
        }
        s
    }

    /// Line-oriented records: one `split` line per split, then `summary` and
    /// `group` lines, tab separated.
    pub fn to_records(&self) -> String {
        let feats = self.features.join(",");
        let model = format!("{:?}", self.model).to_lowercase();
        let mut s = String::from("record\tfeatures\tmodel\tsplit\tn_train\tn_test\taccuracy\tci_half_width\n");
        for r in &self.splits {
            let _ = writeln!(s, "split\t{feats}\t{model}\t{}\t{}\t{}\t{:?}\t", r.split, r.n_train, r.n_test, r.accuracy);
        }
        let _ = writeln!(s, "summary\t{feats}\t{model}\t\t\t\t{:?}\t{:?}", self.mean, self.ci_half_width);
        for g in &self.groups {
            let _ = writeln!(s, "group\t{}\t{model}\t\t{}\t\t{:?}\t", g.group, g.dim, g.weight_share);
        }
        s
    }
}

/// Repeated random train/test splits of `pairs`; the pair is the atomic unit.
/// Splits run in parallel and are reduced in split order.
pub fn cross_validate(exp: &Experiment<'_>, pairs: &[RankedPair], cv: &CvConfig) -> Result<CvReport, EvalError> {
    if pairs.len() < MIN_CV_PAIRS {
        return Err(EvalError::TooFewPairs { n: pairs.len(), min: MIN_CV_PAIRS });
    }
    if !(cv.test_fraction > 0.0 && cv.test_fraction < 1.0) {
        return Err(EvalError::TestFraction(cv.test_fraction));
    }
    let runs = (0..cv.n_splits.max(1))
        .into_par_iter()
        .map(|split| {
            let (train_idx, test_idx) = split_indices(pairs.len(), cv.test_fraction, cv.seed, split);
            let train: Vec<&RankedPair> = train_idx.iter().map(|&i| &pairs[i]).collect();
            let test: Vec<&RankedPair> = test_idx.iter().map(|&i| &pairs[i]).collect();
            let model = exp.fit(&train, mix(cv.seed, streams::INIT, split as u64))?;
            let acc = exp.accuracy(&model, &test, mix(cv.seed, streams::TIE_BREAK, split as u64))?;
            let result = SplitResult {
                split,
                n_train: train.len(),
                n_test: test.len(),
                accuracy: acc.accuracy,
                ties: acc.ties,
                best_epoch: model.ranker.best_epoch,
            };
            Ok((result, group_masses(&model)))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;

    let accs: Vec<f64> = runs.iter().map(|r| r.0.accuracy).collect();
    let (mean, half) = t_interval(&accs);
    let groups = match runs.first().and_then(|r| r.1.as_ref()) {
        Some(first) => first
            .iter()
            .enumerate()
            .map(|(g, (name, dim, _))| {
                let share = runs.iter().filter_map(|r| r.1.as_ref()).map(|m| m[g].2).sum::<f64>() / runs.len() as f64;
                GroupShare { group: name.clone(), dim: *dim, weight_share: share }
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(CvReport {
        features: exp.extractor.groups().iter().map(ToString::to_string).collect(),
        model: exp.train.model,
        n_pairs: pairs.len(),
        splits: runs.into_iter().map(|r| r.0).collect(),
        mean,
        ci_half_width: half,
        groups,
    })
}

/// `(group, dim, share of |w| mass)` for linear models. Groups whose dims may
/// differ between splits (vocabularies) are still reported by name.
fn group_masses(model: &RankerModel) -> Option<Vec<(String, usize, f64)>> {
    let layout = &model.featurizer.layout;
    let masses: Vec<f64> = layout
        .groups
        .iter()
        .map(|g| model.ranker.weight_mass(g.offset..g.offset + g.dim))
        .collect::<Option<_>>()?;
    let total: f64 = masses.iter().sum();
    Some(
        layout
            .groups
            .iter()
            .zip(masses)
            .map(|(g, m)| (g.name.clone(), g.dim, if total > 0.0 { m / total } else { 0.0 }))
            .collect(),
    )
}

/// Digest identifying one (model, pair file) evaluation.
pub fn heldout_digest(model_bytes: &[u8], pair_bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(Sha256::digest(model_bytes));
    h.update(Sha256::digest(pair_bytes));
    hex::encode(h.finalize())
}

/// Append-only list of held-out evaluations already performed.
pub struct HeldoutLedger {
    path: PathBuf,
}

impl HeldoutLedger {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    fn err(&self, source: std::io::Error) -> EvalError {
        EvalError::Ledger { path: self.path.clone(), source }
    }

    pub fn contains(&self, digest: &str) -> Result<bool, EvalError> {
        let file = match fs::File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(false),
            Err(e) => return Err(self.err(e)),
        };
        for line in BufReader::new(file).lines() {
            if line.map_err(|e| self.err(e))?.split('\t').next() == Some(digest) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Refuses a digest seen before unless `force`; records it otherwise.
    pub fn admit(&self, digest: &str, force: bool) -> Result<(), EvalError> {
        if self.contains(digest)? && !force {
            return Err(EvalError::AlreadyEvaluated(digest.to_owned()));
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path).map_err(|e| self.err(e))?;
        writeln!(f, "{digest}\t{}", if force { "forced" } else { "first" }).map_err(|e| self.err(e))?;
        f.sync_all().map_err(|e| self.err(e))
    }
}

/// Ranks starting at 1, ties sharing the average of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFewValues { n: xs.len(), min: 2 });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub index: usize,
    /// `None` for a constant column.
    pub r: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant: bool,
}

/// Pearson R of each column against `scores` with a Fisher-z interval at
/// level `alpha / n_columns`; significant when the interval excludes 0.
pub fn feature_correlations(scores: &[f64], columns: &[Vec<f64>], alpha: f64) -> Result<Vec<FeatureCorrelation>, EvalError> {
    let n = scores.len();
    if n < 3 {
        return Err(EvalError::TooFewValues { n, min: 3 });
    }
    let level = alpha / columns.len().max(1) as f64;
    let zcrit = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - level / 2.0);
    columns
        .iter()
        .enumerate()
        .map(|(index, col)| {
            let r = match pearson(scores, col) {
                Ok(r) => r,
                Err(EvalError::ZeroVariance) => {
                    return Ok(FeatureCorrelation { index, r: None, ci_low: f64::NAN, ci_high: f64::NAN, significant: false })
                }
                Err(e) => return Err(e),
            };
            let (lo, hi) = if n <= 3 {
                (-1.0, 1.0)
            } else {
                let z = r.atanh();
                let se = 1.0 / ((n - 3) as f64).sqrt();
                if z.is_infinite() {
                    (r, r)
                } else {
                    ((z - zcrit * se).tanh(), (z + zcrit * se).tanh())
                }
            };
            Ok(FeatureCorrelation { index, r: Some(r), ci_low: lo, ci_high: hi, significant: lo > 0.0 || hi < 0.0 })
        })
        .collect()
}

/// One point of a binned profile: `(x, mean, ci_low, ci_high, count)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub x: i64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub count: usize,
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: usize,
    sum: f64,
    sumsq: f64,
}

impl Moments {
    fn add(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sumsq += o.sumsq;
    }

    fn point(&self, x: i64) -> ProfilePoint {
        if self.n == 0 {
            return ProfilePoint { x, mean: f64::NAN, ci_low: f64::NAN, ci_high: f64::NAN, count: 0 };
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        if self.n < 2 {
            return ProfilePoint { x, mean, ci_low: f64::NAN, ci_high: f64::NAN, count: 1 };
        }
        let var = ((self.sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
        let t = StudentsT::new(0.0, 1.0, n - 1.0).expect("valid t").inverse_cdf(0.975);
        let half = t * (var / n).sqrt();
        ProfilePoint { x, mean, ci_low: mean - half, ci_high: mean + half, count: self.n }
    }
}

/// For every minute of the UTC day, score statistics over submissions whose
/// minute-of-day lies in `[m - w/2, m + w - w/2 - 1]` (wrapping midnight), so
/// each submission counts in exactly `window_minutes` points.
pub fn diurnal_profile(subs: &[Submission], window_minutes: usize) -> Vec<ProfilePoint> {
    const DAY: usize = 1440;
    let w = window_minutes.clamp(1, DAY);
    let mut per_minute = vec![Moments::default(); DAY];
    for s in subs {
        let (minute, hour, _, _) = calendar(s.created_utc);
        per_minute[hour * 60 + minute].add(s.score as f64);
    }
    let back = w / 2;
    (0..DAY)
        .map(|m| {
            let mut acc = Moments::default();
            for k in 0..w {
                acc.merge(&per_minute[(m + DAY + k - back) % DAY]);
            }
            acc.point(m as i64)
        })
        .collect()
}

/// Score statistics per day of week (Monday = 0).
pub fn weekday_profile(subs: &[Submission]) -> Vec<ProfilePoint> {
    let mut bins = vec![Moments::default(); 7];
    for s in subs {
        bins[calendar(s.created_utc).2].add(s.score as f64);
    }
    bins.iter().enumerate().map(|(d, m)| m.point(d as i64)).collect()
}

/// Score statistics per calendar year, for years with submissions.
pub fn year_profile(subs: &[Submission]) -> Vec<ProfilePoint> {
    let mut bins: BTreeMap<i32, Moments> = BTreeMap::new();
    for s in subs {
        bins.entry(calendar(s.created_utc).3).or_default().add(s.score as f64);
    }
    bins.iter().map(|(y, m)| m.point(*y as i64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanNormalized {
    /// Aligned with the input; `None` when no neighbor exists or their mean is 0.
    pub values: Vec<Option<f64>>,
    pub neighbor_counts: Vec<usize>,
    /// Fraction of submissions with at least 5 in-window neighbors.
    pub coverage: f64,
    pub mean_neighbors: f64,
    pub undefined: usize,
}

/// Divides each score by the mean score of the other submissions within
/// `window_secs / 2` seconds of it.
pub fn mean_normalize(subs: &[Submission], window_secs: i64) -> MeanNormalized {
    let half = window_secs / 2;
    let mut order: Vec<usize> = (0..subs.len()).collect();
    order.sort_by_key(|&i| (subs[i].created_utc, i));
    let times: Vec<i64> = order.iter().map(|&i| subs[i].created_utc).collect();
    let mut prefix = vec![0.0; order.len() + 1];
    for (k, &i) in order.iter().enumerate() {
        prefix[k + 1] = prefix[k] + subs[i].score as f64;
    }
    let mut values = vec![None; subs.len()];
    let mut neighbor_counts = vec![0; subs.len()];
    for (k, &i) in order.iter().enumerate() {
        let t = times[k];
        let lo = times.partition_point(|&x| x < t - half);
        let hi = times.partition_point(|&x| x <= t + half);
        let count = hi - lo - 1;
        neighbor_counts[i] = count;
        if count > 0 {
            let mean = (prefix[hi] - prefix[lo] - subs[i].score as f64) / count as f64;
            if mean != 0.0 {
                values[i] = Some(subs[i].score as f64 / mean);
            }
        }
    }
    let n = subs.len().max(1) as f64;
    MeanNormalized {
        coverage: neighbor_counts.iter().filter(|&&c| c >= 5).count() as f64 / n,
        mean_neighbors: neighbor_counts.iter().sum::<usize>() as f64 / n,
        undefined: values.iter().filter(|v| v.is_none()).count(),
        values,
        neighbor_counts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeMoments {
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Moment estimators `g1 = m3 / m2^1.5` and `g2 = m4 / m2^2 - 3`.
pub fn score_moments(scores: &[f64]) -> Result<ShapeMoments, EvalError> {
    let n = scores.len();
    if n < 4 {
        return Err(EvalError::TooFewValues { n, min: 4 });
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in scores {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let nf = n as f64;
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    if m2 == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok(ShapeMoments { skewness: m3 / m2.powf(1.5), excess_kurtosis: m4 / (m2 * m2) - 3.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorAccuracy {
    pub annotator: String,
    pub judged: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanAccuracy {
    pub annotators: Vec<AnnotatorAccuracy>,
    pub judged: usize,
    pub correct: usize,
    /// Mean over all judgments; NaN when there are none.
    pub accuracy: f64,
}

/// Scores `(annotator, pair_id, choice)` judgments against pair labels.
pub fn human_accuracy<'a>(
    judgments: impl IntoIterator<Item = (&'a str, &'a str, Label)>,
    labels: &HashMap<String, Label>,
) -> Result<HumanAccuracy, EvalError> {
    let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (who, pair, choice) in judgments {
        let truth = labels.get(pair).ok_or_else(|| EvalError::UnknownPair(pair.to_owned()))?;
        let e = per.entry(who).or_default();
        e.0 += 1;
        e.1 += (*truth == choice) as usize;
    }
    let annotators: Vec<AnnotatorAccuracy> = per
        .into_iter()
        .map(|(a, (n, c))| AnnotatorAccuracy { annotator: a.to_owned(), judged: n, correct: c, accuracy: c as f64 / n as f64 })
        .collect();
    let judged = annotators.iter().map(|a| a.judged).sum();
    let correct = annotators.iter().map(|a| a.correct).sum();
    let accuracy = if judged == 0 { f64::NAN } else { correct as f64 / judged as f64 };
    Ok(HumanAccuracy { annotators, judged, correct, accuracy })
}

/// Items around each requested percentile of `scores` (ascending order, ties
/// by id): `per_bucket` consecutive items centered on rank `p/100 * (n-1)`.
pub fn percentile_buckets<'a>(scores: &[(&'a str, f64)], percentiles: &[f64], per_bucket: usize) -> Vec<Vec<&'a str>> {
    let mut sorted: Vec<(&str, f64)> = scores.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let n = sorted.len();
    percentiles
        .iter()
        .map(|p| {
            if n == 0 {
                return Vec::new();
            }
            let k = per_bucket.min(n);
            let center = ((p / 100.0).clamp(0.0, 1.0) * (n - 1) as f64).round() as usize;
            let start = center.saturating_sub(k / 2).min(n - k);
            sorted[start..start + k].iter().map(|e| e.0).collect()
        })
        .collect()
}

/// Writes `x<TAB>y<TAB>ci_low<TAB>ci_high<TAB>count` plot rows.
pub fn write_profile<W: Write>(mut out: W, points: &[ProfilePoint]) -> std::io::Result<()> {
    writeln!(out, "x\ty\tci_low\tci_high\tcount")?;
    for p in points {
        writeln!(out, "{}\t{:?}\t{:?}\t{:?}\t{}", p.x, p.mean, p.ci_low, p.ci_high, p.count)?;
    }
    Ok(())
}

/// Accuracy of a ranker on held-out pairs in a single pass.
pub fn heldout_accuracy(
    model: &RankerModel,
    dataset: &Dataset,
    cache: &ItemCache,
    pairs: &[RankedPair],
    tie_seed: u64,
) -> Result<PairAccuracy, EvalError> {
    let extractor = Extractor::new(&model.featurizer.groups, model.featurizer.options);
    let exp = Experiment { dataset, extractor: &extractor, cache, train: model.ranker.config };
    let refs: Vec<&RankedPair> = pairs.iter().collect();
    exp.accuracy(model, &refs, tie_seed)
}

pub fn ledger_path_for(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".heldout");
    PathBuf::from(s)
}
