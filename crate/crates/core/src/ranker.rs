//! Pairwise hinge rankers: a linear model on standardized feature
//! differences and a one-hidden-layer network on standardized concatenations.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::features::{FeatureError, FittedFeaturizer};
use crate::pairing::Label;
use crate::rng::{coin, stream_rng, streams};
use crate::vector::FeatureVector;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RankerError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("split leaves {train} training and {validation} validation pairs")]
    EmptySplit { train: usize, validation: usize },
    #[error("feature dimension mismatch: model has {expected}, input has {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("training diverged (non-finite weights or loss) in epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("{0}")]
    Unsupported(&'static str),
    #[error("could not move the check point away from hinge kinks")]
    KinkProximity,
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model format version {0} is not supported (expected {MODEL_FORMAT_VERSION})")]
    Version(u32),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Hidden,
}

impl std::str::FromStr for ModelKind {
    type Err = RankerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "hidden" | "mlp" => Ok(ModelKind::Hidden),
            _ => Err(RankerError::Config(format!("unknown model kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub l1: f64,
    pub l2: f64,
    pub margin: f64,
    pub epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Linear,
            hidden_units: 100,
            learning_rate: 0.01,
            l1: 0.0,
            l2: 1e-4,
            margin: 1.0,
            epochs: 50,
            patience: 5,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RankerError> {
        let bad = |m: &str| Err(RankerError::Config(m.to_owned()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.l1 >= 0.0 && self.l2 >= 0.0 && self.l1.is_finite() && self.l2.is_finite()) {
            return bad("regularization strengths must be non-negative");
        }
        if 2.0 * self.learning_rate * self.l2 >= 1.0 {
            return bad("learning_rate * l2 too large; weight decay would flip signs");
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation fraction must lie in (0, 1)");
        }
        if self.model == ModelKind::Hidden && self.hidden_units == 0 {
            return bad("hidden model needs at least one unit");
        }
        Ok(())
    }
}

/// A training pair: `y` is +1 when `a` won and -1 when `b` won.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub a: FeatureVector,
    pub b: FeatureVector,
    pub y: f64,
}

impl PairExample {
    pub fn new(a: FeatureVector, b: FeatureVector, label: Label) -> Self {
        Self { a, b, y: label.sign() }
    }
}

/// Per-feature mean and inverse standard deviation from training items.
/// Zero-variance features get an inverse of 0 and so drop out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(dim: usize, items: impl IntoIterator<Item = &'a FeatureVector>) -> Self {
        let mut sum = vec![0.0; dim];
        let mut n = 0usize;
        let items: Vec<&FeatureVector> = items.into_iter().collect();
        for v in &items {
            n += 1;
            for &(j, x) in v.entries() {
                sum[j as usize] += x;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| if n > 0 { s / n as f64 } else { 0.0 }).collect();
        // two-pass variance: zeros contribute mean^2 each
        let mut sq: Vec<f64> = mean.iter().map(|m| m * m * n as f64).collect();
        for v in &items {
            for &(j, x) in v.entries() {
                let m = mean[j as usize];
                sq[j as usize] += (x - m) * (x - m) - m * m;
            }
        }
        let inv_std = sq
            .iter()
            .map(|&s| {
                let var = if n > 0 { s / n as f64 } else { 0.0 };
                let sd = var.max(0.0).sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();
        Self { mean, inv_std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &FeatureVector) -> Vec<f64> {
        let mut out: Vec<f64> = self.mean.iter().zip(&self.inv_std).map(|(m, s)| -m * s).collect();
        for &(j, x) in v.entries() {
            let j = j as usize;
            out[j] = (x - self.mean[j]) * self.inv_std[j];
        }
        out
    }

    /// Standardized `a - b`; the means cancel, so this stays sparse.
    fn diff(&self, a: &FeatureVector, b: &FeatureVector) -> Vec<(u32, f64)> {
        a.sub(b)
            .entries()
            .iter()
            .filter(|e| self.inv_std[e.0 as usize] != 0.0)
            .map(|&(j, x)| (j, x * self.inv_std[j as usize]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weights {
    Linear {
        w: Vec<f64>,
    },
    /// `w1` is `units` rows of `[left | right]`, each half of item dimension.
    Hidden {
        units: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        v: Vec<f64>,
    },
}

impl Weights {
    fn init(cfg: &TrainConfig, dim: usize) -> Self {
        match cfg.model {
            ModelKind::Linear => Weights::Linear { w: vec![0.0; dim] },
            ModelKind::Hidden => {
                let units = cfg.hidden_units;
                let mut rng = stream_rng(cfg.seed, streams::INIT, 0);
                let a1 = (6.0 / (2 * dim + units) as f64).sqrt();
                let a2 = (6.0 / (units + 1) as f64).sqrt();
                let w1 = (0..units * 2 * dim).map(|_| rng.random_range(-a1..a1)).collect();
                let v = (0..units).map(|_| rng.random_range(-a2..a2)).collect();
                Weights::Hidden { units, w1, b1: vec![0.0; units], v }
            }
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Weights::Linear { w } => w.iter().all(|x| x.is_finite()),
            Weights::Hidden { w1, b1, v, .. } => w1.iter().chain(b1).chain(v).all(|x| x.is_finite()),
        }
    }

    /// Flat parameter view with a flag per parameter telling whether it is
    /// regularized (biases are not).
    fn flat(&self) -> (Vec<f64>, Vec<bool>) {
        match self {
            Weights::Linear { w } => (w.clone(), vec![true; w.len()]),
            Weights::Hidden { w1, b1, v, .. } => {
                let params = w1.iter().chain(b1).chain(v).copied().collect();
                let mask = std::iter::repeat_n(true, w1.len())
                    .chain(std::iter::repeat_n(false, b1.len()))
                    .chain(std::iter::repeat_n(true, v.len()))
                    .collect();
                (params, mask)
            }
        }
    }

    fn regularize(&mut self, lr: f64, l1: f64, l2: f64) {
        if l1 == 0.0 && l2 == 0.0 {
            return;
        }
        let decay = 1.0 - 2.0 * lr * l2;
        let thr = lr * l1;
        let shrink = |x: &mut f64| {
            let y = *x * decay;
            *x = y.signum() * (y.abs() - thr).max(0.0);
        };
        match self {
            Weights::Linear { w } => w.iter_mut().for_each(shrink),
            Weights::Hidden { w1, v, .. } => w1.iter_mut().chain(v.iter_mut()).for_each(shrink),
        }
    }
}

struct HiddenPass {
    s: f64,
    h1: Vec<f64>,
    h2: Vec<f64>,
}

/// `net(za ++ zb) - net(zb ++ za)` with `net(z) = v . tanh(W1 z + b1)`.
fn hidden_forward(w1: &[f64], b1: &[f64], v: &[f64], za: &[f64], zb: &[f64]) -> HiddenPass {
    let d = za.len();
    let units = b1.len();
    let mut h1 = Vec::with_capacity(units);
    let mut h2 = Vec::with_capacity(units);
    for u in 0..units {
        let row = &w1[u * 2 * d..(u + 1) * 2 * d];
        let (left, right) = row.split_at(d);
        let (mut la, mut lb, mut ra, mut rb) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..d {
            la += left[j] * za[j];
            lb += left[j] * zb[j];
            ra += right[j] * za[j];
            rb += right[j] * zb[j];
        }
        h1.push((b1[u] + la + rb).tanh());
        h2.push((b1[u] + lb + ra).tanh());
    }
    let s = (0..units).map(|u| v[u] * (h1[u] - h2[u])).sum();
    HiddenPass { s, h1, h2 }
}

/// Adds `c * ds/dtheta` for the hidden model into the flat gradient layout
/// `[w1 | b1 | v]`.
fn hidden_grad_into(pass: &HiddenPass, v: &[f64], za: &[f64], zb: &[f64], c: f64, grad: &mut [f64]) {
    let d = za.len();
    let units = v.len();
    let (gw1, rest) = grad.split_at_mut(units * 2 * d);
    let (gb1, gv) = rest.split_at_mut(units);
    for u in 0..units {
        let g1 = v[u] * (1.0 - pass.h1[u] * pass.h1[u]);
        let g2 = v[u] * (1.0 - pass.h2[u] * pass.h2[u]);
        gv[u] += c * (pass.h1[u] - pass.h2[u]);
        gb1[u] += c * (g1 - g2);
        let row = &mut gw1[u * 2 * d..(u + 1) * 2 * d];
        let (left, right) = row.split_at_mut(d);
        for j in 0..d {
            left[j] += c * (g1 * za[j] - g2 * zb[j]);
            right[j] += c * (g1 * zb[j] - g2 * za[j]);
        }
    }
}

/// Margin of a pair and whether the model is exactly indifferent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPrediction {
    pub margin: f64,
}

impl PairPrediction {
    pub fn is_tie(&self) -> bool {
        self.margin == 0.0
    }

    /// Predicted label; exact ties go to a coin keyed on `(seed, index)`.
    pub fn label(&self, seed: u64, index: u64) -> Label {
        if self.margin > 0.0 {
            Label::AWins
        } else if self.margin < 0.0 {
            Label::BWins
        } else if coin(seed, streams::TIE_BREAK, index) {
            Label::AWins
        } else {
            Label::BWins
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_accuracy: f64,
}

/// Result of a finite-difference check of the hinge objective gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub coordinates: usize,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranker {
    pub config: TrainConfig,
    pub standardizer: Standardizer,
    pub weights: Weights,
    pub best_epoch: usize,
    pub history: Vec<EpochStat>,
}

enum Prepared {
    Linear(Vec<Vec<(u32, f64)>>),
    Hidden(Vec<(Vec<f64>, Vec<f64>)>),
}

impl Ranker {
    /// Trains with SGD on the hinge loss, holding out a seeded validation
    /// fraction for early stopping. Returns the best-validation snapshot.
    pub fn train(examples: &[PairExample], cfg: &TrainConfig) -> Result<Self, RankerError> {
        cfg.validate()?;
        let dim = examples.first().map_or(0, |e| e.a.dim());
        for e in examples {
            for v in [&e.a, &e.b] {
                if v.dim() != dim {
                    return Err(RankerError::Dimension { expected: dim, actual: v.dim() });
                }
            }
        }
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut stream_rng(cfg.seed, streams::VALIDATION, 0));
        let n_val = (examples.len() as f64 * cfg.validation_fraction).round() as usize;
        let (val_idx, train_idx) = order.split_at(n_val.min(examples.len()));
        if val_idx.is_empty() || train_idx.is_empty() {
            return Err(RankerError::EmptySplit { train: train_idx.len(), validation: val_idx.len() });
        }
        let train: Vec<&PairExample> = train_idx.iter().map(|&i| &examples[i]).collect();
        let val: Vec<&PairExample> = val_idx.iter().map(|&i| &examples[i]).collect();
        let standardizer = Standardizer::fit(dim, train.iter().flat_map(|e| [&e.a, &e.b]));

        let mut ranker = Ranker { config: *cfg, standardizer, weights: Weights::init(cfg, dim), best_epoch: 0, history: Vec::new() };
        let prepared = ranker.prepare(&train);
        let val_prepared = ranker.prepare(&val);
        let val_y: Vec<f64> = val.iter().map(|e| e.y).collect();

        let mut best: Option<(f64, Weights, usize)> = None;
        let mut since_best = 0usize;
        let mut pos: Vec<usize> = (0..train.len()).collect();
        for epoch in 1..=cfg.epochs {
            pos.shuffle(&mut stream_rng(cfg.seed, streams::SHUFFLE, epoch as u64));
            let mut loss = 0.0;
            for &i in &pos {
                loss += ranker.sgd_step(&prepared, i, train[i].y);
            }
            let train_loss = loss / train.len() as f64;
            if !train_loss.is_finite() || !ranker.weights.is_finite() {
                return Err(RankerError::NonFinite { epoch });
            }
            let margins = ranker.margins(&val_prepared);
            let acc = accuracy_with_ties(&margins, &val_y);
            ranker.history.push(EpochStat { epoch, train_loss, validation_accuracy: acc });
            match &best {
                Some((b, _, _)) if acc <= *b => since_best += 1,
                _ => {
                    best = Some((acc, ranker.weights.clone(), epoch));
                    since_best = 0;
                }
            }
            if since_best >= cfg.patience.max(1) {
                break;
            }
        }
        let (_, weights, epoch) = best.expect("at least one epoch ran");
        ranker.weights = weights;
        ranker.best_epoch = epoch;
        Ok(ranker)
    }

    fn prepare(&self, examples: &[&PairExample]) -> Prepared {
        match self.weights {
            Weights::Linear { .. } => Prepared::Linear(examples.iter().map(|e| self.standardizer.diff(&e.a, &e.b)).collect()),
            Weights::Hidden { .. } => {
                Prepared::Hidden(examples.iter().map(|e| (self.standardizer.apply(&e.a), self.standardizer.apply(&e.b))).collect())
            }
        }
    }

    fn margins(&self, p: &Prepared) -> Vec<f64> {
        match (&self.weights, p) {
            (Weights::Linear { w }, Prepared::Linear(diffs)) => diffs.iter().map(|d| sparse_dot(w, d)).collect(),
            (Weights::Hidden { w1, b1, v, .. }, Prepared::Hidden(zs)) => {
                zs.iter().map(|(za, zb)| hidden_forward(w1, b1, v, za, zb).s).collect()
            }
            _ => unreachable!("prepared data matches the model kind"),
        }
    }

    /// One SGD step on example `i`; returns its hinge loss before the step.
    fn sgd_step(&mut self, p: &Prepared, i: usize, y: f64) -> f64 {
        let cfg = self.config;
        let lr = cfg.learning_rate;
        let loss = match (&mut self.weights, p) {
            (Weights::Linear { w }, Prepared::Linear(diffs)) => {
                let d = &diffs[i];
                let s = sparse_dot(w, d);
                let loss = (cfg.margin - y * s).max(0.0);
                if y * s < cfg.margin {
                    for &(j, x) in d {
                        w[j as usize] += lr * y * x;
                    }
                }
                loss
            }
            (Weights::Hidden { w1, b1, v, .. }, Prepared::Hidden(zs)) => {
                let (za, zb) = &zs[i];
                let pass = hidden_forward(w1, b1, v, za, zb);
                let loss = (cfg.margin - y * pass.s).max(0.0);
                if y * pass.s < cfg.margin {
                    hidden_update(&pass, w1, b1, v, za, zb, lr * y);
                }
                loss
            }
            _ => unreachable!("prepared data matches the model kind"),
        };
        self.weights.regularize(lr, cfg.l1, cfg.l2);
        loss
    }

    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    fn check_dim(&self, v: &FeatureVector) -> Result<(), RankerError> {
        if v.dim() != self.dim() {
            return Err(RankerError::Dimension { expected: self.dim(), actual: v.dim() });
        }
        Ok(())
    }

    /// Signed margin for "a beats b"; swapping the arguments negates it exactly.
    pub fn predict_pair(&self, a: &FeatureVector, b: &FeatureVector) -> Result<PairPrediction, RankerError> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let margin = match &self.weights {
            Weights::Linear { w } => sparse_dot(w, &self.standardizer.diff(a, b)),
            Weights::Hidden { w1, b1, v, .. } => {
                hidden_forward(w1, b1, v, &self.standardizer.apply(a), &self.standardizer.apply(b)).s
            }
        };
        Ok(PairPrediction { margin })
    }

    /// Per-item score; only defined for the linear model, whose pairwise
    /// margin is the difference of item scores.
    pub fn score(&self, x: &FeatureVector) -> Result<f64, RankerError> {
        self.check_dim(x)?;
        match &self.weights {
            Weights::Linear { w } => Ok(self.standardizer.apply(x).iter().zip(w).map(|(z, w)| z * w).sum()),
            Weights::Hidden { .. } => Err(RankerError::Unsupported("the hidden-layer model only scores pairs")),
        }
    }

    /// Weight mass `sum |w|` per index range, for the linear model.
    pub fn weight_mass(&self, range: std::ops::Range<usize>) -> Option<f64> {
        match &self.weights {
            Weights::Linear { w } => Some(w[range].iter().map(|x| x.abs()).sum()),
            Weights::Hidden { .. } => None,
        }
    }

    /// Regularized hinge objective over `batch` at flat parameters `params`.
    fn objective(&self, params: &[f64], mask: &[bool], batch: &[(Vec<f64>, Vec<f64>, Vec<(u32, f64)>, f64)]) -> f64 {
        let cfg = self.config;
        let mut total = 0.0;
        for (za, zb, diff, y) in batch {
            let s = self.flat_margin(params, za, zb, diff);
            total += (cfg.margin - y * s).max(0.0);
        }
        let reg: f64 = params
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(p, _)| cfg.l1 * p.abs() + cfg.l2 * p * p)
            .sum();
        total / batch.len() as f64 + reg
    }

    fn flat_margin(&self, params: &[f64], za: &[f64], zb: &[f64], diff: &[(u32, f64)]) -> f64 {
        match &self.weights {
            Weights::Linear { .. } => sparse_dot(params, diff),
            Weights::Hidden { units, .. } => {
                let (w1, rest) = params.split_at(units * 2 * za.len());
                let (b1, v) = rest.split_at(*units);
                hidden_forward(w1, b1, v, za, zb).s
            }
        }
    }

    fn analytic_grad(&self, params: &[f64], mask: &[bool], batch: &[(Vec<f64>, Vec<f64>, Vec<(u32, f64)>, f64)]) -> Vec<f64> {
        let cfg = self.config;
        let n = batch.len() as f64;
        let mut grad = vec![0.0; params.len()];
        for (za, zb, diff, y) in batch {
            let c = -y / n;
            match &self.weights {
                Weights::Linear { .. } => {
                    if y * sparse_dot(params, diff) < cfg.margin {
                        for &(j, x) in diff {
                            grad[j as usize] += c * x;
                        }
                    }
                }
                Weights::Hidden { units, .. } => {
                    let (w1, rest) = params.split_at(units * 2 * za.len());
                    let (b1, v) = rest.split_at(*units);
                    let pass = hidden_forward(w1, b1, v, za, zb);
                    if y * pass.s < cfg.margin {
                        hidden_grad_into(&pass, v, za, zb, c, &mut grad);
                    }
                }
            }
        }
        for ((g, p), &m) in grad.iter_mut().zip(params).zip(mask) {
            if m {
                *g += cfg.l1 * p.signum() + 2.0 * cfg.l2 * p;
            }
        }
        grad
    }

    /// Compares the analytic gradient of the regularized hinge objective on
    /// `examples` against central differences (step 1e-5) at the current
    /// weights, over up to `max_coordinates` seeded coordinates. Points within
    /// reach of a hinge or L1 kink are jittered and retried.
    pub fn hinge_gradient_check(&self, examples: &[PairExample], max_coordinates: usize, seed: u64) -> Result<GradCheck, RankerError> {
        const H: f64 = 1e-5;
        if examples.is_empty() {
            return Err(RankerError::EmptySplit { train: 0, validation: 0 });
        }
        let mut batch = Vec::with_capacity(examples.len());
        for e in examples {
            self.check_dim(&e.a)?;
            self.check_dim(&e.b)?;
            let (za, zb) = match self.weights {
                Weights::Linear { .. } => (Vec::new(), Vec::new()),
                Weights::Hidden { .. } => (self.standardizer.apply(&e.a), self.standardizer.apply(&e.b)),
            };
            batch.push((za, zb, self.standardizer.diff(&e.a, &e.b), e.y));
        }
        let (base, mask) = self.weights.flat();
        let mut rng = stream_rng(seed, streams::GRADCHECK, 0);
        let mut coords: Vec<usize> = (0..base.len()).collect();
        coords.shuffle(&mut rng);
        coords.truncate(max_coordinates.max(1));
        let jitter = Normal::new(0.0, 0.05).expect("valid normal");

        for attempt in 0..25 {
            let mut params = base.clone();
            if attempt > 0 {
                params.iter_mut().for_each(|p| *p += jitter.sample(&mut rng));
            }
            // input scale bounds how far a step of H can move a margin
            let reach = batch
                .iter()
                .map(|(za, zb, diff, _)| {
                    let m = za.iter().chain(zb).map(|x| x.abs()).fold(0.0, f64::max);
                    diff.iter().map(|e| e.1.abs()).fold(m, f64::max)
                })
                .fold(1.0, f64::max);
            let near_hinge = batch.iter().any(|(za, zb, diff, y)| {
                (self.config.margin - y * self.flat_margin(&params, za, zb, diff)).abs() < 100.0 * H * reach
            });
            let near_l1 = self.config.l1 > 0.0 && coords.iter().any(|&j| mask[j] && params[j].abs() < 10.0 * H);
            if near_hinge || near_l1 {
                continue;
            }
            let grad = self.analytic_grad(&params, &mask, &batch);
            let mut worst: f64 = 0.0;
            for &j in &coords {
                let orig = params[j];
                params[j] = orig + H;
                let up = self.objective(&params, &mask, &batch);
                params[j] = orig - H;
                let down = self.objective(&params, &mask, &batch);
                params[j] = orig;
                let numeric = (up - down) / (2.0 * H);
                let a = grad[j];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
            return Ok(GradCheck { max_relative_error: worst, coordinates: coords.len(), resamples: attempt });
        }
        Err(RankerError::KinkProximity)
    }
}

fn hidden_update(pass: &HiddenPass, w1: &mut [f64], b1: &mut [f64], v: &mut [f64], za: &[f64], zb: &[f64], c: f64) {
    let d = za.len();
    for u in 0..v.len() {
        let g1 = v[u] * (1.0 - pass.h1[u] * pass.h1[u]);
        let g2 = v[u] * (1.0 - pass.h2[u] * pass.h2[u]);
        let row = &mut w1[u * 2 * d..(u + 1) * 2 * d];
        let (left, right) = row.split_at_mut(d);
        for j in 0..d {
            left[j] += c * (g1 * za[j] - g2 * zb[j]);
            right[j] += c * (g1 * zb[j] - g2 * za[j]);
        }
        b1[u] += c * (g1 - g2);
        v[u] += c * (pass.h1[u] - pass.h2[u]);
    }
}

fn sparse_dot(w: &[f64], x: &[(u32, f64)]) -> f64 {
    x.iter().map(|&(j, v)| w[j as usize] * v).sum()
}

/// Accuracy where `margins[i]` predicts the sign of `y[i]`; exact ties earn
/// half credit.
pub fn accuracy_with_ties(margins: &[f64], y: &[f64]) -> f64 {
    if margins.is_empty() {
        return f64::NAN;
    }
    let credit: f64 = margins
        .iter()
        .zip(y)
        .map(|(&m, &y)| {
            if m == 0.0 {
                0.5
            } else if (m > 0.0) == (y > 0.0) {
                1.0
            } else {
                0.0
            }
        })
        .sum();
    credit / margins.len() as f64
}

/// A trained ranker together with the featurizer it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerModel {
    pub format_version: u32,
    pub featurizer: FittedFeaturizer,
    pub ranker: Ranker,
}

impl RankerModel {
    pub fn new(featurizer: FittedFeaturizer, ranker: Ranker) -> Self {
        Self { format_version: MODEL_FORMAT_VERSION, featurizer, ranker }
    }

    pub fn to_json(&self) -> Result<String, RankerError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, RankerError> {
        let probe: serde_json::Value = serde_json::from_str(text)?;
        let version = probe.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_FORMAT_VERSION {
            return Err(RankerError::Version(version));
        }
        let mut model: RankerModel = serde_json::from_value(probe)?;
        if let Some(v) = model.featurizer.vocabulary.as_mut() {
            v.reindex();
        }
        if model.featurizer.dim() != model.ranker.dim() {
            return Err(RankerError::Dimension { expected: model.featurizer.dim(), actual: model.ranker.dim() });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), RankerError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RankerError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
