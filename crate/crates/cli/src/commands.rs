use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use pairpop_core::eval::{
    cross_validate, diurnal_profile, feature_correlations, heldout_accuracy, heldout_digest, ledger_path_for,
    mean_normalize, percentile_buckets, score_moments, spearman, weekday_profile, write_profile, year_profile,
    CvConfig, Experiment, HeldoutLedger,
};
use pairpop_core::features::{parse_groups, Dataset, Extractor, FeatureGroup, FeatureOptions, FittedFeaturizer};
use pairpop_core::ingest::{
    dedup as dedup_submissions, filter_active_days, load_image, orphan_comments, phash64, split_by_community,
    write_comments, write_submissions, PerceptualHash,
};
use pairpop_core::pairing::{pair_stats, sample_day_pairs, sample_pairs, write_pairs};
use pairpop_core::ranker::{ModelKind, RankerModel, TrainConfig};
use pairpop_core::rng::{mix, streams};
use pairpop_core::synth::{generate, MarketConfig};
use pairpop_core::{PairConfig, RankedPair, Submission};
use pairpop_server::{router, serve, AppState, PairSet};
use rayon::prelude::*;

use crate::data::{
    create, parent_dir, read_comments_if_present, read_pair_file, read_submissions, with_suffix, write_text, DataArgs,
    COMMENTS, PAIRS, SUBMISSIONS,
};
use crate::usage;

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Raw submissions, one JSON record per line
    #[arg(long, value_name = "FILE")]
    submissions: PathBuf,
    /// Raw comments, one JSON record per line
    #[arg(long, value_name = "FILE")]
    comments: Option<PathBuf>,
    /// Output data directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Keep days with strictly more submissions than this, per community
    #[arg(long, default_value_t = 15)]
    active_threshold: usize,
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let subs = read_submissions(&a.submissions)?;
    let n_in = subs.len();
    let mut kept_ids: HashSet<String> = HashSet::new();
    for (community, group) in split_by_community(subs.clone()) {
        let kept = filter_active_days(&group, a.active_threshold);
        log::info!("{community}: {} of {} submissions on active days", kept.len(), group.len());
        kept_ids.extend(kept.into_iter().map(|s| s.id));
    }
    let kept: Vec<Submission> = subs.iter().filter(|s| kept_ids.contains(&s.id)).cloned().collect();
    let mut w = create(&a.out.join(SUBMISSIONS))?;
    write_submissions(&mut w, &kept)?;
    w.flush()?;
    if let Some(path) = &a.comments {
        // comments on filtered-out threads still count toward author histories
        if !path.exists() {
            bail!("{}: no such file", path.display());
        }
        let comments = read_comments_if_present(path)?;
        let orphans = orphan_comments(&comments, &subs).len();
        if orphans > 0 {
            log::info!("{orphans} comments belong to threads outside the submissions file");
        }
        let mut w = create(&a.out.join(COMMENTS))?;
        write_comments(&mut w, &comments)?;
        w.flush()?;
    }
    println!("kept {} of {n_in} submissions", kept.len());
    Ok(())
}

#[derive(Args, Debug)]
pub struct DedupArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output data directory (comments are copied alongside)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Maximum hamming distance between image hashes of duplicates
    #[arg(long, default_value_t = 5)]
    hamming: u32,
}

pub fn dedup(a: DedupArgs) -> Result<()> {
    let dir = a.data.dir(None)?;
    let subs = read_submissions(&dir.join(SUBMISSIONS))?;
    let root = a.data.images.clone().unwrap_or_else(|| dir.clone());
    let hashed: Vec<Option<Option<PerceptualHash>>> = subs
        .par_iter()
        .map(|s| match &s.image_ref {
            None => Some(None),
            Some(rel) => match load_image(&root.join(rel)) {
                Ok(img) => Some(Some(phash64(&img))),
                Err(e) => {
                    log::warn!("dropping {}: image {rel}: {e}", s.id);
                    None
                }
            },
        })
        .collect();
    let mut readable = Vec::with_capacity(subs.len());
    let mut hashes = HashMap::new();
    for (s, h) in subs.iter().zip(hashed) {
        if let Some(h) = h {
            if let Some(h) = h {
                hashes.insert(s.id.clone(), h);
            }
            readable.push(s.clone());
        }
    }
    let outcome = dedup_submissions(&readable, &hashes, a.hamming)?;
    let mut w = create(&a.out.join(SUBMISSIONS))?;
    write_submissions(&mut w, &outcome.kept)?;
    w.flush()?;
    let mut groups = create(&a.out.join("duplicates.tsv"))?;
    for g in &outcome.removed_groups {
        writeln!(groups, "{}", g.join("\t"))?;
    }
    groups.flush()?;
    let comments_src = dir.join(COMMENTS);
    if comments_src.exists() && a.out.join(COMMENTS) != comments_src {
        std::fs::copy(&comments_src, a.out.join(COMMENTS)).with_context(|| format!("copying {}", comments_src.display()))?;
    }
    println!(
        "kept {} of {} submissions ({} unreadable images, {} duplicate groups)",
        outcome.kept.len(),
        subs.len(),
        subs.len() - readable.len(),
        outcome.removed_groups.len()
    );
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct PairFlags {
    /// Largest posting-time gap within a pair
    #[arg(long, default_value_t = 30)]
    max_window_secs: i64,
    /// Smallest absolute score difference
    #[arg(long, default_value_t = 20)]
    min_diff: i64,
    /// Smallest ratio of the higher to the lower score
    #[arg(long, default_value_t = 2.0)]
    min_ratio: f64,
    /// Smallest score either member may have
    #[arg(long, default_value_t = 2)]
    min_score: i64,
}

impl PairFlags {
    fn config(&self) -> Result<PairConfig> {
        let cfg = PairConfig {
            max_window: self.max_window_secs,
            min_score_diff: self.min_diff,
            min_ratio: self.min_ratio,
            min_score: self.min_score,
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct PairsArgs {
    /// Data directory holding submissions.jsonl
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Pairs file to write [default: DIR/pairs.csv]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    flags: PairFlags,
    /// Pair random submissions of the same UTC day instead of close neighbors
    #[arg(long)]
    same_day: bool,
    /// Only this community
    #[arg(long)]
    community: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn pairs(a: PairsArgs) -> Result<()> {
    let cfg = a.flags.config()?;
    let subs = read_submissions(&a.input.join(SUBMISSIONS))?;
    let communities = split_by_community(subs);
    if let Some(c) = &a.community {
        if !communities.contains_key(c) {
            bail!("{}: no submissions from community {c}", a.input.join(SUBMISSIONS).display());
        }
    }
    let mut all: Vec<RankedPair> = Vec::new();
    for (i, (community, group)) in communities.into_iter().enumerate() {
        if a.community.as_ref().is_some_and(|c| *c != community) {
            continue;
        }
        let seed = mix(a.seed, streams::COMMUNITY, i as u64);
        let pairs = if a.same_day { sample_day_pairs(&group, &cfg, seed) } else { sample_pairs(&group, &cfg, seed) };
        match pair_stats(&pairs) {
            Ok(st) => println!(
                "{community}: {} pairs from {} submissions; gap mean {:.2} s median {:.1} s; score diff mean {:.1} median {:.1}",
                st.count,
                group.len(),
                st.mean_gap,
                st.median_gap,
                st.mean_score_diff,
                st.median_score_diff
            ),
            Err(_) => println!("{community}: no eligible pairs among {} submissions", group.len()),
        }
        all.extend(pairs);
    }
    let out = a.out.unwrap_or_else(|| a.input.join(PAIRS));
    let mut w = create(&out)?;
    write_pairs(&mut w, &all)?;
    w.flush()?;
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct FeatureFlags {
    /// Comma-separated groups: structural, unigram, color, hog, activity,
    /// type, quality, time, embedding:NAME
    #[arg(long, default_value = "unigram", value_parser = parse_feature_list)]
    features: FeatureList,
    /// Minimum document frequency of a vocabulary token
    #[arg(long, default_value_t = 5)]
    min_df: usize,
    /// Output width of the HOG random projection
    #[arg(long, default_value_t = 2048)]
    hog_dim: usize,
    /// Seed of the HOG random projection
    #[arg(long, default_value_t = 0)]
    projection_seed: u64,
    /// Quality group with k-rates only, without the raw k-indices
    #[arg(long)]
    no_k_indices: bool,
}

#[derive(Debug, Clone)]
struct FeatureList(Vec<FeatureGroup>);

fn parse_feature_list(s: &str) -> Result<FeatureList, String> {
    parse_groups(s).map(FeatureList).map_err(|e| e.to_string())
}

impl FeatureFlags {
    fn extractor(&self) -> Extractor {
        let options = FeatureOptions {
            min_df: self.min_df,
            hog_dim: self.hog_dim,
            projection_seed: self.projection_seed,
            include_k_indices: !self.no_k_indices,
        };
        Extractor::new(&self.features.0, options)
    }
}

fn check_embeddings(groups: &[FeatureGroup], ds: &Dataset) -> Result<()> {
    for g in groups {
        if let FeatureGroup::Embedding(name) = g {
            if ds.embedding(name).is_none() {
                return Err(usage(format!("feature group {g} needs --embeddings {name}=PATH")));
            }
        }
    }
    Ok(())
}

fn pair_ids(pairs: &[RankedPair]) -> impl Iterator<Item = &str> {
    pairs.iter().flat_map(|p| [p.id_a.as_str(), p.id_b.as_str()])
}

#[derive(Args, Debug)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Pairs whose members are featurized [default: DIR/pairs.csv]
    #[arg(long, value_name = "FILE")]
    pairs: Option<PathBuf>,
    #[command(flatten)]
    features: FeatureFlags,
    /// Sparse feature file to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

/// Writes `#layout` with `name:offset:dim` spans, then `id<TAB>index:value ...`
/// per paired submission, ids ascending.
pub fn featurize(a: FeaturizeArgs) -> Result<()> {
    let dir = a.data.dir(None)?;
    let pairs = read_pair_file(&a.pairs.unwrap_or_else(|| dir.join(PAIRS)))?;
    let ds = a.data.dataset(&dir)?;
    check_embeddings(&a.features.features.0, &ds)?;
    let extractor = a.features.extractor();
    let cache = extractor.extract_all(&ds, pair_ids(&pairs))?;
    let fz = FittedFeaturizer::fit(&extractor, &ds, &cache, pair_ids(&pairs))?;
    let mut ids: Vec<&str> = pair_ids(&pairs).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut w = create(&a.out)?;
    let spans: Vec<String> = fz.layout.groups.iter().map(|g| format!("{}:{}:{}", g.name, g.offset, g.dim)).collect();
    writeln!(w, "#layout\t{}\t{}", fz.dim(), spans.join("\t"))?;
    for id in &ids {
        let v = fz.featurize_id(&ds, &cache, id)?;
        let mut line = String::with_capacity(16 * v.nnz());
        for (i, (k, x)) in v.entries().iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{k}:{x:?}");
        }
        writeln!(w, "{id}\t{line}")?;
    }
    w.flush()?;
    println!("{} items, {} dimensions", ids.len(), fz.dim());
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct TrainFlags {
    #[arg(long, default_value = "linear", value_parser = parse_model_kind)]
    model: ModelKind,
    /// Width of the hidden layer
    #[arg(long, default_value_t = 100)]
    hidden_units: usize,
    /// Learning rate
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    l1: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    /// Hinge margin
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Epochs without validation improvement before stopping
    #[arg(long, default_value_t = 5)]
    patience: usize,
    /// Share of training pairs held out for early stopping
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
}

fn parse_model_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: pairpop_core::ranker::RankerError| e.to_string())
}

impl TrainFlags {
    fn config(&self, seed: u64) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            model: self.model,
            hidden_units: self.hidden_units,
            learning_rate: self.lr,
            l1: self.l1,
            l2: self.l2,
            margin: self.margin,
            epochs: self.epochs,
            patience: self.patience,
            validation_fraction: self.val_fraction,
            seed,
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Training pairs [default: DIR/pairs.csv]
    #[arg(long, value_name = "FILE")]
    pairs: Option<PathBuf>,
    #[command(flatten)]
    features: FeatureFlags,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write; its directory is the default data directory
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let cfg = a.train.config(a.seed)?;
    let dir = a.data.dir(Some(&parent_dir(&a.out)))?;
    let pairs = read_pair_file(&a.pairs.unwrap_or_else(|| dir.join(PAIRS)))?;
    if pairs.is_empty() {
        bail!("no training pairs");
    }
    let ds = a.data.dataset(&dir)?;
    check_embeddings(&a.features.features.0, &ds)?;
    let extractor = a.features.extractor();
    let cache = extractor.extract_all(&ds, pair_ids(&pairs))?;
    let exp = Experiment { dataset: &ds, extractor: &extractor, cache: &cache, train: cfg };
    let refs: Vec<&RankedPair> = pairs.iter().collect();
    let model = exp.fit(&refs, a.seed)?;
    model.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let fit = exp.accuracy(&model, &refs, a.seed)?;
    println!(
        "trained on {} pairs, {} dimensions, best epoch {}; training accuracy {:.4}",
        pairs.len(),
        model.featurizer.dim(),
        model.ranker.best_epoch,
        fit.accuracy
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<RankerModel> {
    RankerModel::load(path).with_context(|| format!("{}", path.display()))
}

/// Extractor matching what the model was trained with.
fn model_extractor(model: &RankerModel) -> Extractor {
    Extractor::new(&model.featurizer.groups, model.featurizer.options)
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Model whose features and training settings are cross-validated
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Pairs to split [default: DIR/pairs.csv]
    #[arg(long, value_name = "FILE")]
    pairs: Option<PathBuf>,
    /// Number of repeated random splits
    #[arg(long, default_value_t = 15)]
    folds: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record file to write [default: MODEL.cv.tsv]
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    if a.folds == 0 {
        return Err(usage("--folds must be at least 1"));
    }
    if !(a.test_fraction > 0.0 && a.test_fraction < 1.0) {
        return Err(usage("--test-fraction must lie in (0, 1)"));
    }
    let model = load_model(&a.model)?;
    let dir = a.data.dir(Some(&parent_dir(&a.model)))?;
    let pairs = read_pair_file(&a.pairs.unwrap_or_else(|| dir.join(PAIRS)))?;
    let ds = a.data.dataset(&dir)?;
    check_embeddings(&model.featurizer.groups, &ds)?;
    let extractor = model_extractor(&model);
    let cache = extractor.extract_all(&ds, pair_ids(&pairs))?;
    let exp = Experiment { dataset: &ds, extractor: &extractor, cache: &cache, train: model.ranker.config };
    let report = cross_validate(&exp, &pairs, &CvConfig { n_splits: a.folds, test_fraction: a.test_fraction, seed: a.seed })?;
    let out = a.report.unwrap_or_else(|| with_suffix(&a.model, ".cv.tsv"));
    write_text(&out, &report.to_records())?;
    print!("{}", report.to_table());
    Ok(())
}

#[derive(Args, Debug)]
pub struct HeldoutArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Held-out pairs, disjoint in time from the training pairs
    #[arg(long, value_name = "FILE")]
    pairs: PathBuf,
    /// Evaluate even if this model and pair file were evaluated before
    #[arg(long)]
    force: bool,
    /// Seed of the coin flips on exact ties
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn heldout(a: HeldoutArgs) -> Result<()> {
    let model_bytes = std::fs::read(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let pair_bytes = std::fs::read(&a.pairs).with_context(|| format!("reading {}", a.pairs.display()))?;
    let digest = heldout_digest(&model_bytes, &pair_bytes);
    let ledger = HeldoutLedger::new(ledger_path_for(&a.model));
    if ledger.contains(&digest)? && !a.force {
        bail!("{} was already evaluated on {} (digest {digest}); pass --force to repeat", a.model.display(), a.pairs.display());
    }
    let model = load_model(&a.model)?;
    let dir = a.data.dir(Some(&parent_dir(&a.model)))?;
    let pairs = read_pair_file(&a.pairs)?;
    let ds = a.data.dataset(&dir)?;
    check_embeddings(&model.featurizer.groups, &ds)?;
    let cache = model_extractor(&model).extract_all(&ds, pair_ids(&pairs))?;
    let acc = heldout_accuracy(&model, &ds, &cache, &pairs, a.seed)?;
    ledger.admit(&digest, a.force)?;
    println!("held-out accuracy {:.4} on {} pairs ({} ties)", acc.accuracy, acc.n, acc.ties);
    Ok(())
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Linear model
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Output `id<TAB>score` file [default: standard output]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn model_scores(model: &RankerModel, ds: &Dataset) -> Result<Vec<f64>> {
    let ids = ds.submissions().iter().map(|s| s.id.as_str());
    let cache = model_extractor(model).extract_all(ds, ids)?;
    ds.submissions()
        .iter()
        .map(|s| Ok(model.ranker.score(&model.featurizer.featurize_id(ds, &cache, &s.id)?)?))
        .collect()
}

pub fn score(a: ScoreArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    if model.ranker.config.model != ModelKind::Linear {
        bail!("{}: only linear models assign per-item scores", a.model.display());
    }
    let dir = a.data.dir(Some(&parent_dir(&a.model)))?;
    let ds = a.data.dataset(&dir)?;
    check_embeddings(&model.featurizer.groups, &ds)?;
    let scores = model_scores(&model, &ds)?;
    let mut text = String::new();
    for (s, x) in ds.submissions().iter().zip(&scores) {
        let _ = writeln!(text, "{}\t{x:?}", s.id);
    }
    match a.out {
        Some(path) => write_text(&path, &text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Directory for the profile, summary and correlation files
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Only this community
    #[arg(long)]
    community: Option<String>,
    /// Sliding window of the time-of-day profile
    #[arg(long, default_value_t = 30)]
    window_minutes: usize,
    /// Full width of the mean-normalization window
    #[arg(long, default_value_t = 3600)]
    mn_window_secs: i64,
    /// Linear model to correlate with scores and features
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Submissions listed around each model-score percentile
    #[arg(long, default_value_t = 5)]
    per_bucket: usize,
    /// Family-wise error rate of the feature correlations
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Skip feature groups wider than this in the correlation table
    #[arg(long, default_value_t = 4096)]
    max_group_dim: usize,
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let dir = a.data.dir(None)?;
    let mut subs = read_submissions(&dir.join(SUBMISSIONS))?;
    if let Some(c) = &a.community {
        subs.retain(|s| &s.community == c);
        if subs.is_empty() {
            bail!("no submissions from community {c}");
        }
    }
    if subs.is_empty() {
        bail!("{}: no submissions", dir.join(SUBMISSIONS).display());
    }
    let profiles = [
        ("diurnal.tsv", diurnal_profile(&subs, a.window_minutes)),
        ("weekday.tsv", weekday_profile(&subs)),
        ("year.tsv", year_profile(&subs)),
    ];
    for (name, points) in &profiles {
        let mut w = create(&a.out.join(name))?;
        write_profile(&mut w, points)?;
        w.flush()?;
    }

    let mut summary = String::from("statistic\tvalue\n");
    let _ = writeln!(summary, "submissions\t{}", subs.len());
    let raw: Vec<f64> = subs.iter().map(|s| s.score as f64).collect();
    match score_moments(&raw) {
        Ok(m) => {
            let _ = writeln!(summary, "skewness\t{:?}\nexcess_kurtosis\t{:?}", m.skewness, m.excess_kurtosis);
        }
        Err(e) => log::warn!("score moments: {e}"),
    }
    let mn = mean_normalize(&subs, a.mn_window_secs);
    let _ = writeln!(summary, "mn_coverage\t{:?}\nmn_mean_neighbors\t{:?}\nmn_undefined\t{}", mn.coverage, mn.mean_neighbors, mn.undefined);

    if let Some(path) = &a.model {
        let model = load_model(path)?;
        let mut ds_args = a.data.clone();
        ds_args.input = Some(dir.clone());
        let ds = ds_args.dataset(&dir)?;
        check_embeddings(&model.featurizer.groups, &ds)?;
        let keep: HashSet<&str> = subs.iter().map(|s| s.id.as_str()).collect();
        let all_scores = model_scores(&model, &ds)?;
        let (items, scores): (Vec<&Submission>, Vec<f64>) =
            ds.submissions().iter().zip(all_scores).filter(|(s, _)| keep.contains(s.id.as_str())).unzip();
        let popularity: Vec<f64> = items.iter().map(|s| s.score as f64).collect();
        match spearman(&scores, &popularity) {
            Ok(rho) => {
                let _ = writeln!(summary, "spearman_model_vs_score\t{rho:?}");
            }
            Err(e) => log::warn!("spearman: {e}"),
        }

        let percentiles = [1.0, 25.0, 50.0, 75.0, 99.0];
        let keyed: Vec<(&str, f64)> = items.iter().map(|s| s.id.as_str()).zip(scores.iter().copied()).collect();
        let by_id: HashMap<&str, (&Submission, f64)> = items.iter().map(|s| s.id.as_str()).zip(items.iter().copied().zip(scores.iter().copied())).collect();
        let mut w = create(&a.out.join("buckets.tsv"))?;
        writeln!(w, "percentile\tid\tmodel_score\tscore\ttitle")?;
        for (p, bucket) in percentiles.iter().zip(percentile_buckets(&keyed, &percentiles, a.per_bucket)) {
            for id in bucket {
                let (s, x) = by_id[id];
                writeln!(w, "{p}\t{id}\t{x:?}\t{}\t{}", s.score, s.title.replace(['\t', '\n'], " "))?;
            }
        }
        w.flush()?;

        let ids: Vec<&str> = items.iter().map(|s| s.id.as_str()).collect();
        let cache = model_extractor(&model).extract_all(&ds, ids.iter().copied())?;
        let vectors = ids.iter().map(|id| model.featurizer.featurize_id(&ds, &cache, id)).collect::<Result<Vec<_>, _>>()?;
        let mut w = create(&a.out.join("correlations.tsv"))?;
        writeln!(w, "group\tindex\tr\tci_low\tci_high\tsignificant")?;
        let spans: Vec<_> = model.featurizer.layout.groups.iter().filter(|g| g.dim <= a.max_group_dim).collect();
        let columns: Vec<Vec<f64>> = spans
            .iter()
            .flat_map(|g| (g.offset..g.offset + g.dim).map(|k| vectors.iter().map(|v| v.get(k)).collect()))
            .collect();
        let owners: Vec<(&str, usize)> = spans.iter().flat_map(|g| (0..g.dim).map(move |k| (g.name.as_str(), k))).collect();
        if !columns.is_empty() {
            let mut n_sig = 0;
            for (c, (group, k)) in feature_correlations(&scores, &columns, a.alpha)?.iter().zip(owners) {
                n_sig += c.significant as usize;
                match c.r {
                    Some(r) => writeln!(w, "{group}\t{k}\t{r:?}\t{:?}\t{:?}\t{}", c.ci_low, c.ci_high, c.significant)?,
                    None => writeln!(w, "{group}\t{k}\t\t\t\tconstant")?,
                }
            }
            let _ = writeln!(summary, "significant_features\t{n_sig}\nfeatures_tested\t{}", columns.len());
        }
        w.flush()?;
    }
    write_text(&a.out.join("summary.tsv"), &summary)?;
    print!("{summary}");
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Default,
    Timing,
    Content,
    Author,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Output data directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    preset: Preset,
    /// Market settings as JSON, overriding the preset entirely
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    market: Option<PathBuf>,
    #[arg(long)]
    submissions: Option<usize>,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    authors: Option<usize>,
    #[arg(long)]
    community: Option<String>,
    /// Also render an image per submission
    #[arg(long)]
    images: bool,
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = match &a.market {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<MarketConfig>(&text).with_context(|| format!("{}", path.display()))?
        }
        None => match a.preset {
            Preset::Default => MarketConfig { seed: a.seed, ..MarketConfig::default() },
            Preset::Timing => MarketConfig::timing_dominant(a.seed),
            Preset::Content => MarketConfig::content_dominant(a.seed),
            Preset::Author => MarketConfig::author_dominant(a.seed),
        },
    };
    if a.market.is_none() {
        cfg.seed = a.seed;
    }
    if let Some(n) = a.submissions {
        cfg.n_submissions = n;
    }
    if let Some(d) = a.days {
        cfg.days = d;
    }
    if let Some(n) = a.authors {
        cfg.n_authors = n;
    }
    if let Some(c) = &a.community {
        cfg.community = c.clone();
    }
    cfg.images |= a.images;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let market = generate(&cfg)?;
    market.write(&a.out)?;
    println!("{} submissions and {} comments in {}", market.submissions.len(), market.comments.len(), a.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Pairs shown to annotators
    #[arg(long, value_name = "FILE")]
    pairs: PathBuf,
    /// Data directory holding submissions.jsonl [default: the pairs file's directory]
    #[arg(long = "in", value_name = "DIR")]
    input: Option<PathBuf>,
    /// Directory image paths are relative to [default: the data directory]
    #[arg(long, value_name = "DIR")]
    images: Option<PathBuf>,
    /// Built UI assets served at /
    #[arg(long, value_name = "DIR")]
    assets: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Append-only judgment log [default: PAIRS.judgments.jsonl]
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
    /// Seed of the per-session pair orders
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn serve_annotate(a: ServeArgs) -> Result<()> {
    let dir = a.input.clone().unwrap_or_else(|| parent_dir(&a.pairs));
    let root = a.images.clone().unwrap_or_else(|| dir.clone());
    let set = PairSet::load(&a.pairs, &dir.join(SUBMISSIONS), Some(&root))?;
    let log_path = a.log.clone().unwrap_or_else(|| with_suffix(&a.pairs, ".judgments.jsonl"));
    let state = AppState::open(set, &log_path, a.seed).with_context(|| format!("{}", log_path.display()))?;
    if let Some(assets) = &a.assets {
        if !assets.is_dir() {
            bail!("{}: not a directory", assets.display());
        }
    }
    let app = router(state, a.assets.clone());
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.bind).await.with_context(|| format!("binding {}", a.bind))?;
        let addr = listener.local_addr()?;
        println!("serving {} on http://{addr}", a.pairs.display());
        log::info!("judgments are appended to {}", log_path.display());
        serve(listener, app).await?;
        Ok(())
    })
}
