//! Rich-get-richer market generator with known latent quality.
//!
//! Submissions arrive by a diurnally modulated Poisson process. Each gets a
//! log-normal quality partly inherited from its author, a caption with
//! quality-dependent planted tokens, a procedurally drawn image whose share of
//! one palette color grows with quality, and a score built up over vote steps
//! with `P(up) = sigmoid(alpha log q + beta log(1 + score) + gamma d(t) + bias)`,
//! where `d` is the audience curve evaluated at the vote time.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Normal, Poisson, Zipf};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::features::ImageSource;
use crate::image_features::ColorPalette;
use crate::ingest::{write_comments, write_submissions, Comment, IngestError, NormalizedImage, Submission, DELETED_AUTHOR, IMAGE_SIDE};
use crate::pairing::{Label, RankedPair};
use crate::rng::{mix, stream_rng, streams};
use crate::time::calendar;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid market config: {0}")]
    Config(String),
    #[error("no ground truth for {0}")]
    UnknownId(String),
    #[error("{0} and {1} have identical quality")]
    Tie(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("image {0}: {1}")]
    Image(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarketConfig {
    pub seed: u64,
    pub community: String,
    pub n_submissions: usize,
    pub start_utc: i64,
    pub days: usize,
    /// Arrival intensity `1 + amplitude cos(2 pi (h - peak) / 24)`, times
    /// `weekend_rate` on Saturdays and Sundays.
    pub arrival_peak_hour: f64,
    pub arrival_amplitude: f64,
    pub weekend_rate: f64,
    pub quality_mu: f64,
    pub quality_sigma: f64,
    pub vote_steps: usize,
    /// Voters arriving per step, each upvoting with the logistic probability.
    pub voters_per_step: u64,
    pub vote_interval_secs: i64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub bias: f64,
    /// Audience curve `cos(2 pi (h - peak) / 24)`, plus `weekend_effect` on
    /// weekends and `yearly_trend` per year since the start.
    pub audience_peak_hour: f64,
    pub weekend_effect: f64,
    pub yearly_trend: f64,
    /// Probability that a voter who does not upvote downvotes; 0 disables.
    pub downvote_rate: f64,
    pub n_authors: usize,
    /// Zipf exponent of author activity.
    pub activity_skew: f64,
    /// Share of log-quality variance inherited from author skill.
    pub skill_share: f64,
    /// Correlation between author skill and log activity.
    pub skill_activity_corr: f64,
    pub deleted_author_rate: f64,
    pub comments_per_submission: f64,
    pub background_vocab: usize,
    pub background_tokens: usize,
    pub zipf_exponent: f64,
    pub golden_tokens: usize,
    /// Planted-token probability is `Phi(golden_strength * z_q)`; 0 disables.
    pub golden_strength: f64,
    /// Favored-color share is `0.1 + 0.6 Phi(palette_strength * z_q + palette_noise * e)`
    /// with standard normal `e`.
    pub palette_strength: f64,
    pub palette_noise: f64,
    pub images: bool,
    /// Fraction of the time span after which planted tokens switch vocabulary.
    pub drift_after: Option<f64>,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            community: "synth".into(),
            n_submissions: 5000,
            // Monday 2012-01-02 00:00 UTC
            start_utc: 1_325_462_400,
            days: 14,
            arrival_peak_hour: 14.0,
            arrival_amplitude: 0.6,
            weekend_rate: 1.0,
            quality_mu: 0.0,
            quality_sigma: 1.0,
            vote_steps: 150,
            voters_per_step: 20,
            vote_interval_secs: 60,
            alpha: 1.0,
            beta: 0.25,
            gamma: 0.5,
            bias: -8.0,
            audience_peak_hour: 9.0,
            weekend_effect: 0.0,
            yearly_trend: 0.0,
            downvote_rate: 0.0,
            n_authors: 400,
            activity_skew: 1.0,
            skill_share: 0.5,
            skill_activity_corr: 0.5,
            deleted_author_rate: 0.02,
            comments_per_submission: 2.0,
            background_vocab: 2000,
            background_tokens: 6,
            zipf_exponent: 1.1,
            golden_tokens: 20,
            golden_strength: 1.0,
            palette_strength: 1.0,
            palette_noise: 0.6,
            images: false,
            drift_after: None,
        }
    }
}

impl MarketConfig {
    /// Posting time drives votes; quality only varies scores within a time slot
    /// and nothing observable carries it.
    pub fn timing_dominant(seed: u64) -> Self {
        Self { seed, alpha: 0.7, gamma: 2.0, bias: -5.0, golden_strength: 0.0, palette_strength: 0.0, skill_share: 0.0, ..Self::default() }
    }

    /// Quality drives votes and is visible through planted tokens and colors.
    pub fn content_dominant(seed: u64) -> Self {
        Self { seed, alpha: 2.0, beta: 0.1, gamma: 0.0, bias: -5.0, skill_share: 0.0, ..Self::default() }
    }

    /// Quality comes mostly from author skill, and skill tracks activity.
    pub fn author_dominant(seed: u64) -> Self {
        Self {
            seed,
            alpha: 2.0,
            beta: 0.1,
            gamma: 0.0,
            bias: -5.0,
            skill_share: 0.8,
            skill_activity_corr: 0.5,
            golden_strength: 0.0,
            palette_strength: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_owned()));
        let weights = [self.alpha, self.beta, self.gamma, self.bias, self.weekend_effect, self.yearly_trend, self.golden_strength, self.palette_strength, self.palette_noise];
        if !weights.iter().all(|w| w.is_finite()) {
            return bad("weights must be finite");
        }
        if !(self.arrival_amplitude >= 0.0 && self.arrival_amplitude < 1.0 && self.weekend_rate > 0.0) {
            return bad("arrival rate must stay positive: amplitude in [0, 1), weekend_rate > 0");
        }
        if !(self.quality_sigma >= 0.0 && self.quality_mu.is_finite()) {
            return bad("quality_sigma must be non-negative");
        }
        if self.days == 0 || self.n_authors == 0 || self.background_vocab == 0 || self.vote_interval_secs < 0 {
            return bad("days, n_authors and background_vocab must be positive");
        }
        if !(0.0..=1.0).contains(&self.skill_share) || !(-1.0..=1.0).contains(&self.skill_activity_corr) {
            return bad("skill_share must lie in [0, 1] and skill_activity_corr in [-1, 1]");
        }
        if !(0.0..=1.0).contains(&self.downvote_rate) || !(0.0..=1.0).contains(&self.deleted_author_rate) {
            return bad("rates must lie in [0, 1]");
        }
        if !(self.comments_per_submission >= 0.0 && self.activity_skew >= 0.0 && self.zipf_exponent > 0.0) {
            return bad("comment rate, activity skew and zipf exponent must be non-negative");
        }
        if let Some(d) = self.drift_after {
            if !(0.0..=1.0).contains(&d) {
                return bad("drift_after must lie in [0, 1]");
            }
        }
        Ok(())
    }

    fn span_secs(&self) -> i64 {
        self.days as i64 * 86_400
    }

    fn arrival_rate(&self, t: i64) -> f64 {
        let (minute, hour, weekday, _) = calendar(t);
        let h = hour as f64 + minute as f64 / 60.0;
        let weekly = if weekday >= 5 { self.weekend_rate } else { 1.0 };
        (1.0 + self.arrival_amplitude * (2.0 * PI * (h - self.arrival_peak_hour) / 24.0).cos()) * weekly
    }

    /// Audience effect `d(t)` at a vote time.
    pub fn audience(&self, t: i64) -> f64 {
        let (minute, hour, weekday, year) = calendar(t);
        let h = hour as f64 + minute as f64 / 60.0;
        let start_year = calendar(self.start_utc).3;
        let weekend = if weekday >= 5 { self.weekend_effect } else { 0.0 };
        (2.0 * PI * (h - self.audience_peak_hour) / 24.0).cos() + weekend + self.yearly_trend * (year - start_year) as f64
    }
}

/// Latent facts about one generated submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemTruth {
    pub quality: f64,
    pub planted: Vec<String>,
    pub favored_fraction: f64,
    pub image_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub items: BTreeMap<String, ItemTruth>,
}

impl GroundTruth {
    pub fn quality(&self, id: &str) -> Result<f64, SynthError> {
        self.items.get(id).map(|t| t.quality).ok_or_else(|| SynthError::UnknownId(id.to_owned()))
    }

    /// `id<TAB>quality` lines.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (id, t) in &self.items {
            writeln!(out, "{id}\t{:?}", t.quality)?;
        }
        Ok(())
    }
}

/// Label of the higher-quality member.
pub fn label_oracle(truth: &GroundTruth, pair: &RankedPair) -> Result<Label, SynthError> {
    let qa = truth.quality(&pair.id_a)?;
    let qb = truth.quality(&pair.id_b)?;
    if qa > qb {
        Ok(Label::AWins)
    } else if qb > qa {
        Ok(Label::BWins)
    } else {
        Err(SynthError::Tie(pair.id_a.clone(), pair.id_b.clone()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub config: MarketConfig,
    pub submissions: Vec<Submission>,
    pub comments: Vec<Comment>,
    pub truth: GroundTruth,
}

pub const PATCHES: usize = 16;
const FAVORED_COLOR: usize = 0;
const OTHER_COLORS: [usize; 10] = [5, 9, 14, 19, 22, 27, 31, 36, 42, 48];

/// Image of `PATCHES x PATCHES` flat squares, each the favored palette color
/// with probability `favored_fraction`, otherwise one of a fixed set of others.
pub fn render_image(item: &ItemTruth) -> NormalizedImage {
    let palette = ColorPalette::default();
    let mut rng = ChaCha8Rng::seed_from_u64(item.image_seed);
    let patches: Vec<[u8; 3]> = (0..PATCHES * PATCHES)
        .map(|_| {
            let idx = if rng.random::<f64>() < item.favored_fraction {
                FAVORED_COLOR
            } else {
                *OTHER_COLORS.choose(&mut rng).expect("non-empty")
            };
            palette.colors()[idx]
        })
        .collect();
    let side = IMAGE_SIDE / PATCHES;
    NormalizedImage::from_fn(|x, y| patches[(y / side) * PATCHES + x / side])
}

/// Renders generated images on demand from the ground truth.
pub struct SynthImages {
    truth: GroundTruth,
}

impl SynthImages {
    pub fn new(truth: GroundTruth) -> Self {
        Self { truth }
    }
}

impl ImageSource for SynthImages {
    fn image(&self, sub: &Submission) -> Option<NormalizedImage> {
        self.truth.items.get(&sub.id).map(render_image)
    }
}

fn phi(x: f64) -> f64 {
    StdNormal::new(0.0, 1.0).expect("standard normal").cdf(x)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Author {
    name: String,
    skill: f64,
}

pub fn generate(cfg: &MarketConfig) -> Result<Market, SynthError> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, streams::MARKET, 0);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");

    // authors: activity ~ Zipf rank weight, skill correlated with log activity
    let weights: Vec<f64> = (0..cfg.n_authors).map(|a| (a as f64 + 1.0).powf(-cfg.activity_skew)).collect();
    let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let sd = (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
    let rho = cfg.skill_activity_corr;
    let authors: Vec<Author> = logs
        .iter()
        .enumerate()
        .map(|(a, l)| {
            let std_log = if sd > 0.0 { (l - mean) / sd } else { 0.0 };
            let skill = rho * std_log + (1.0 - rho * rho).sqrt() * normal.sample(&mut rng);
            let deleted = rng.random::<f64>() < cfg.deleted_author_rate;
            Author { name: if deleted { DELETED_AUTHOR.to_owned() } else { format!("u{a:04}") }, skill }
        })
        .collect();
    let pick_author = WeightedIndex::new(&weights).map_err(|e| SynthError::Config(e.to_string()))?;

    // arrivals: given the count, Poisson arrival times are iid from the
    // normalized intensity; drawn by rejection
    let max_rate = (1.0 + cfg.arrival_amplitude) * cfg.weekend_rate.max(1.0);
    let mut times: Vec<i64> = Vec::with_capacity(cfg.n_submissions);
    while times.len() < cfg.n_submissions {
        let t = cfg.start_utc + rng.random_range(0..cfg.span_secs());
        if rng.random::<f64>() * max_rate < cfg.arrival_rate(t) {
            times.push(t);
        }
    }
    times.sort_unstable();

    let zipf = Zipf::new(cfg.background_vocab as f64, cfg.zipf_exponent).map_err(|e| SynthError::Config(e.to_string()))?;
    let drift_time = cfg.drift_after.map(|f| cfg.start_utc + (f * cfg.span_secs() as f64) as i64);
    let reply_delay = Exp::new(1.0 / 900.0).expect("positive rate");
    let comment_delay = Exp::new(1.0 / 1800.0).expect("positive rate");
    let comment_count = (cfg.comments_per_submission > 0.0).then(|| Poisson::new(cfg.comments_per_submission).expect("positive mean"));

    let mut submissions = Vec::with_capacity(cfg.n_submissions);
    let mut truth = GroundTruth::default();
    let mut raw_comments: Vec<(i64, String, String, Option<usize>, i64, String)> = Vec::new();
    let mut thread_comment_ids: Vec<usize> = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let id = format!("s{i:06}");
        let author = &authors[pick_author.sample(&mut rng)];
        let z = cfg.skill_share.sqrt() * author.skill + (1.0 - cfg.skill_share).sqrt() * normal.sample(&mut rng);
        let log_q = cfg.quality_mu + cfg.quality_sigma * z;
        let quality = log_q.exp();

        let n_bg = rng.random_range(cfg.background_tokens.saturating_sub(2).max(1)..=cfg.background_tokens + 2);
        let mut tokens: Vec<String> = (0..n_bg).map(|_| format!("bg{}", zipf.sample(&mut rng) as u64)).collect();
        let mut planted = Vec::new();
        if cfg.golden_strength != 0.0 && cfg.golden_tokens > 0 {
            let p = phi(cfg.golden_strength * z);
            let k = Binomial::new(cfg.golden_tokens as u64, p).expect("valid binomial").sample(&mut rng) as usize;
            let stem = if drift_time.is_some_and(|d| t >= d) { "neo" } else { "gold" };
            let mut slots: Vec<usize> = (0..cfg.golden_tokens).collect();
            slots.shuffle(&mut rng);
            slots.truncate(k);
            slots.sort_unstable();
            planted = slots.iter().map(|s| format!("{stem}{s}")).collect();
        }
        tokens.extend(planted.iter().cloned());
        tokens.shuffle(&mut rng);
        let mut title = tokens.join(" ");
        if rng.random::<f64>() < 0.2 {
            title.push('!');
        }

        let favored_fraction = 0.1 + 0.6 * phi(cfg.palette_strength * z + cfg.palette_noise * normal.sample(&mut rng));

        // votes draw from their own stream so longer runs extend shorter ones
        let mut votes = stream_rng(cfg.seed, streams::MARKET, 1 + i as u64);
        let mut score: i64 = 0;
        for k in 0..cfg.vote_steps {
            let tv = t + k as i64 * cfg.vote_interval_secs;
            let logit = cfg.alpha * log_q + cfg.beta * (1.0 + score.max(0) as f64).ln() + cfg.gamma * cfg.audience(tv) + cfg.bias;
            let ups = Binomial::new(cfg.voters_per_step, sigmoid(logit)).expect("probability in [0, 1]").sample(&mut votes);
            score += ups as i64;
            if cfg.downvote_rate > 0.0 {
                let downs = Binomial::new(cfg.voters_per_step - ups, cfg.downvote_rate).expect("probability in [0, 1]").sample(&mut votes);
                score -= downs as i64;
            }
        }

        // comment thread: top-level or replies to earlier comments
        thread_comment_ids.clear();
        let n_comments = comment_count.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_comments {
            let commenter = &authors[pick_author.sample(&mut rng)];
            let parent = if !thread_comment_ids.is_empty() && rng.random::<f64>() < 0.4 {
                Some(*thread_comment_ids.choose(&mut rng).expect("non-empty"))
            } else {
                None
            };
            let created = match parent {
                Some(p) => raw_comments[p].0 + 1 + reply_delay.sample(&mut rng) as i64,
                None => t + 1 + comment_delay.sample(&mut rng) as i64,
            };
            let c_score = ((1.5 + 0.8 * commenter.skill + 0.5 * normal.sample(&mut rng)).exp().round() as i64 - 1).max(0);
            let n_words = rng.random_range(3..=15);
            let body: Vec<String> = (0..n_words).map(|_| format!("bg{}", zipf.sample(&mut rng) as u64)).collect();
            thread_comment_ids.push(raw_comments.len());
            raw_comments.push((created, commenter.name.clone(), id.clone(), parent, c_score, body.join(" ")));
        }

        let image_seed = mix(cfg.seed, streams::IMAGE, i as u64);
        truth.items.insert(id.clone(), ItemTruth { quality, planted, favored_fraction, image_seed });
        submissions.push(Submission {
            id: id.clone(),
            author: author.name.clone(),
            community: cfg.community.clone(),
            created_utc: t,
            score,
            title,
            image_ref: cfg.images.then(|| format!("images/{id}.png")),
            link_key: None,
        });
    }

    // comment ids follow creation order; parents always precede replies
    let mut order: Vec<usize> = (0..raw_comments.len()).collect();
    order.sort_by_key(|&k| (raw_comments[k].0, k));
    let mut new_id = vec![0usize; raw_comments.len()];
    for (rank, &k) in order.iter().enumerate() {
        new_id[k] = rank;
    }
    let comments = order
        .iter()
        .map(|&k| {
            let (created, author, link, parent, score, body) = &raw_comments[k];
            Comment {
                id: format!("c{:07}", new_id[k]),
                author: author.clone(),
                link_id: link.clone(),
                parent_id: match parent {
                    Some(p) => format!("c{:07}", new_id[*p]),
                    None => link.clone(),
                },
                created_utc: *created,
                score: *score,
                body: body.clone(),
            }
        })
        .collect();

    Ok(Market { config: cfg.clone(), submissions, comments, truth })
}

impl Market {
    /// Writes `submissions.jsonl`, `comments.jsonl`, `ground_truth.tsv`,
    /// `market.json` and, when the config asks for images, `images/*.png`.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        fs::create_dir_all(dir)?;
        write_submissions(BufWriter::new(File::create(dir.join("submissions.jsonl"))?), &self.submissions)?;
        write_comments(BufWriter::new(File::create(dir.join("comments.jsonl"))?), &self.comments)?;
        let mut gt = BufWriter::new(File::create(dir.join("ground_truth.tsv"))?);
        self.truth.write_tsv(&mut gt)?;
        gt.flush()?;
        let mut cfg_json = serde_json::to_string_pretty(&self.config).expect("config serializes");
        cfg_json.push('\n');
        fs::write(dir.join("market.json"), cfg_json)?;
        if self.config.images {
            let img_dir = dir.join("images");
            fs::create_dir_all(&img_dir)?;
            for s in &self.submissions {
                let rel = s.image_ref.as_ref().expect("images enabled");
                let img = render_image(&self.truth.items[&s.id]).to_rgb_image();
                img.save_with_format(dir.join(rel), image::ImageFormat::Png)
                    .map_err(|e| SynthError::Image(s.id.clone(), e.to_string()))?;
            }
        }
        Ok(())
    }
}
