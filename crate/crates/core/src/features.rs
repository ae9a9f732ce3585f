//! Feature groups, the dataset context they are computed from, and the
//! per-split fitted featurizer.
//!
//! Split-independent per-item features (structural, color, HOG, embeddings,
//! raw user statistics) are extracted once into an [`ItemCache`]. Anything
//! learned from data (vocabulary, year range, imputation means) is fitted on
//! training items only by [`FittedFeaturizer::fit`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::image_features::{color_histogram, hog_features, ColorPalette, EmbeddingTable, SignProjection, HOG_DIM, PALETTE_SIZE};
use crate::ingest::{load_image, Comment, NormalizedImage, Submission};
use crate::text::{build_vocab, structural_features, unigram_features, Vocabulary, STRUCTURAL_DIM};
use crate::time::TimeEncoder;
use crate::user::{
    activity_features, build_history, impute, merge_events, quality_features, type_features, ImputationMeans,
    UserError, UserHistory, ACTIVITY_DIM, QUALITY_DIM, TYPE_DIM,
};
use crate::vector::FeatureVector;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum FeatureGroup {
    Structural,
    Unigram,
    Color,
    Hog,
    Activity,
    Type,
    Quality,
    Time,
    Embedding(String),
}

impl FeatureGroup {
    pub fn is_user(&self) -> bool {
        matches!(self, FeatureGroup::Activity | FeatureGroup::Type | FeatureGroup::Quality)
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureGroup::Structural => f.write_str("structural"),
            FeatureGroup::Unigram => f.write_str("unigram"),
            FeatureGroup::Color => f.write_str("color"),
            FeatureGroup::Hog => f.write_str("hog"),
            FeatureGroup::Activity => f.write_str("activity"),
            FeatureGroup::Type => f.write_str("type"),
            FeatureGroup::Quality => f.write_str("quality"),
            FeatureGroup::Time => f.write_str("time"),
            FeatureGroup::Embedding(name) => write!(f, "embedding:{name}"),
        }
    }
}

impl FromStr for FeatureGroup {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "structural" | "struct" => FeatureGroup::Structural,
            "unigram" => FeatureGroup::Unigram,
            "color" | "colorhist" => FeatureGroup::Color,
            "hog" => FeatureGroup::Hog,
            "activity" => FeatureGroup::Activity,
            "type" => FeatureGroup::Type,
            "quality" => FeatureGroup::Quality,
            "time" => FeatureGroup::Time,
            other => match other.strip_prefix("embedding:") {
                Some(name) if !name.is_empty() => FeatureGroup::Embedding(name.to_owned()),
                _ => return Err(FeatureError::UnknownGroup(other.to_owned())),
            },
        })
    }
}

impl From<FeatureGroup> for String {
    fn from(g: FeatureGroup) -> String {
        g.to_string()
    }
}

impl TryFrom<String> for FeatureGroup {
    type Error = FeatureError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Parses a comma-separated group list, rejecting repeats.
pub fn parse_groups(list: &str) -> Result<Vec<FeatureGroup>, FeatureError> {
    let mut out: Vec<FeatureGroup> = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let g: FeatureGroup = part.parse()?;
        if out.contains(&g) {
            return Err(FeatureError::DuplicateGroup(g.to_string()));
        }
        out.push(g);
    }
    if out.is_empty() {
        return Err(FeatureError::UnknownGroup(list.to_owned()));
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("unknown feature group {0:?}")]
    UnknownGroup(String),
    #[error("feature group {0} listed twice")]
    DuplicateGroup(String),
    #[error("no embedding table named {0}")]
    MissingEmbedding(String),
    #[error("unknown submission id {0}")]
    UnknownSubmission(String),
    #[error("no training items to fit on")]
    EmptyTraining,
    #[error("user features: {0}")]
    User(#[from] UserError),
    #[error("item {0} missing from the feature cache")]
    NotCached(String),
}

/// Contiguous index range of one group inside the full feature space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpan {
    pub name: String,
    pub offset: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct FeatureLayout {
    pub groups: Vec<GroupSpan>,
}

impl FeatureLayout {
    fn from_dims(dims: impl IntoIterator<Item = (String, usize)>) -> Self {
        let mut offset = 0;
        let groups = dims
            .into_iter()
            .map(|(name, dim)| {
                let span = GroupSpan { name, offset, dim };
                offset += dim;
                span
            })
            .collect();
        Self { groups }
    }

    pub fn dim(&self) -> usize {
        self.groups.last().map_or(0, |g| g.offset + g.dim)
    }

    pub fn group_of(&self, index: usize) -> Option<&GroupSpan> {
        self.groups.iter().find(|g| (g.offset..g.offset + g.dim).contains(&index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub min_df: usize,
    pub hog_dim: usize,
    pub projection_seed: u64,
    /// Keep raw k-indices next to k-rates in the Quality group.
    pub include_k_indices: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { min_df: 5, hog_dim: 2048, projection_seed: 0, include_k_indices: true }
    }
}

/// Source of normalized pixels for a submission.
pub trait ImageSource: Send + Sync {
    fn image(&self, sub: &Submission) -> Option<NormalizedImage>;
}

/// No images at all; image groups come out as zero vectors.
pub struct NoImages;

impl ImageSource for NoImages {
    fn image(&self, _: &Submission) -> Option<NormalizedImage> {
        None
    }
}

/// Images on disk, referenced relative to `root`.
pub struct DirImages {
    pub root: PathBuf,
}

impl ImageSource for DirImages {
    fn image(&self, sub: &Submission) -> Option<NormalizedImage> {
        let rel = sub.image_ref.as_ref()?;
        match load_image(&self.root.join(rel)) {
            Ok(img) => Some(img),
            Err(e) => {
                log::warn!("image for {}: {e}", sub.id);
                None
            }
        }
    }
}

/// Submissions, author histories, images and embeddings of one community.
pub struct Dataset {
    subs: Vec<Submission>,
    index: HashMap<String, usize>,
    history: UserHistory,
    images: Arc<dyn ImageSource>,
    embeddings: BTreeMap<String, EmbeddingTable>,
}

impl Dataset {
    pub fn new(
        subs: Vec<Submission>,
        comments: &[Comment],
        images: Arc<dyn ImageSource>,
        embeddings: BTreeMap<String, EmbeddingTable>,
    ) -> Result<Self, FeatureError> {
        let history = build_history(&merge_events(&subs, comments))?;
        let index = subs.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        Ok(Self { subs, index, history, images, embeddings })
    }

    pub fn submissions(&self) -> &[Submission] {
        &self.subs
    }

    pub fn get(&self, id: &str) -> Option<&Submission> {
        self.index.get(id).map(|&i| &self.subs[i])
    }

    pub fn require(&self, id: &str) -> Result<&Submission, FeatureError> {
        self.get(id).ok_or_else(|| FeatureError::UnknownSubmission(id.to_owned()))
    }

    pub fn history(&self) -> &UserHistory {
        &self.history
    }

    pub fn embedding(&self, name: &str) -> Option<&EmbeddingTable> {
        self.embeddings.get(name)
    }

    pub fn images(&self) -> &dyn ImageSource {
        self.images.as_ref()
    }
}

/// Split-independent features of one submission.
#[derive(Debug, Clone, Default)]
pub struct ItemFeatures {
    pub structural: Option<[f64; STRUCTURAL_DIM]>,
    pub color: Option<FeatureVector>,
    pub hog: Option<FeatureVector>,
    pub user: Vec<Option<f64>>,
    pub embeddings: BTreeMap<String, FeatureVector>,
}

/// Extracts split-independent features for the requested groups.
pub struct Extractor {
    groups: Vec<FeatureGroup>,
    options: FeatureOptions,
    palette: ColorPalette,
    projection: Option<Arc<SignProjection>>,
}

impl Extractor {
    pub fn new(groups: &[FeatureGroup], options: FeatureOptions) -> Self {
        let projection = groups
            .contains(&FeatureGroup::Hog)
            .then(|| Arc::new(SignProjection::new(HOG_DIM, options.hog_dim, options.projection_seed)));
        Self { groups: groups.to_vec(), options, palette: ColorPalette::default(), projection }
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    pub fn options(&self) -> &FeatureOptions {
        &self.options
    }

    fn user_width(&self) -> usize {
        self.groups
            .iter()
            .map(|g| match g {
                FeatureGroup::Activity => ACTIVITY_DIM,
                FeatureGroup::Type => TYPE_DIM,
                FeatureGroup::Quality if self.options.include_k_indices => QUALITY_DIM,
                FeatureGroup::Quality => QUALITY_DIM / 2,
                _ => 0,
            })
            .sum()
    }

    pub fn extract(&self, ds: &Dataset, sub: &Submission) -> Result<ItemFeatures, FeatureError> {
        let mut out = ItemFeatures::default();
        let needs_image = self.groups.iter().any(|g| matches!(g, FeatureGroup::Color | FeatureGroup::Hog));
        let image = if needs_image { ds.images().image(sub) } else { None };
        let snapshot = self.groups.iter().any(FeatureGroup::is_user).then(|| ds.history().snapshot(&sub.author, sub.created_utc));
        for g in &self.groups {
            match g {
                FeatureGroup::Structural => out.structural = Some(structural_features(&sub.title)),
                FeatureGroup::Color => {
                    out.color = Some(match &image {
                        Some(img) => color_histogram(img, &self.palette),
                        None => FeatureVector::zeros(PALETTE_SIZE),
                    })
                }
                FeatureGroup::Hog => {
                    let proj = self.projection.as_ref().expect("projection built for hog");
                    out.hog = Some(match &image {
                        Some(img) => proj.project(&hog_features(img)).expect("hog dimension is fixed"),
                        None => FeatureVector::zeros(proj.out_dim()),
                    })
                }
                FeatureGroup::Activity => out.user.extend(activity_features(snapshot.as_ref().unwrap())),
                FeatureGroup::Type => out.user.extend(type_features(snapshot.as_ref().unwrap())),
                FeatureGroup::Quality => {
                    let q = quality_features(snapshot.as_ref().unwrap());
                    if self.options.include_k_indices {
                        out.user.extend(q);
                    } else {
                        out.user.extend(&q[QUALITY_DIM / 2..]);
                    }
                }
                FeatureGroup::Embedding(name) => {
                    let table = ds.embedding(name).ok_or_else(|| FeatureError::MissingEmbedding(name.clone()))?;
                    let v = table.vector(&sub.id).unwrap_or_else(|| {
                        log::debug!("no {name} embedding for {}", sub.id);
                        FeatureVector::zeros(table.dim)
                    });
                    out.embeddings.insert(name.clone(), v);
                }
                FeatureGroup::Unigram | FeatureGroup::Time => {}
            }
        }
        debug_assert_eq!(out.user.len(), self.user_width());
        Ok(out)
    }

    /// Extracts every id in parallel; the result does not depend on thread count.
    pub fn extract_all<'a>(&self, ds: &Dataset, ids: impl IntoIterator<Item = &'a str>) -> Result<ItemCache, FeatureError> {
        let mut ids: Vec<&str> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        let items = ids
            .par_iter()
            .map(|id| {
                let sub = ds.require(id)?;
                Ok(((*id).to_owned(), self.extract(ds, sub)?))
            })
            .collect::<Result<HashMap<_, _>, FeatureError>>()?;
        Ok(ItemCache { items })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ItemCache {
    items: HashMap<String, ItemFeatures>,
}

impl ItemCache {
    pub fn get(&self, id: &str) -> Result<&ItemFeatures, FeatureError> {
        self.items.get(id).ok_or_else(|| FeatureError::NotCached(id.to_owned()))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Everything learned from training items that featurization needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedFeaturizer {
    pub groups: Vec<FeatureGroup>,
    pub options: FeatureOptions,
    pub layout: FeatureLayout,
    pub vocabulary: Option<Vocabulary>,
    pub time: Option<TimeEncoder>,
    pub user_means: Option<ImputationMeans>,
}

impl FittedFeaturizer {
    pub fn fit<'a>(
        extractor: &Extractor,
        ds: &Dataset,
        cache: &ItemCache,
        train_ids: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, FeatureError> {
        let mut ids: Vec<&str> = train_ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() {
            return Err(FeatureError::EmptyTraining);
        }
        let groups = extractor.groups().to_vec();
        let options = *extractor.options();
        let subs = ids.iter().map(|id| ds.require(id)).collect::<Result<Vec<_>, _>>()?;

        let vocabulary = groups
            .contains(&FeatureGroup::Unigram)
            .then(|| build_vocab(subs.iter().map(|s| s.title.as_str()), options.min_df));
        let time = if groups.contains(&FeatureGroup::Time) {
            TimeEncoder::fit(subs.iter().map(|s| s.created_utc))
        } else {
            None
        };
        let user_means = if groups.iter().any(FeatureGroup::is_user) {
            let rows = ids.iter().map(|id| cache.get(id).map(|f| f.user.as_slice())).collect::<Result<Vec<_>, _>>()?;
            let width = rows.first().map_or(0, |r| r.len());
            Some(ImputationMeans::fit(width, rows))
        } else {
            None
        };

        let dims = groups.iter().map(|g| {
            let dim = match g {
                FeatureGroup::Structural => STRUCTURAL_DIM,
                FeatureGroup::Unigram => vocabulary.as_ref().map_or(0, Vocabulary::len),
                FeatureGroup::Color => PALETTE_SIZE,
                FeatureGroup::Hog => options.hog_dim,
                FeatureGroup::Activity => ACTIVITY_DIM,
                FeatureGroup::Type => TYPE_DIM,
                FeatureGroup::Quality if options.include_k_indices => QUALITY_DIM,
                FeatureGroup::Quality => QUALITY_DIM / 2,
                FeatureGroup::Time => time.map_or(0, |t| t.dim()),
                FeatureGroup::Embedding(name) => ds.embedding(name).map_or(0, |t| t.dim),
            };
            (g.to_string(), dim)
        });
        let layout = FeatureLayout::from_dims(dims.collect::<Vec<_>>());
        Ok(Self { groups, options, layout, vocabulary, time, user_means })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Full feature vector of one item, in layout order.
    pub fn featurize(&self, sub: &Submission, item: &ItemFeatures) -> Result<FeatureVector, FeatureError> {
        let mut blocks: Vec<FeatureVector> = Vec::with_capacity(self.groups.len());
        let mut user_offset = 0usize;
        let imputed_user = match &self.user_means {
            Some(means) => impute(&item.user, means)?,
            None => Vec::new(),
        };
        for (g, span) in self.groups.iter().zip(&self.layout.groups) {
            let block = match g {
                FeatureGroup::Structural => FeatureVector::from_dense(&item.structural.expect("structural extracted")),
                FeatureGroup::Unigram => unigram_features(&sub.title, self.vocabulary.as_ref().expect("vocabulary fitted")),
                FeatureGroup::Color => item.color.clone().expect("color extracted"),
                FeatureGroup::Hog => item.hog.clone().expect("hog extracted"),
                FeatureGroup::Activity | FeatureGroup::Type | FeatureGroup::Quality => {
                    let v = FeatureVector::from_dense(&imputed_user[user_offset..user_offset + span.dim]);
                    user_offset += span.dim;
                    v
                }
                FeatureGroup::Time => match &self.time {
                    Some(enc) => enc.encode(sub.created_utc).0,
                    None => FeatureVector::zeros(0),
                },
                FeatureGroup::Embedding(name) => item.embeddings.get(name).cloned().ok_or_else(|| FeatureError::MissingEmbedding(name.clone()))?,
            };
            debug_assert_eq!(block.dim(), span.dim, "group {}", span.name);
            blocks.push(block);
        }
        Ok(FeatureVector::concat(&blocks))
    }

    /// Looks the item up in the dataset and cache, then featurizes it.
    pub fn featurize_id(&self, ds: &Dataset, cache: &ItemCache, id: &str) -> Result<FeatureVector, FeatureError> {
        self.featurize(ds.require(id)?, cache.get(id)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub(id: &str, author: &str, t: i64, title: &str) -> Submission {
        Submission {
            id: id.into(),
            author: author.into(),
            community: "c".into(),
            created_utc: t,
            score: 10,
            title: title.into(),
            image_ref: None,
            link_key: None,
        }
    }

    fn dataset() -> Dataset {
        let subs = vec![
            sub("a", "u1", 1_325_462_400, "cat cat dog"),
            sub("b", "u1", 1_325_462_500, "dog bird"),
            sub("c", "u2", 1_360_000_000, "cat fish"),
            sub("d", "u3", 1_360_000_100, "unseen words"),
        ];
        let mut table = EmbeddingTable::new("toy", 2);
        table.insert("a", vec![1.0, 2.0]);
        let embeddings = [("toy".to_string(), table)].into();
        Dataset::new(subs, &[], Arc::new(NoImages), embeddings).unwrap()
    }

    #[test]
    fn group_names_round_trip() {
        for name in ["structural", "unigram", "color", "hog", "activity", "type", "quality", "time", "embedding:resnet50"] {
            assert_eq!(name.parse::<FeatureGroup>().unwrap().to_string(), name);
        }
        assert!("bogus".parse::<FeatureGroup>().is_err());
        assert!(parse_groups("unigram,unigram").is_err());
        assert_eq!(parse_groups("unigram, color").unwrap().len(), 2);
    }

    #[test]
    fn layout_offsets_and_featurize() {
        let ds = dataset();
        let groups = parse_groups("structural,unigram,activity,time,embedding:toy").unwrap();
        let ex = Extractor::new(&groups, FeatureOptions { min_df: 2, ..Default::default() });
        let cache = ex.extract_all(&ds, ["a", "b", "c", "d"]).unwrap();
        let fit = FittedFeaturizer::fit(&ex, &ds, &cache, ["a", "b", "c"]).unwrap();
        let vocab = fit.vocabulary.as_ref().unwrap();
        assert_eq!(vocab.tokens(), &["cat".to_string(), "dog".to_string()]);
        let spans: Vec<(usize, usize)> = fit.layout.groups.iter().map(|g| (g.offset, g.dim)).collect();
        let time_dim = 60 + 24 + 7 + 2;
        assert_eq!(spans, vec![(0, 4), (4, 2), (6, 4), (10, time_dim), (10 + time_dim, 2)]);
        assert_eq!(fit.dim(), 12 + time_dim);

        let fa = fit.featurize_id(&ds, &cache, "a").unwrap();
        assert_eq!(fa.dim(), fit.dim());
        assert_eq!(fa.get(0), 3.0);
        assert_eq!(fa.get(4), 1.0);
        assert_eq!(fa.get(10 + time_dim), 1.0);
        assert_eq!(fa.get(11 + time_dim), 2.0);
        // "b" has one prior interaction by u1
        let fb = fit.featurize_id(&ds, &cache, "b").unwrap();
        assert_eq!(fb.get(6), 1.0);
        // "a" is u1's first post, so its activity count is the training mean of defined rows
        assert_eq!(fa.get(6), 1.0);
        // "d" has no embedding row and no vocabulary tokens
        let fd = fit.featurize_id(&ds, &cache, "d").unwrap();
        assert_eq!(fd.get(10 + time_dim), 0.0);
        assert_eq!(fd.get(4) + fd.get(5), 0.0);
    }

    #[test]
    fn user_features_without_any_training_history_fail() {
        let ds = dataset();
        let groups = parse_groups("activity").unwrap();
        let ex = Extractor::new(&groups, FeatureOptions::default());
        let cache = ex.extract_all(&ds, ["a", "c"]).unwrap();
        // neither a nor c has prior history: every activity mean is undefined
        let fit = FittedFeaturizer::fit(&ex, &ds, &cache, ["a", "c"]).unwrap();
        assert!(matches!(fit.featurize_id(&ds, &cache, "a"), Err(FeatureError::User(UserError::NoTrainingMean(0)))));
    }

    #[test]
    fn quality_without_indices_is_half_width() {
        let ds = dataset();
        let groups = parse_groups("quality").unwrap();
        let ex = Extractor::new(&groups, FeatureOptions { include_k_indices: false, ..Default::default() });
        let cache = ex.extract_all(&ds, ["a", "b"]).unwrap();
        let fit = FittedFeaturizer::fit(&ex, &ds, &cache, ["a", "b"]).unwrap();
        assert_eq!(fit.dim(), 8);
    }

    #[test]
    fn missing_embedding_table() {
        let ds = dataset();
        let ex = Extractor::new(&parse_groups("embedding:nope").unwrap(), FeatureOptions::default());
        assert!(matches!(ex.extract_all(&ds, ["a"]), Err(FeatureError::MissingEmbedding(_))));
    }
}
