//! Caption features: structural statistics and binary unigram indicators.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::vector::FeatureVector;

/// Lowercases, splits on whitespace and trims non-alphanumeric characters
/// from both ends of each piece. Empty pieces are dropped.
pub fn tokenize(title: &str) -> Vec<String> {
    title
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

pub const STRUCTURAL_DIM: usize = 4;

/// `[token count, char count, type/token ratio, punctuation proportion]`.
///
/// Punctuation counts characters that are neither alphanumeric nor
/// whitespace. Ratios with a zero denominator are 0.
pub fn structural_features(title: &str) -> [f64; STRUCTURAL_DIM] {
    let tokens = tokenize(title);
    let n_tokens = tokens.len();
    let n_types = tokens.iter().collect::<HashSet<_>>().len();
    let n_chars = title.chars().count();
    let n_punct = title.chars().filter(|c| !c.is_alphanumeric() && !c.is_whitespace()).count();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    [n_tokens as f64, n_chars as f64, ratio(n_types, n_tokens), ratio(n_punct, n_chars)]
}

/// Token to type ratio of a piece of text, `None` for empty text.
pub fn type_token_ratio(text: &str) -> Option<f64> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return None;
    }
    Some(tokens.iter().collect::<HashSet<_>>().len() as f64 / tokens.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    min_df: usize,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>, min_df: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self { tokens, min_df, index }
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }
}

/// Tokens appearing in at least `min_df` distinct titles, ordered by
/// descending document frequency, then lexicographically.
pub fn build_vocab<'a>(titles: impl IntoIterator<Item = &'a str>, min_df: usize) -> Vocabulary {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for title in titles {
        let distinct: HashSet<String> = tokenize(title).into_iter().collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = df.into_iter().filter(|(_, n)| *n >= min_df.max(1)).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t).collect(), min_df)
}

/// Binary presence indicators over the vocabulary.
pub fn unigram_features(title: &str, vocab: &Vocabulary) -> FeatureVector {
    let entries = tokenize(title).iter().filter_map(|t| vocab.index_of(t)).map(|i| (i, 1.0)).collect();
    FeatureVector::from_entries(vocab.len(), entries)
}
