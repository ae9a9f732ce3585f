//! Time-controlled pairwise popularity ranking.
//!
//! Posts made to the same community within a short window are paired, the
//! eventually more popular member becomes the label, and a pairwise hinge
//! ranker learns which content, author and timing signals predict the winner.
//!
//! Layout:
//!
//! * [`ingest`] parses submission/comment streams, filters active days,
//!   normalizes images and removes duplicates.
//! * [`pairing`] samples time-controlled ranked pairs.
//! * [`text`], [`image_features`], [`user`], [`time`] compute feature groups.
//! * [`features`] assembles groups into a fitted feature space.
//! * [`ranker`] trains and applies pairwise models.
//! * [`eval`] holds cross validation, held-out evaluation and the exploratory
//!   statistics.
//! * [`synth`] is a rich-get-richer market generator with known latent quality.

pub mod eval;
pub mod features;
pub mod image_features;
pub mod ingest;
pub mod pairing;
pub mod ranker;
pub mod rng;
pub mod synth;
pub mod text;
pub mod time;
pub mod user;
pub mod vector;

pub use ingest::{Comment, NormalizedImage, PerceptualHash, Submission};
pub use pairing::{Label, PairConfig, RankedPair};
pub use vector::FeatureVector;
