//! Submission and comment ingestion, active-day filtering, image
//! normalization and duplicate removal.

mod active;
mod dedup;
mod image;
mod phash;
mod records;

pub use active::{filter_active_days, split_by_community, utc_day};
pub use dedup::{dedup, DedupOutcome};
pub use image::{load_image, ImageRejection, NormalizedImage, IMAGE_SIDE};
pub use phash::{hamming, phash64, PerceptualHash};
pub use records::{
    orphan_comments, parse_comments, parse_submissions, read_comments_file,
    read_submissions_file, write_comments, write_submissions, Comment, Parsed, Submission,
    DEFAULT_MAX_ERROR_RATE, DELETED_AUTHOR,
};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("read error at line {line}: {source}")]
    Read {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("write error: {0}")]
    Write(#[source] std::io::Error),
    #[error("{skipped} of {total} lines malformed ({rate:.2}% > cap {cap:.2}%); first bad line {first_line}: {first_reason}")]
    TooManyMalformed {
        skipped: usize,
        total: usize,
        rate: f64,
        cap: f64,
        first_line: usize,
        first_reason: String,
    },
    #[error("submission {0} has an image but no perceptual hash")]
    MissingHash(String),
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}
