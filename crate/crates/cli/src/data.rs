//! Loading and writing the on-disk formats shared by the subcommands.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;
use pairpop_core::features::{Dataset, DirImages};
use pairpop_core::image_features::{load_embeddings, EmbeddingTable};
use pairpop_core::ingest::{read_comments_file, read_submissions_file, Parsed, DEFAULT_MAX_ERROR_RATE};
use pairpop_core::pairing::{read_pairs, PairRecord};
use pairpop_core::{Comment, RankedPair, Submission};

pub const SUBMISSIONS: &str = "submissions.jsonl";
pub const COMMENTS: &str = "comments.jsonl";
pub const PAIRS: &str = "pairs.csv";

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Data directory holding submissions.jsonl and, optionally, comments.jsonl
    #[arg(long = "in", value_name = "DIR")]
    pub input: Option<PathBuf>,
    /// Directory image paths are relative to [default: the data directory]
    #[arg(long, value_name = "DIR")]
    pub images: Option<PathBuf>,
    /// Embedding table as NAME=PATH; repeatable
    #[arg(long = "embeddings", value_name = "NAME=PATH", value_parser = parse_embedding_arg)]
    pub embeddings: Vec<(String, PathBuf)>,
}

fn parse_embedding_arg(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_owned(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

impl DataArgs {
    /// The data directory, falling back to `default` (usually where the
    /// model or pairs file lives).
    pub fn dir(&self, default: Option<&Path>) -> Result<PathBuf> {
        match (&self.input, default) {
            (Some(d), _) => Ok(d.clone()),
            (None, Some(d)) => Ok(d.to_path_buf()),
            (None, None) => Err(crate::usage("--in DIR is required")),
        }
    }

    pub fn dataset(&self, dir: &Path) -> Result<Dataset> {
        let subs = read_submissions(&dir.join(SUBMISSIONS))?;
        let comments = read_comments_if_present(&dir.join(COMMENTS))?;
        let root = self.images.clone().unwrap_or_else(|| dir.to_path_buf());
        let mut tables: BTreeMap<String, EmbeddingTable> = BTreeMap::new();
        for (name, path) in &self.embeddings {
            if tables.contains_key(name) {
                bail!("embedding table {name} given twice");
            }
            let t = load_embeddings(name, path).with_context(|| format!("embeddings {}", path.display()))?;
            tables.insert(name.clone(), t);
        }
        Ok(Dataset::new(subs, &comments, Arc::new(DirImages { root }), tables)?)
    }
}

fn report_skipped<T>(path: &Path, parsed: &Parsed<T>) {
    for (line, reason) in parsed.skipped.iter().take(20) {
        log::warn!("{}:{line}: skipped: {reason}", path.display());
    }
    if parsed.skipped.len() > 20 {
        log::warn!("{}: {} more lines skipped", path.display(), parsed.skipped.len() - 20);
    }
}

pub fn read_submissions(path: &Path) -> Result<Vec<Submission>> {
    let parsed = read_submissions_file(path, DEFAULT_MAX_ERROR_RATE).with_context(|| format!("reading {}", path.display()))?;
    report_skipped(path, &parsed);
    Ok(parsed.records)
}

pub fn read_comments_if_present(path: &Path) -> Result<Vec<Comment>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let parsed = read_comments_file(path, DEFAULT_MAX_ERROR_RATE).with_context(|| format!("reading {}", path.display()))?;
    report_skipped(path, &parsed);
    Ok(parsed.records)
}

pub fn read_pair_records(path: &Path) -> Result<Vec<PairRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_pairs(BufReader::new(file)).with_context(|| format!("{}", path.display()))
}

pub fn read_pair_file(path: &Path) -> Result<Vec<RankedPair>> {
    Ok(read_pair_records(path)?.into_iter().map(|r| r.pair).collect())
}

pub fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Creates `path`'s parent directories and opens it for buffered writing.
pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

/// `path` with `suffix` appended to its file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
