use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::IngestError;

/// Author value used for removed accounts.
pub const DELETED_AUTHOR: &str = "[deleted]";

/// Default cap on the fraction of malformed lines before a file is rejected.
pub const DEFAULT_MAX_ERROR_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub id: String,
    pub author: String,
    #[serde(rename = "subreddit")]
    pub community: String,
    pub created_utc: i64,
    pub score: i64,
    pub title: String,
    #[serde(rename = "image", default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_key: Option<String>,
}

impl Submission {
    pub fn is_deleted_author(&self) -> bool {
        self.author == DELETED_AUTHOR
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub author: String,
    /// Submission id of the thread.
    pub link_id: String,
    /// Submission id for top-level comments, otherwise the parent comment id.
    pub parent_id: String,
    pub created_utc: i64,
    pub score: i64,
    pub body: String,
}

trait Record: DeserializeOwned {
    fn record_id(&self) -> &str;
    fn check(&self) -> Result<(), String>;
}

impl Record for Submission {
    fn record_id(&self) -> &str {
        &self.id
    }
    fn check(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.created_utc <= 0 {
            return Err(format!("created_utc {} is not positive", self.created_utc));
        }
        Ok(())
    }
}

impl Record for Comment {
    fn record_id(&self) -> &str {
        &self.id
    }
    fn check(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.created_utc <= 0 {
            return Err(format!("created_utc {} is not positive", self.created_utc));
        }
        Ok(())
    }
}

/// Parsed records plus the lines that were skipped, as `(line number, reason)`.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub skipped: Vec<(usize, String)>,
}

fn parse_lines<T: Record, R: BufRead>(reader: R, max_error_rate: f64) -> Result<Parsed<T>, IngestError> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = HashSet::new();
    let mut total = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| IngestError::Read { line: line_no, source })?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let rec: T = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                skipped.push((line_no, e.to_string()));
                continue;
            }
        };
        if let Err(reason) = rec.check() {
            skipped.push((line_no, reason));
            continue;
        }
        if !seen.insert(rec.record_id().to_owned()) {
            skipped.push((line_no, format!("duplicate id {}", rec.record_id())));
            continue;
        }
        records.push(rec);
    }
    if total > 0 {
        let rate = skipped.len() as f64 / total as f64;
        if rate > max_error_rate {
            let (first_line, first_reason) = skipped[0].clone();
            return Err(IngestError::TooManyMalformed {
                skipped: skipped.len(),
                total,
                rate: rate * 100.0,
                cap: max_error_rate * 100.0,
                first_line,
                first_reason,
            });
        }
    }
    for (line, reason) in &skipped {
        log::warn!("skipped line {line}: {reason}");
    }
    Ok(Parsed { records, skipped })
}

/// Parses one JSON submission record per line, in file order.
///
/// Blank lines are ignored. Malformed lines, invalid records and repeated ids
/// are skipped and counted; if their share of the non-blank lines exceeds
/// `max_error_rate` the whole stream is rejected.
pub fn parse_submissions<R: BufRead>(reader: R, max_error_rate: f64) -> Result<Parsed<Submission>, IngestError> {
    parse_lines(reader, max_error_rate)
}

pub fn parse_comments<R: BufRead>(reader: R, max_error_rate: f64) -> Result<Parsed<Comment>, IngestError> {
    parse_lines(reader, max_error_rate)
}

fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| IngestError::Io { path: path.to_owned(), source })
}

pub fn read_submissions_file(path: &Path, max_error_rate: f64) -> Result<Parsed<Submission>, IngestError> {
    parse_submissions(open(path)?, max_error_rate)
}

pub fn read_comments_file(path: &Path, max_error_rate: f64) -> Result<Parsed<Comment>, IngestError> {
    parse_comments(open(path)?, max_error_rate)
}

fn write_lines<T: Serialize, W: Write>(mut out: W, items: &[T]) -> Result<(), IngestError> {
    for item in items {
        let line = serde_json::to_string(item)?;
        writeln!(out, "{line}").map_err(IngestError::Write)?;
    }
    Ok(())
}

pub fn write_submissions<W: Write>(out: W, subs: &[Submission]) -> Result<(), IngestError> {
    write_lines(out, subs)
}

pub fn write_comments<W: Write>(out: W, comments: &[Comment]) -> Result<(), IngestError> {
    write_lines(out, comments)
}

/// Indices of comments whose thread is not among `subs`.
pub fn orphan_comments(comments: &[Comment], subs: &[Submission]) -> Vec<usize> {
    let known: HashSet<&str> = subs.iter().map(|s| s.id.as_str()).collect();
    comments
        .iter()
        .enumerate()
        .filter(|(_, c)| !known.contains(c.link_id.as_str()))
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn maps_fields() {
        let line = r#"{"id":"a1","author":"u1","subreddit":"aww","created_utc":100,"score":21,"title":"hi"}"#;
        let parsed = parse_submissions(line.as_bytes(), DEFAULT_MAX_ERROR_RATE).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let s = &parsed.records[0];
        assert_eq!(s.score, 21);
        assert_eq!(s.community, "aww");
        assert_eq!(s.image_ref, None);
        assert!(parsed.skipped.is_empty());
    }

    #[test]
    fn empty_stream() {
        let parsed = parse_submissions(&b""[..], DEFAULT_MAX_ERROR_RATE).unwrap();
        assert!(parsed.records.is_empty());
        assert!(parsed.skipped.is_empty());
    }

    #[test]
    fn truncated_line_skipped_under_cap() {
        let text = concat!(
            r#"{"id":"a","author":"u","subreddit":"c","created_utc":1,"score":1,"title":"x"}"#, "\n",
            r#"{"id":"b","author":"u","subreddit":"c","created_utc":2,"score":1,"title":"y"}"#, "\n",
            r#"{"id":"c","author":"u","subreddit":"c","created_utc":3,"sc"#, "\n",
            r#"{"id":"d","author":"u","subreddit":"c","created_utc":4,"score":1,"title":"z"}"#, "\n",
        );
        let parsed = parse_submissions(text.as_bytes(), 0.5).unwrap();
        assert_eq!(parsed.records.len(), 3);
        assert_eq!(parsed.skipped.len(), 1);
        assert_eq!(parsed.skipped[0].0, 3);

        let err = parse_submissions(text.as_bytes(), DEFAULT_MAX_ERROR_RATE).unwrap_err();
        assert!(matches!(err, IngestError::TooManyMalformed { skipped: 1, total: 4, .. }));
    }

    #[test]
    fn rejects_nonpositive_time_and_duplicates() {
        let text = concat!(
            r#"{"id":"a","author":"u","subreddit":"c","created_utc":0,"score":1,"title":"x"}"#, "\n",
            r#"{"id":"b","author":"u","subreddit":"c","created_utc":2,"score":1,"title":"y"}"#, "\n",
            r#"{"id":"b","author":"u","subreddit":"c","created_utc":3,"score":1,"title":"y"}"#, "\n",
        );
        let parsed = parse_submissions(text.as_bytes(), 1.0).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.skipped.len(), 2);
    }

    #[test]
    fn orphans_flagged() {
        let subs = vec![Submission {
            id: "s1".into(),
            author: "u".into(),
            community: "c".into(),
            created_utc: 5,
            score: 3,
            title: "t".into(),
            image_ref: None,
            link_key: None,
        }];
        let mk = |id: &str, link: &str| Comment {
            id: id.into(),
            author: "v".into(),
            link_id: link.into(),
            parent_id: link.into(),
            created_utc: 9,
            score: 1,
            body: "b".into(),
        };
        let comments = vec![mk("c1", "s1"), mk("c2", "zz")];
        assert_eq!(orphan_comments(&comments, &subs), vec![1]);
    }

    fn arb_submission() -> impl Strategy<Value = Submission> {
        (
            "[a-z0-9]{1,8}",
            "\\PC{0,12}",
            "[a-z]{1,6}",
            1i64..2_000_000_000,
            -50i64..100_000,
            "\\PC{0,40}",
            proptest::option::of("[a-z0-9/._]{1,20}"),
            proptest::option::of("[A-Za-z0-9]{1,10}"),
        )
            .prop_map(|(id, author, community, created_utc, score, title, image_ref, link_key)| Submission {
                id,
                author,
                community,
                created_utc,
                score,
                title,
                image_ref,
                link_key,
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(subs in proptest::collection::vec(arb_submission(), 0..20)) {
            let mut seen = HashSet::new();
            let subs: Vec<_> = subs.into_iter().filter(|s| seen.insert(s.id.clone())).collect();
            let mut buf = Vec::new();
            write_submissions(&mut buf, &subs).unwrap();
            let parsed = parse_submissions(&buf[..], 0.0).unwrap();
            prop_assert_eq!(parsed.records, subs);
        }
    }
}
