//! Author history reconstruction and the Activity / Type / Quality feature
//! sets.
//!
//! Every statistic for a submission is computed from events strictly before
//! its creation time. Undefined statistics are `None` and are later replaced
//! by training-split means.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::ingest::{Comment, Submission, DELETED_AUTHOR};
use crate::text::{tokenize, type_token_ratio};

/// Thresholds of the k-index / k-rate statistics.
pub const K_THRESHOLDS: [i64; 4] = [5, 10, 50, 100];

pub const ACTIVITY_DIM: usize = 4;
pub const TYPE_DIM: usize = 6;
pub const QUALITY_DIM: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum UserError {
    #[error("events not sorted by time at position {0}")]
    Unsorted(usize),
    #[error("feature {0} needs imputation but has no training mean")]
    NoTrainingMean(usize),
    #[error("imputation width mismatch: vector {vector}, means {means}")]
    Width { vector: usize, means: usize },
}

#[derive(Debug, Clone, Copy)]
pub enum Event<'a> {
    Post(&'a Submission),
    Comment(&'a Comment),
}

impl Event<'_> {
    pub fn time(&self) -> i64 {
        match self {
            Event::Post(s) => s.created_utc,
            Event::Comment(c) => c.created_utc,
        }
    }
}

/// Merges posts and comments into one stream sorted by time (posts before
/// comments at equal times, then by id).
pub fn merge_events<'a>(subs: &'a [Submission], comments: &'a [Comment]) -> Vec<Event<'a>> {
    let mut events: Vec<Event<'a>> = subs.iter().map(Event::Post).chain(comments.iter().map(Event::Comment)).collect();
    fn key<'e>(e: &Event<'e>) -> (i64, u8, &'e str) {
        match *e {
            Event::Post(s) => (s.created_utc, 0u8, s.id.as_str()),
            Event::Comment(c) => (c.created_utc, 1u8, c.id.as_str()),
        }
    }
    events.sort_by(|a, b| key(a).cmp(&key(b)));
    events
}

#[derive(Debug, Clone)]
struct PostItem {
    t: i64,
    id: String,
    score: i64,
}

#[derive(Debug, Clone)]
struct CommentItem {
    t: i64,
    score: i64,
    n_tokens: usize,
    ttr: Option<f64>,
    depth: Option<u32>,
    latency: Option<i64>,
    thread: String,
    first_reply: Option<i64>,
}

#[derive(Debug, Clone)]
enum Item {
    Post(PostItem),
    Comment(CommentItem),
}

impl Item {
    fn t(&self) -> i64 {
        match self {
            Item::Post(p) => p.t,
            Item::Comment(c) => c.t,
        }
    }
}

/// Per-author, time-ordered interaction log. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct UserHistory {
    by_author: HashMap<String, Vec<Item>>,
    dangling_parents: usize,
}

/// Everything known about an author strictly before `as_of`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserHistorySnapshot {
    pub author: String,
    pub as_of: i64,
    pub deleted: bool,
    pub n_prev_posts: usize,
    pub n_prev_comments: usize,
    pub first_seen: Option<i64>,
    pub last_interaction: Option<i64>,
    pub comment_length_sum: f64,
    pub comment_ttr_sum: f64,
    pub n_comments_with_ttr: usize,
    pub comment_depth_sum: f64,
    pub n_comments_with_depth: usize,
    pub n_comments_with_replies: usize,
    pub n_prev_submissions_with_multi_comment: usize,
    pub response_latencies: Vec<i64>,
    /// Prior posts / comments with score strictly above each of [`K_THRESHOLDS`].
    pub k_counts_posts: [usize; 4],
    pub k_counts_comments: [usize; 4],
}

/// Builds the queryable history from an event stream sorted by time.
pub fn build_history(events: &[Event<'_>]) -> Result<UserHistory, UserError> {
    if let Some(pos) = events.windows(2).position(|w| w[1].time() < w[0].time()) {
        return Err(UserError::Unsorted(pos + 1));
    }

    let mut sub_time: HashMap<&str, i64> = HashMap::new();
    let mut parent_of: HashMap<&str, (&str, &str)> = HashMap::new();
    let mut first_reply: HashMap<&str, i64> = HashMap::new();
    for e in events {
        match e {
            Event::Post(s) => {
                sub_time.insert(&s.id, s.created_utc);
            }
            Event::Comment(c) => {
                parent_of.insert(&c.id, (&c.parent_id, &c.link_id));
            }
        }
    }
    for e in events {
        if let Event::Comment(c) = e {
            if parent_of.contains_key(c.parent_id.as_str()) {
                first_reply.entry(&c.parent_id).or_insert(c.created_utc);
            }
        }
    }

    let mut depth_memo: HashMap<&str, Option<u32>> = HashMap::new();
    let mut dangling = 0usize;
    let mut depth_of = |id: &str| -> Option<u32> {
        // walk up to the root, then fill the memo on the way back
        let mut chain: Vec<&str> = Vec::new();
        let mut cur: &str = parent_of.get_key_value(id).map(|(k, _)| *k)?;
        let base: Option<u32> = loop {
            if let Some(&d) = depth_memo.get(cur) {
                break d;
            }
            chain.push(cur);
            let (parent, link) = parent_of[cur];
            if parent == link || sub_time.contains_key(parent) {
                break Some(0);
            }
            match parent_of.get_key_value(parent) {
                Some((k, _)) if chain.len() <= parent_of.len() => cur = k,
                _ => break None,
            }
        };
        let mut d = base;
        for c in chain.iter().rev() {
            d = d.map(|x| x + 1);
            depth_memo.insert(c, d);
        }
        depth_memo[id]
    };

    let mut by_author: HashMap<String, Vec<Item>> = HashMap::new();
    for e in events {
        let item = match e {
            Event::Post(s) => Item::Post(PostItem { t: s.created_utc, id: s.id.clone(), score: s.score }),
            Event::Comment(c) => {
                let depth = depth_of(&c.id);
                if depth.is_none() {
                    dangling += 1;
                    log::debug!("comment {} has a dangling parent chain", c.id);
                }
                Item::Comment(CommentItem {
                    t: c.created_utc,
                    score: c.score,
                    n_tokens: tokenize(&c.body).len(),
                    ttr: type_token_ratio(&c.body),
                    depth,
                    latency: sub_time.get(c.link_id.as_str()).map(|t0| c.created_utc - t0),
                    thread: c.link_id.clone(),
                    first_reply: first_reply.get(c.id.as_str()).copied(),
                })
            }
        };
        let author = match e {
            Event::Post(s) => &s.author,
            Event::Comment(c) => &c.author,
        };
        by_author.entry(author.clone()).or_default().push(item);
    }
    Ok(UserHistory { by_author, dangling_parents: dangling })
}

impl UserHistory {
    pub fn dangling_parents(&self) -> usize {
        self.dangling_parents
    }

    pub fn snapshot(&self, author: &str, as_of: i64) -> UserHistorySnapshot {
        let mut snap = UserHistorySnapshot {
            author: author.to_owned(),
            as_of,
            deleted: author == DELETED_AUTHOR,
            n_prev_posts: 0,
            n_prev_comments: 0,
            first_seen: None,
            last_interaction: None,
            comment_length_sum: 0.0,
            comment_ttr_sum: 0.0,
            n_comments_with_ttr: 0,
            comment_depth_sum: 0.0,
            n_comments_with_depth: 0,
            n_comments_with_replies: 0,
            n_prev_submissions_with_multi_comment: 0,
            response_latencies: Vec::new(),
            k_counts_posts: [0; 4],
            k_counts_comments: [0; 4],
        };
        if snap.deleted {
            return snap;
        }
        let Some(items) = self.by_author.get(author) else {
            return snap;
        };
        let prior = &items[..items.partition_point(|it| it.t() < as_of)];
        snap.first_seen = prior.first().map(Item::t);
        snap.last_interaction = prior.last().map(Item::t);
        let mut comments_per_thread: HashMap<&str, usize> = HashMap::new();
        let mut posts: Vec<&str> = Vec::new();
        for it in prior {
            match it {
                Item::Post(p) => {
                    snap.n_prev_posts += 1;
                    posts.push(&p.id);
                    for (k, &thr) in K_THRESHOLDS.iter().enumerate() {
                        if p.score > thr {
                            snap.k_counts_posts[k] += 1;
                        }
                    }
                }
                Item::Comment(c) => {
                    snap.n_prev_comments += 1;
                    snap.comment_length_sum += c.n_tokens as f64;
                    if let Some(ttr) = c.ttr {
                        snap.comment_ttr_sum += ttr;
                        snap.n_comments_with_ttr += 1;
                    }
                    if let Some(d) = c.depth {
                        snap.comment_depth_sum += d as f64;
                        snap.n_comments_with_depth += 1;
                    }
                    if c.first_reply.is_some_and(|t| t < as_of) {
                        snap.n_comments_with_replies += 1;
                    }
                    if let Some(l) = c.latency {
                        snap.response_latencies.push(l);
                    }
                    *comments_per_thread.entry(&c.thread).or_default() += 1;
                    for (k, &thr) in K_THRESHOLDS.iter().enumerate() {
                        if c.score > thr {
                            snap.k_counts_comments[k] += 1;
                        }
                    }
                }
            }
        }
        let distinct_posts: HashSet<&str> = posts.into_iter().collect();
        snap.n_prev_submissions_with_multi_comment = distinct_posts
            .iter()
            .filter(|p| comments_per_thread.get(*p).is_some_and(|&n| n >= 2))
            .count();
        snap
    }
}

fn ratio(num: f64, den: usize) -> Option<f64> {
    (den > 0).then(|| num / den as f64)
}

fn median_i64(values: &[i64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] as f64 } else { (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0 })
}

/// `[interactions, seconds since first seen, seconds since last interaction,
/// posts / (posts + comments)]`; all undefined for authors with no history.
pub fn activity_features(snap: &UserHistorySnapshot) -> [Option<f64>; ACTIVITY_DIM] {
    let total = snap.n_prev_posts + snap.n_prev_comments;
    if snap.deleted || total == 0 {
        return [None; ACTIVITY_DIM];
    }
    [
        Some(total as f64),
        snap.first_seen.map(|t| (snap.as_of - t) as f64),
        snap.last_interaction.map(|t| (snap.as_of - t) as f64),
        ratio(snap.n_prev_posts as f64, total),
    ]
}

/// `[avg comment length, avg comment type/token ratio, avg comment depth,
/// share of comments with replies, share of own prior submissions with
/// multiple own comments, median seconds from thread start to comment]`.
pub fn type_features(snap: &UserHistorySnapshot) -> [Option<f64>; TYPE_DIM] {
    if snap.deleted {
        return [None; TYPE_DIM];
    }
    [
        ratio(snap.comment_length_sum, snap.n_prev_comments),
        ratio(snap.comment_ttr_sum, snap.n_comments_with_ttr),
        ratio(snap.comment_depth_sum, snap.n_comments_with_depth),
        ratio(snap.n_comments_with_replies as f64, snap.n_prev_comments),
        ratio(snap.n_prev_submissions_with_multi_comment as f64, snap.n_prev_posts),
        median_i64(&snap.response_latencies),
    ]
}

/// Post k-indices, comment k-indices, post k-rates, comment k-rates, each
/// over `k` in [`K_THRESHOLDS`].
pub fn quality_features(snap: &UserHistorySnapshot) -> [Option<f64>; QUALITY_DIM] {
    let mut out = [None; QUALITY_DIM];
    if snap.deleted {
        return out;
    }
    for k in 0..4 {
        out[k] = Some(snap.k_counts_posts[k] as f64);
        out[4 + k] = Some(snap.k_counts_comments[k] as f64);
        out[8 + k] = ratio(snap.k_counts_posts[k] as f64, snap.n_prev_posts);
        out[12 + k] = ratio(snap.k_counts_comments[k] as f64, snap.n_prev_comments);
    }
    out
}

/// Per-feature means over training rows, ignoring undefined entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationMeans {
    pub means: Vec<Option<f64>>,
}

impl ImputationMeans {
    pub fn fit<'a>(width: usize, rows: impl IntoIterator<Item = &'a [Option<f64>]>) -> Self {
        let mut sums = vec![0.0; width];
        let mut counts = vec![0usize; width];
        for row in rows {
            for (j, v) in row.iter().enumerate() {
                if let Some(x) = v {
                    sums[j] += x;
                    counts[j] += 1;
                }
            }
        }
        let means = sums.iter().zip(&counts).map(|(s, &c)| (c > 0).then(|| s / c as f64)).collect();
        Self { means }
    }

    pub fn width(&self) -> usize {
        self.means.len()
    }
}

/// Replaces every undefined entry by its training mean.
pub fn impute(vec: &[Option<f64>], means: &ImputationMeans) -> Result<Vec<f64>, UserError> {
    if vec.len() != means.width() {
        return Err(UserError::Width { vector: vec.len(), means: means.width() });
    }
    vec.iter()
        .enumerate()
        .map(|(j, v)| match v {
            Some(x) => Ok(*x),
            None => means.means[j].ok_or(UserError::NoTrainingMean(j)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(id: &str, author: &str, t: i64, score: i64) -> Submission {
        Submission {
            id: id.into(),
            author: author.into(),
            community: "c".into(),
            created_utc: t,
            score,
            title: String::new(),
            image_ref: None,
            link_key: None,
        }
    }

    fn comment(id: &str, author: &str, link: &str, parent: &str, t: i64, score: i64, body: &str) -> Comment {
        Comment {
            id: id.into(),
            author: author.into(),
            link_id: link.into(),
            parent_id: parent.into(),
            created_utc: t,
            score,
            body: body.into(),
        }
    }

    fn history(subs: &[Submission], comments: &[Comment]) -> UserHistory {
        build_history(&merge_events(subs, comments)).unwrap()
    }

    #[test]
    fn fresh_author() {
        let subs = vec![post("s1", "u", 100, 5)];
        let h = history(&subs, &[]);
        let snap = h.snapshot("u", 100);
        assert_eq!((snap.n_prev_posts, snap.n_prev_comments), (0, 0));
        assert_eq!(activity_features(&snap), [None; 4]);
        assert!(type_features(&snap).iter().all(Option::is_none));
        let q = quality_features(&snap);
        assert!(q[..8].iter().all(|v| *v == Some(0.0)));
        assert!(q[8..].iter().all(Option::is_none));
    }

    #[test]
    fn counts_prior_posts_and_comments() {
        let subs = vec![post("s1", "u", 10, 5), post("s2", "u", 20, 5), post("x", "v", 5, 1), post("s3", "u", 100, 1)];
        let comments = vec![
            comment("c1", "u", "x", "x", 30, 1, "a b"),
            comment("c2", "u", "x", "c1", 40, 1, "c"),
            comment("c3", "u", "x", "x", 50, 1, "d"),
            comment("c4", "u", "x", "x", 150, 1, "late"),
        ];
        let snap = history(&subs, &comments).snapshot("u", 100);
        assert_eq!((snap.n_prev_posts, snap.n_prev_comments), (2, 3));
    }

    #[test]
    fn same_timestamp_invisible() {
        let subs = vec![post("s1", "u", 10, 50), post("s2", "u", 10, 60)];
        let h = history(&subs, &[]);
        assert_eq!(h.snapshot("u", 10).n_prev_posts, 0);
        assert_eq!(h.snapshot("u", 11).n_prev_posts, 2);
    }

    #[test]
    fn unsorted_rejected() {
        let subs = vec![post("s1", "u", 10, 50), post("s2", "u", 5, 60)];
        let events = vec![Event::Post(&subs[0]), Event::Post(&subs[1])];
        assert!(matches!(build_history(&events), Err(UserError::Unsorted(1))));
    }

    #[test]
    fn activity_hand_computed() {
        let day = 86_400;
        let now = 100 * day;
        let mut subs = vec![post("thread", "op", 1, 1)];
        let mut comments = Vec::new();
        // 4 posts and 12 comments, first 10 days ago, last 1 hour ago
        subs.push(post("p0", "u", now - 10 * day, 3));
        for i in 1..4 {
            subs.push(post(&format!("p{i}"), "u", now - 5 * day + i, 3));
        }
        for i in 0..11 {
            comments.push(comment(&format!("c{i}"), "u", "thread", "thread", now - 2 * day + i, 1, "x"));
        }
        comments.push(comment("c11", "u", "thread", "thread", now - 3600, 1, "x"));
        let snap = history(&subs, &comments).snapshot("u", now);
        assert_eq!(activity_features(&snap), [Some(16.0), Some(864_000.0), Some(3600.0), Some(0.25)]);

        let only_posts = history(&subs, &[]).snapshot("u", now);
        assert_eq!(activity_features(&only_posts)[3], Some(1.0));
    }

    #[test]
    fn type_single_comment() {
        let subs = vec![post("t", "op", 1000, 1), post("mine", "u", 5000, 1)];
        let comments = vec![comment("c1", "u", "t", "t", 1060, 2, "one two three two one")];
        let snap = history(&subs, &comments).snapshot("u", 5000);
        let f = type_features(&snap);
        assert_eq!(f[0], Some(5.0));
        assert_eq!(f[1], Some(3.0 / 5.0));
        assert_eq!(f[2], Some(1.0));
        assert_eq!(f[3], Some(0.0));
        assert_eq!(f[4], None); // no prior own submissions
        assert_eq!(f[5], Some(60.0));
    }

    #[test]
    fn replies_counted_per_comment() {
        let subs = vec![post("t", "op", 10, 1)];
        let comments = vec![
            comment("c1", "u", "t", "t", 20, 1, "hi"),
            comment("r1", "v", "t", "c1", 30, 1, "yo"),
            comment("r2", "w", "t", "c1", 40, 1, "yo"),
            comment("c2", "u", "t", "t", 50, 1, "again"),
        ];
        let h = history(&subs, &comments);
        let f = type_features(&h.snapshot("u", 100));
        assert_eq!(f[3], Some(0.5));
        // a reply arriving after as_of is not visible yet
        let f = type_features(&h.snapshot("u", 25));
        assert_eq!(f[3], Some(0.0));
        // depth: r1 is depth 2
        let f = type_features(&h.snapshot("v", 100));
        assert_eq!(f[2], Some(2.0));
    }

    #[test]
    fn dangling_parent_excluded_from_depth() {
        let subs = vec![post("t", "op", 10, 1)];
        let comments = vec![comment("c1", "u", "t", "t", 20, 1, "a"), comment("c2", "u", "t", "ghost", 30, 1, "b")];
        let h = history(&subs, &comments);
        assert_eq!(h.dangling_parents(), 1);
        let snap = h.snapshot("u", 100);
        assert_eq!(snap.n_comments_with_depth, 1);
        assert_eq!(type_features(&snap)[2], Some(1.0));
    }

    #[test]
    fn multi_comment_share() {
        let subs = vec![post("a", "u", 10, 1), post("b", "u", 20, 1)];
        let comments = vec![
            comment("c1", "u", "a", "a", 30, 1, "x"),
            comment("c2", "u", "a", "c1", 31, 1, "x"),
            comment("c3", "u", "b", "b", 32, 1, "x"),
        ];
        let f = type_features(&history(&subs, &comments).snapshot("u", 100));
        assert_eq!(f[4], Some(0.5));
    }

    #[test]
    fn k_index_strict() {
        let subs = vec![post("a", "u", 1, 6), post("b", "u", 2, 10), post("c", "u", 3, 51), post("d", "u", 9, 1)];
        let q = quality_features(&history(&subs, &[]).snapshot("u", 9));
        assert_eq!(&q[0..4], &[Some(3.0), Some(1.0), Some(1.0), Some(0.0)]);
        assert_eq!(q[8], Some(1.0));
        assert_eq!(q[9], Some(1.0 / 3.0));
        assert!(q[12..].iter().all(Option::is_none));

        let low = vec![post("a", "u", 1, 5), post("b", "u", 2, 3), post("d", "u", 9, 1)];
        let q = quality_features(&history(&low, &[]).snapshot("u", 9));
        assert!(q[0..4].iter().all(|v| *v == Some(0.0)));
        assert!(q[8..12].iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn deleted_author_all_undefined() {
        let subs = vec![post("a", DELETED_AUTHOR, 1, 60), post("b", DELETED_AUTHOR, 5, 60)];
        let snap = history(&subs, &[]).snapshot(DELETED_AUTHOR, 10);
        assert!(activity_features(&snap).iter().all(Option::is_none));
        assert!(quality_features(&snap).iter().all(Option::is_none));
    }

    #[test]
    fn imputation() {
        let rows: Vec<Vec<Option<f64>>> = vec![vec![Some(1.0), None, Some(4.0)], vec![Some(3.0), None, None]];
        let means = ImputationMeans::fit(3, rows.iter().map(Vec::as_slice));
        assert_eq!(means.means, vec![Some(2.0), None, Some(4.0)]);
        assert_eq!(impute(&[Some(9.0), Some(1.0), Some(0.0)], &means).unwrap(), vec![9.0, 1.0, 0.0]);
        assert_eq!(impute(&[None, Some(1.0), None], &means).unwrap(), vec![2.0, 1.0, 4.0]);
        assert!(matches!(impute(&[None, None, None], &means), Err(UserError::NoTrainingMean(1))));
    }
}
