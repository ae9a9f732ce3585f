use std::collections::HashMap;

use super::phash::{hamming, PerceptualHash};
use super::{IngestError, Submission};

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    pub kept: Vec<Submission>,
    /// Removed duplicate groups, each a list of submission ids in input order.
    pub removed_groups: Vec<Vec<String>>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Splits 64 bits into `parts` contiguous chunks of near-equal width.
fn chunk_bounds(parts: usize) -> Vec<(u32, u32)> {
    let parts = parts.clamp(1, 64);
    let base = 64 / parts;
    let extra = 64 % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0u32;
    for i in 0..parts {
        let w = (base + usize::from(i < extra)) as u32;
        out.push((start, w));
        start += w;
    }
    out
}

fn chunk(h: u64, (start, width): (u32, u32)) -> u64 {
    if width == 64 {
        h
    } else {
        (h >> start) & ((1u64 << width) - 1)
    }
}

/// Removes every member of every duplicate group.
///
/// Two submissions are duplicates when they share a `link_key` or their image
/// hashes differ in at most `hamming_threshold` bits; groups are the
/// transitive closure of that relation. Candidate hash pairs come from
/// multi-index buckets: splitting the hash into `threshold + 1` chunks, any
/// two hashes within the threshold agree exactly on at least one chunk.
pub fn dedup(
    subs: &[Submission],
    hashes: &HashMap<String, PerceptualHash>,
    hamming_threshold: u32,
) -> Result<DedupOutcome, IngestError> {
    let mut item_hash: Vec<Option<PerceptualHash>> = Vec::with_capacity(subs.len());
    for s in subs {
        let h = match (&s.image_ref, hashes.get(&s.id)) {
            (Some(_), None) => return Err(IngestError::MissingHash(s.id.clone())),
            (_, h) => h.copied(),
        };
        item_hash.push(h);
    }

    let mut uf = UnionFind::new(subs.len());

    let mut by_key: HashMap<&str, usize> = HashMap::new();
    for (i, s) in subs.iter().enumerate() {
        if let Some(k) = s.link_key.as_deref() {
            match by_key.get(k) {
                Some(&j) => uf.union(i, j),
                None => {
                    by_key.insert(k, i);
                }
            }
        }
    }

    let bounds = chunk_bounds(hamming_threshold as usize + 1);
    let mut buckets: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
    for (i, h) in item_hash.iter().enumerate() {
        if let Some(h) = h {
            for (c, b) in bounds.iter().enumerate() {
                buckets.entry((c, chunk(h.0, *b))).or_default().push(i);
            }
        }
    }
    for members in buckets.values() {
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                if uf.find(i) == uf.find(j) {
                    continue;
                }
                if hamming(item_hash[i].unwrap(), item_hash[j].unwrap()) <= hamming_threshold {
                    uf.union(i, j);
                }
            }
        }
    }

    let mut group_members: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..subs.len() {
        let r = uf.find(i);
        group_members.entry(r).or_default().push(i);
    }
    let mut kept = Vec::new();
    let mut removed_groups = Vec::new();
    for (i, s) in subs.iter().enumerate() {
        let members = &group_members[&uf.find(i)];
        if members.len() == 1 {
            kept.push(s.clone());
        } else if members[0] == i {
            removed_groups.push(members.iter().map(|&m| subs[m].id.clone()).collect());
        }
    }
    Ok(DedupOutcome { kept, removed_groups })
}
