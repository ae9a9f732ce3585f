use std::collections::HashSet;

use pairpop_core::pairing::{sample_pairs, PairConfig};
use pairpop_core::Submission;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sub(i: usize, t: i64, score: i64) -> Submission {
    Submission {
        id: format!("x{i:02}"),
        author: "a".into(),
        community: "c".into(),
        created_utc: t,
        score,
        title: String::new(),
        image_ref: None,
        link_key: None,
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> Vec<Submission> {
    let n = rng.random_range(2..=12);
    (0..n)
        .map(|i| {
            let score = [0i64, 1, 3, 5, 12, 30, 40, 90, 200, 400][rng.random_range(0..10)];
            sub(i, rng.random_range(0..60), score)
        })
        .collect()
}

/// Acceptance key of an edge: gap, then the earlier member by (time, id), then
/// the later member's id.
type Key = (i64, i64, String, String);

fn key(x: &Submission, y: &Submission) -> Key {
    let (first, second) = if (x.created_utc, &x.id) <= (y.created_utc, &y.id) { (x, y) } else { (y, x) };
    (second.created_utc - first.created_utc, first.created_utc, first.id.clone(), second.id.clone())
}

/// Sorted key lists of every maximal matching over `edges`.
fn maximal_matchings(edges: &[(usize, usize, Key)], n: usize) -> Vec<Vec<Key>> {
    fn rec(edges: &[(usize, usize, Key)], k: usize, used: &mut Vec<bool>, chosen: &mut Vec<Key>, out: &mut Vec<Vec<Key>>) {
        if k == edges.len() {
            if edges.iter().all(|(a, b, _)| used[*a] || used[*b]) {
                let mut m = chosen.clone();
                m.sort();
                out.push(m);
            }
            return;
        }
        let (a, b, ref e) = edges[k];
        if !used[a] && !used[b] {
            used[a] = true;
            used[b] = true;
            chosen.push(e.clone());
            rec(edges, k + 1, used, chosen, out);
            chosen.pop();
            used[a] = false;
            used[b] = false;
        }
        rec(edges, k + 1, used, chosen, out);
    }
    let mut out = Vec::new();
    rec(edges, 0, &mut vec![false; n], &mut Vec::new(), &mut out);
    out
}

#[test]
fn greedy_matching_is_lexicographically_minimal() {
    let cfg = PairConfig { max_window: 20, min_score_diff: 20, min_ratio: 2.0, min_score: 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3000 {
        let subs = random_instance(&mut rng);
        let mut edges = Vec::new();
        for i in 0..subs.len() {
            for j in i + 1..subs.len() {
                let (x, y) = (&subs[i], &subs[j]);
                let gap = (x.created_utc - y.created_utc).abs();
                if x.score >= cfg.min_score && y.score >= cfg.min_score && gap <= cfg.max_window && cfg.scores_eligible(x.score, y.score) {
                    edges.push((i, j, key(x, y)));
                }
            }
        }
        let best = maximal_matchings(&edges, subs.len()).into_iter().min().expect("at least one maximal matching");

        let pairs = sample_pairs(&subs, &cfg, 3);
        let by_id = |id: &str| subs.iter().find(|s| s.id == id).unwrap();
        let mut got: Vec<Key> = pairs.iter().map(|p| key(by_id(&p.id_a), by_id(&p.id_b))).collect();
        // emitted in acceptance order
        assert!(got.windows(2).all(|w| w[0] <= w[1]));
        got.sort();
        assert_eq!(got, best, "{subs:?}");

        let mut seen = HashSet::new();
        assert!(pairs.iter().all(|p| seen.insert(p.id_a.clone()) && seen.insert(p.id_b.clone())));
        assert!(pairs.iter().all(|p| p.satisfies(&cfg)));
    }
}
