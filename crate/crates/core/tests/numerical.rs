use pairpop_core::eval::{feature_correlations, spearman};
use pairpop_core::image_features::{color_histogram, hog_features, ColorPalette, SignProjection, DEFAULT_PROJECTED_DIM, HOG_DIM};
use pairpop_core::ingest::NormalizedImage;
use pairpop_core::user::{build_history, merge_events, quality_features, K_THRESHOLDS};
use pairpop_core::{Comment, Submission};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Spearman as the Pearson correlation of average ranks, ranks counted by
/// brute force: rank(x_i) = 1 + #{x_j < x_i} + (#{x_j == x_i} - 1) / 2.
fn brute_spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let below = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                1.0 + below + (equal - 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(xs), rank(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

proptest! {
    #[test]
    fn spearman_matches_brute_force(pairs in prop::collection::vec((0i32..8, 0i32..8), 3..=20)) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let distinct = |v: &[f64]| v.iter().any(|a| *a != v[0]);
        prop_assume!(distinct(&xs) && distinct(&ys));
        let got = spearman(&xs, &ys).unwrap();
        prop_assert!((got - brute_spearman(&xs, &ys)).abs() <= 1e-12);
    }
}

#[test]
fn histogram_sums_to_one() {
    let palette = ColorPalette::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let img = NormalizedImage::from_fn(|_, _| [rng.random(), rng.random(), rng.random()]);
        let h = color_histogram(&img, &palette);
        assert!((h.l1_norm() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn projection_preserves_distances() {
    let proj = SignProjection::new(HOG_DIM, DEFAULT_PROJECTED_DIM, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let images: Vec<NormalizedImage> = (0..20)
        .map(|_| {
            let (a, b): (u8, u8) = (rng.random(), rng.random());
            let f = rng.random_range(0.02..0.2);
            NormalizedImage::from_fn(|x, y| {
                let v = (((x as f64 * f).sin() + (y as f64 * f * 1.3).cos()) * 60.0 + 128.0) as u8;
                [v, a, b]
            })
        })
        .collect();
    let hogs: Vec<Vec<f64>> = images.iter().map(|i| hog_features(i).to_dense()).collect();
    let mut good = 0;
    let mut total = 0;
    'outer: for i in 0..hogs.len() {
        for j in i + 1..hogs.len() {
            if total == 100 {
                break 'outer;
            }
            let diff: Vec<f64> = hogs[i].iter().zip(&hogs[j]).map(|(a, b)| a - b).collect();
            let orig: f64 = diff.iter().map(|d| d * d).sum();
            let projected: f64 = proj.project_dense(&diff).unwrap().iter().map(|d| d * d).sum();
            good += ((projected / orig - 1.0).abs() < 0.25) as usize;
            total += 1;
        }
    }
    assert_eq!(total, 100);
    assert!(good >= 95, "{good}/100");
}

fn random_history(rng: &mut ChaCha8Rng) -> (Vec<Submission>, Vec<Comment>) {
    let authors = ["ann", "bob", "cy"];
    let mut subs = Vec::new();
    for i in 0..rng.random_range(1..15) {
        subs.push(Submission {
            id: format!("s{i}"),
            author: authors[rng.random_range(0..3)].into(),
            community: "c".into(),
            created_utc: rng.random_range(0..1000),
            score: rng.random_range(0..200),
            title: "t".into(),
            image_ref: None,
            link_key: None,
        });
    }
    let mut comments = Vec::new();
    for i in 0..rng.random_range(0..25) {
        let link = subs[rng.random_range(0..subs.len())].id.clone();
        comments.push(Comment {
            id: format!("c{i}"),
            author: authors[rng.random_range(0..3)].into(),
            parent_id: link.clone(),
            link_id: link,
            created_utc: rng.random_range(0..1000),
            score: rng.random_range(0..200),
            body: "some words here".into(),
        });
    }
    (subs, comments)
}

#[test]
fn k_rates_match_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let (subs, comments) = random_history(&mut rng);
        let history = build_history(&merge_events(&subs, &comments)).unwrap();
        let target = &subs[rng.random_range(0..subs.len())];
        let q = quality_features(&history.snapshot(&target.author, target.created_utc));
        let posts: Vec<i64> = subs.iter().filter(|s| s.author == target.author && s.created_utc < target.created_utc).map(|s| s.score).collect();
        let coms: Vec<i64> = comments.iter().filter(|c| c.author == target.author && c.created_utc < target.created_utc).map(|c| c.score).collect();
        for (k, &thr) in K_THRESHOLDS.iter().enumerate() {
            let kp = posts.iter().filter(|&&s| s > thr).count() as f64;
            let kc = coms.iter().filter(|&&s| s > thr).count() as f64;
            assert_eq!(q[k], Some(kp));
            assert_eq!(q[4 + k], Some(kc));
            assert_eq!(q[8 + k], (!posts.is_empty()).then(|| kp / posts.len() as f64));
            assert_eq!(q[12 + k], (!coms.is_empty()).then(|| kc / coms.len() as f64));
        }
    }
}

#[test]
fn features_ignore_the_future() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let (subs, comments) = random_history(&mut rng);
        let target = subs[rng.random_range(0..subs.len())].clone();
        let full = build_history(&merge_events(&subs, &comments)).unwrap();
        let past_subs: Vec<Submission> = subs.iter().filter(|s| s.created_utc < target.created_utc).cloned().collect();
        let past_comments: Vec<Comment> = comments.iter().filter(|c| c.created_utc < target.created_utc).cloned().collect();
        let truncated = build_history(&merge_events(&past_subs, &past_comments)).unwrap();
        let a = full.snapshot(&target.author, target.created_utc);
        let b = truncated.snapshot(&target.author, target.created_utc);
        assert_eq!(quality_features(&a), quality_features(&b));
        assert_eq!(a.n_prev_posts, b.n_prev_posts);
        assert_eq!(a.n_prev_comments, b.n_prev_comments);
    }
}

#[test]
fn noise_columns_rarely_significant() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut false_positives = 0;
    for _ in 0..20 {
        let scores: Vec<f64> = (0..300).map(|_| normal.sample(&mut rng)).collect();
        let columns: Vec<Vec<f64>> = (0..50).map(|_| (0..300).map(|_| normal.sample(&mut rng)).collect()).collect();
        false_positives += feature_correlations(&scores, &columns, 0.05).unwrap().iter().filter(|c| c.significant).count();
    }
    // family-wise rate 0.05 per batch of 50 columns
    assert!(false_positives <= 4, "{false_positives}");
}
