use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use pairpop_client::api::Choice;
use pairpop_client::AnnotationClient;
use pairpop_core::rng::coin;
use pairpop_core::{Label, Submission};
use pairpop_server::{router, spawn, AppState, PairSet};

fn sub(id: &str, with_image: bool) -> Submission {
    Submission {
        id: id.into(),
        author: "someone".into(),
        community: "pics".into(),
        created_utc: 1_400_000_000,
        score: 10,
        title: format!("title of {id}"),
        image_ref: with_image.then(|| format!("{id}.png")),
        link_key: None,
    }
}

/// `n` pairs with labels from a seeded coin; every submission has an image
/// reference, but only even-numbered files exist on disk.
fn pair_set(n: usize, image_root: Option<&Path>) -> (PairSet, HashMap<String, Label>) {
    let mut rows = Vec::new();
    let mut labels = HashMap::new();
    for i in 0..n {
        let label = if coin(99, 1, i as u64) { Label::AWins } else { Label::BWins };
        let pid = format!("p{i:06}");
        labels.insert(pid.clone(), label);
        rows.push((pid, sub(&format!("x{}", 2 * i), true), sub(&format!("x{}", 2 * i + 1), true), label));
    }
    if let Some(root) = image_root {
        for i in (0..2 * n).step_by(2) {
            let img = image::RgbImage::from_pixel(4, 4, image::Rgb([i as u8, 0, 0]));
            img.save(root.join(format!("x{i}.png"))).unwrap();
        }
    }
    (PairSet::new(rows, image_root).unwrap(), labels)
}

async fn start(state: AppState, assets: Option<&Path>) -> AnnotationClient {
    let addr = spawn("127.0.0.1:0".parse().unwrap(), router(state, assets.map(Path::to_path_buf))).await.unwrap();
    AnnotationClient::new(format!("http://{addr}"))
}

fn choose(label: Label, correct: bool) -> Choice {
    match (label, correct) {
        (Label::AWins, true) | (Label::BWins, false) => Choice::A,
        _ => Choice::B,
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn twenty_pair_session_matches_hand_count() {
    let (set, labels) = pair_set(20, None);
    let client = start(AppState::in_memory(set, 1), None).await;
    let session = client.session().await.unwrap();
    assert_eq!(session.total, 20);
    let mut seen = HashSet::new();
    let mut hand_correct = 0;
    for k in 0..20 {
        let next = client.next_pair(&session.session_id).await.unwrap();
        assert_eq!(next.judged, k);
        let pair = next.pair.expect("unjudged pairs remain");
        assert!(seen.insert(pair.pair_id.clone()), "pair shown twice");
        let correct = k % 3 != 0;
        hand_correct += correct as usize;
        let ack = client.judge(&session.session_id, &pair.pair_id, choose(labels[&pair.pair_id], correct), None).await.unwrap();
        assert_eq!(ack.judged, k + 1);
    }
    let done = client.next_pair(&session.session_id).await.unwrap();
    assert!(done.pair.is_none());
    assert_eq!(done.judged, 20);

    let stats = client.stats().await.unwrap();
    assert_eq!(stats.judged, 20);
    assert_eq!(stats.correct, hand_correct);
    assert_eq!(stats.accuracy, Some(hand_correct as f64 / 20.0));
    assert_eq!(stats.annotators.len(), 1);
    assert_eq!(stats.annotators[0].session_id, session.session_id);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn rejections_leave_stats_unchanged() {
    let (set, _) = pair_set(5, None);
    let client = start(AppState::in_memory(set, 2), None).await;
    let s = client.session().await.unwrap().session_id;
    let pair = client.next_pair(&s).await.unwrap().pair.unwrap();
    client.judge(&s, &pair.pair_id, Choice::A, Some("brighter")).await.unwrap();
    let before = client.stats().await.unwrap();

    let dup = client.judge(&s, &pair.pair_id, Choice::B, None).await.unwrap_err();
    assert_eq!(dup.status().unwrap().as_u16(), 409);
    let unknown = client.judge(&s, "p999999", Choice::A, None).await.unwrap_err();
    assert_eq!(unknown.status().unwrap().as_u16(), 409);
    let no_session = client.judge("nope", &pair.pair_id, Choice::A, None).await.unwrap_err();
    assert_eq!(no_session.status().unwrap().as_u16(), 404);
    for body in ["{", "{\"session_id\": 3}", "{\"session_id\":\"x\",\"pair_id\":\"p000000\",\"choice\":\"c\"}"] {
        let bad = client.judge_raw(body).await.unwrap_err();
        assert_eq!(bad.status().unwrap().as_u16(), 400, "{body}");
    }
    assert_eq!(client.next_pair("nope").await.unwrap_err().status().unwrap().as_u16(), 404);

    assert_eq!(client.stats().await.unwrap(), before);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn pair_payload_carries_no_label_or_score() {
    let (set, _) = pair_set(3, None);
    let client = start(AppState::in_memory(set, 3), None).await;
    let s = client.session().await.unwrap().session_id;
    let raw = client.fetch(&format!("/api/pairs/next?session={s}")).await.unwrap().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&raw).unwrap();
    assert!(v["pair"]["a"]["title"].is_string());
    fn keys(v: &serde_json::Value, out: &mut Vec<String>) {
        if let serde_json::Value::Object(m) = v {
            for (k, x) in m {
                out.push(k.clone());
                keys(x, out);
            }
        }
    }
    let mut all = Vec::new();
    keys(&v, &mut all);
    assert!(all.iter().all(|k| !k.contains("label") && !k.contains("score")), "{all:?}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn sessions_get_different_orders() {
    let (set, _) = pair_set(20, None);
    let client = start(AppState::in_memory(set, 4), None).await;
    let mut orders = Vec::new();
    for _ in 0..2 {
        let s = client.session().await.unwrap().session_id;
        let mut order = Vec::new();
        while let Some(p) = client.next_pair(&s).await.unwrap().pair {
            client.judge(&s, &p.pair_id, Choice::A, None).await.unwrap();
            order.push(p.pair_id);
        }
        orders.push(order);
    }
    assert_eq!(orders[0].len(), 20);
    assert_ne!(orders[0], orders[1]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_sessions_lose_nothing() {
    let (set, _) = pair_set(20, None);
    let client = start(AppState::in_memory(set, 5), None).await;
    let tasks: Vec<_> = (0..4)
        .map(|_| {
            let c = client.clone();
            tokio::spawn(async move {
                let s = c.session().await.unwrap().session_id;
                while let Some(p) = c.next_pair(&s).await.unwrap().pair {
                    c.judge(&s, &p.pair_id, Choice::B, None).await.unwrap();
                    tokio::task::yield_now().await;
                }
                s
            })
        })
        .collect();
    for t in tasks {
        t.await.unwrap();
    }
    let stats = client.stats().await.unwrap();
    assert_eq!(stats.judged, 80);
    assert_eq!(stats.annotators.len(), 4);
    assert!(stats.annotators.iter().all(|a| a.judged == 20));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn coin_flip_annotators_land_near_half() {
    let (set, _) = pair_set(20, None);
    let client = start(AppState::in_memory(set, 6), None).await;
    let mut k = 0u64;
    for _ in 0..50 {
        let s = client.session().await.unwrap().session_id;
        while let Some(p) = client.next_pair(&s).await.unwrap().pair {
            let choice = if coin(7, 2, k) { Choice::A } else { Choice::B };
            k += 1;
            client.judge(&s, &p.pair_id, choice, None).await.unwrap();
        }
    }
    let stats = client.stats().await.unwrap();
    assert_eq!(stats.judged, 1000);
    let acc = stats.accuracy.unwrap();
    assert!((0.45..=0.55).contains(&acc), "{acc}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn log_replay_rebuilds_stats() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("judgments.jsonl");
    let (set, labels) = pair_set(10, None);
    let state = AppState::open(set.clone(), &log, 8).unwrap();
    let client = start(state.clone(), None).await;
    let mut first_order = Vec::new();
    for i in 0..3 {
        let s = client.session().await.unwrap().session_id;
        for j in 0..(4 + i) {
            let p = client.next_pair(&s).await.unwrap().pair.unwrap();
            if i == 0 {
                first_order.push(p.pair_id.clone());
            }
            client.judge(&s, &p.pair_id, choose(labels[&p.pair_id], j % 2 == 0), None).await.unwrap();
        }
    }
    let live = client.stats().await.unwrap();

    let replayed = AppState::open(set.clone(), &log, 8).unwrap();
    assert_eq!(replayed.stats(), live);
    assert_eq!(replayed.judgments(), state.judgments());

    // a restarted service continues the same sessions in the same order
    let client2 = start(replayed, None).await;
    let s0 = pairpop_server::session_id(8, 0);
    let next = client2.next_pair(&s0).await.unwrap();
    assert_eq!(next.judged, 4);
    assert!(!first_order.contains(&next.pair.unwrap().pair_id));

    // a torn final write is dropped, the rest survives
    let mut text = fs::read_to_string(&log).unwrap();
    text.push_str("{\"kind\":\"judgment\",\"session_id\":");
    fs::write(&log, &text).unwrap();
    let after_tear = AppState::open(set.clone(), &log, 8).unwrap();
    assert_eq!(after_tear.stats(), live);

    // a bad line in the middle is refused
    let mut lines: Vec<&str> = text.lines().collect();
    lines.insert(1, "not json");
    fs::write(&log, lines.join("\n") + "\n").unwrap();
    assert!(AppState::open(set, &log, 8).is_err());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn images_and_static_assets() {
    let dir = tempfile::tempdir().unwrap();
    let assets = tempfile::tempdir().unwrap();
    fs::write(assets.path().join("index.html"), "<html>ui</html>").unwrap();
    let (set, _) = pair_set(4, Some(dir.path()));
    let client = start(AppState::in_memory(set, 9), Some(assets.path())).await;
    let s = client.session().await.unwrap().session_id;
    let pair = client.next_pair(&s).await.unwrap().pair.unwrap();
    // even ids have files, odd ids do not
    let bytes = client.fetch(pair.a.image_url.as_deref().unwrap()).await.unwrap().unwrap();
    assert_eq!(&bytes[..4], b"\x89PNG");
    assert!(client.fetch(pair.b.image_url.as_deref().unwrap()).await.unwrap().is_none());
    assert!(client.fetch("/img/unknown").await.unwrap().is_none());
    // a failed image does not block judging
    client.judge(&s, &pair.pair_id, Choice::A, None).await.unwrap();

    let page = client.fetch("/index.html").await.unwrap().unwrap();
    assert_eq!(page, b"<html>ui</html>");
}
