use std::collections::{BTreeMap, HashMap};

use super::Submission;

const SECONDS_PER_DAY: i64 = 86_400;

/// UTC calendar day number (days since the epoch).
pub fn utc_day(created_utc: i64) -> i64 {
    created_utc.div_euclid(SECONDS_PER_DAY)
}

/// Keeps the submissions whose UTC day has strictly more than `threshold`
/// submissions. Input order is preserved.
pub fn filter_active_days(subs: &[Submission], threshold: usize) -> Vec<Submission> {
    let mut per_day: HashMap<i64, usize> = HashMap::new();
    for s in subs {
        *per_day.entry(utc_day(s.created_utc)).or_default() += 1;
    }
    subs.iter()
        .filter(|s| per_day[&utc_day(s.created_utc)] > threshold)
        .cloned()
        .collect()
}

/// Groups submissions by community, preserving input order within each group.
pub fn split_by_community(subs: Vec<Submission>) -> BTreeMap<String, Vec<Submission>> {
    let mut out: BTreeMap<String, Vec<Submission>> = BTreeMap::new();
    for s in subs {
        out.entry(s.community.clone()).or_default().push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sub(id: usize, t: i64) -> Submission {
        Submission {
            id: format!("s{id}"),
            author: "u".into(),
            community: "c".into(),
            created_utc: t,
            score: 1,
            title: String::new(),
            image_ref: None,
            link_key: None,
        }
    }

    fn day_of(n: usize, day: i64, start_id: usize) -> Vec<Submission> {
        (0..n).map(|i| sub(start_id + i, day * SECONDS_PER_DAY + 60 * i as i64 + 1)).collect()
    }

    #[test]
    fn boundary_sixteen_kept_fifteen_dropped() {
        assert_eq!(filter_active_days(&day_of(16, 100, 0), 15).len(), 16);
        assert!(filter_active_days(&day_of(15, 100, 0), 15).is_empty());
    }

    #[test]
    fn mixed_days_against_histogram() {
        let mut subs = day_of(10, 1, 0);
        subs.extend(day_of(20, 2, 100));
        subs.extend(day_of(16, 3, 200));
        let kept = filter_active_days(&subs, 15);
        assert_eq!(kept.len(), 36);
        assert!(kept.iter().all(|s| utc_day(s.created_utc) != 1));
        // stable order
        let ids: Vec<_> = kept.iter().map(|s| s.id.clone()).collect();
        let expected: Vec<_> = subs.iter().filter(|s| utc_day(s.created_utc) != 1).map(|s| s.id.clone()).collect();
        assert_eq!(ids, expected);
    }

    proptest! {
        #[test]
        fn idempotent(times in proptest::collection::vec(1i64..(SECONDS_PER_DAY * 6), 0..200), threshold in 0usize..20) {
            let subs: Vec<_> = times.iter().enumerate().map(|(i, t)| sub(i, *t)).collect();
            let once = filter_active_days(&subs, threshold);
            let twice = filter_active_days(&once, threshold);
            prop_assert_eq!(once, twice);
        }
    }
}
