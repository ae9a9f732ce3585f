//! Calendar one-hot encodings and the Earlier baseline.

use chrono::{DateTime, Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::pairing::{Label, RankedPair};
use crate::rng::{coin, streams};
use crate::vector::FeatureVector;

const MINUTES: usize = 60;
const HOURS: usize = 24;
const WEEKDAYS: usize = 7;

/// UTC calendar fields of a timestamp: (minute, hour, weekday with Monday = 0, year).
pub fn calendar(t: i64) -> (usize, usize, usize, i32) {
    let dt = DateTime::from_timestamp(t, 0).expect("timestamp in chrono range");
    (dt.minute() as usize, dt.hour() as usize, dt.weekday().num_days_from_monday() as usize, dt.year())
}

/// One-hot blocks minute-in-hour (60), hour-in-day (24), day-in-week (7) and
/// year over the training year range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeEncoder {
    pub year_min: i32,
    pub year_max: i32,
}

impl TimeEncoder {
    pub fn new(year_min: i32, year_max: i32) -> Self {
        assert!(year_min <= year_max);
        Self { year_min, year_max }
    }

    /// Year range spanned by training timestamps.
    pub fn fit(times: impl IntoIterator<Item = i64>) -> Option<Self> {
        let years: Vec<i32> = times.into_iter().map(|t| calendar(t).3).collect();
        Some(Self::new(*years.iter().min()?, *years.iter().max()?))
    }

    pub fn n_years(&self) -> usize {
        (self.year_max - self.year_min + 1) as usize
    }

    pub fn dim(&self) -> usize {
        MINUTES + HOURS + WEEKDAYS + self.n_years()
    }

    /// Encodes `t`; the flag is set when the year fell outside the range and
    /// was clamped to the nearest boundary.
    pub fn encode(&self, t: i64) -> (FeatureVector, bool) {
        let (minute, hour, weekday, year) = calendar(t);
        let clamped_year = year.clamp(self.year_min, self.year_max);
        let year_idx = (clamped_year - self.year_min) as usize;
        let entries = vec![
            (minute as u32, 1.0),
            ((MINUTES + hour) as u32, 1.0),
            ((MINUTES + HOURS + weekday) as u32, 1.0),
            ((MINUTES + HOURS + WEEKDAYS + year_idx) as u32, 1.0),
        ];
        (FeatureVector::from_entries(self.dim(), entries), clamped_year != year)
    }

    /// `enc(t1)` followed by `enc(t2)`: concatenated, not differenced.
    pub fn pair_features(&self, t1: i64, t2: i64) -> FeatureVector {
        let (a, _) = self.encode(t1);
        let (b, _) = self.encode(t2);
        FeatureVector::concat([&a, &b])
    }
}

/// Predicts that the earlier-posted member wins. Equal timestamps fall back
/// to a coin keyed on `(seed, index)`.
pub fn earlier_baseline(created_a: i64, created_b: i64, seed: u64, index: u64) -> Label {
    match created_a.cmp(&created_b) {
        std::cmp::Ordering::Less => Label::AWins,
        std::cmp::Ordering::Greater => Label::BWins,
        std::cmp::Ordering::Equal => {
            if coin(seed, streams::EARLIER, index) {
                Label::AWins
            } else {
                Label::BWins
            }
        }
    }
}

/// Accuracy of the Earlier baseline over pairs, given creation times.
pub fn earlier_accuracy(pairs: &[RankedPair], created: impl Fn(&str) -> i64, seed: u64) -> f64 {
    if pairs.is_empty() {
        return f64::NAN;
    }
    let correct = pairs
        .iter()
        .enumerate()
        .filter(|(i, p)| earlier_baseline(created(&p.id_a), created(&p.id_b), seed, *i as u64) == p.label)
        .count();
    correct as f64 / pairs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monday_midnight_2012() {
        // 2012-01-02 00:00:00 UTC
        let t = 1_325_462_400;
        assert_eq!(calendar(t), (0, 0, 0, 2012));
        let enc = TimeEncoder::new(2010, 2014);
        let (v, clamped) = enc.encode(t);
        assert!(!clamped);
        assert_eq!(v.entries(), &[(0, 1.0), (60, 1.0), (84, 1.0), (91 + 2, 1.0)]);
    }

    #[test]
    fn sixty_seconds_changes_only_minute() {
        let enc = TimeEncoder::new(2012, 2012);
        let t = 1_325_462_400 + 5 * 3600 + 10 * 60;
        let (a, _) = enc.encode(t);
        let (b, _) = enc.encode(t + 60);
        let diff: Vec<usize> = (0..enc.dim()).filter(|&i| a.get(i) != b.get(i)).collect();
        assert_eq!(diff, vec![10, 11]);
    }

    #[test]
    fn week_later_same_weekday() {
        let t = 1_325_462_400 + 12345;
        assert_eq!(calendar(t).2, calendar(t + 7 * 86_400).2);
    }

    #[test]
    fn exactly_four_ones_and_clamping() {
        let enc = TimeEncoder::new(2011, 2012);
        for t in [1_000_000_000i64, 1_325_462_400, 1_400_000_000] {
            let (v, _) = enc.encode(t);
            assert_eq!(v.nnz(), 4);
            assert!(v.entries().iter().all(|e| e.1 == 1.0));
        }
        assert!(enc.encode(1_400_000_000).1); // 2014 clamps to 2012
        assert!(enc.encode(1_000_000_000).1); // 2001 clamps to 2011
    }

    #[test]
    fn pair_concat() {
        let enc = TimeEncoder::new(2012, 2013);
        let t = 1_325_462_400;
        let same = enc.pair_features(t, t).to_dense();
        let d = enc.dim();
        assert_eq!(same.len(), 2 * (60 + 24 + 7 + 2));
        assert_eq!(same[..d], same[d..]);
        let ab = enc.pair_features(t, t + 4000).to_dense();
        let ba = enc.pair_features(t + 4000, t).to_dense();
        assert_eq!(ab[..d], ba[d..]);
        assert_eq!(ab[d..], ba[..d]);
    }

    #[test]
    fn earlier_picks_first() {
        assert_eq!(earlier_baseline(10, 20, 0, 0), Label::AWins);
        assert_eq!(earlier_baseline(30, 20, 0, 0), Label::BWins);
        let ties: usize = (0..1000).filter(|&i| earlier_baseline(5, 5, 3, i) == Label::AWins).count();
        assert!((400..600).contains(&ties));
    }
}
