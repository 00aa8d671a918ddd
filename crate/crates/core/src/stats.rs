//! Interval histograms and summary statistics of duration samples.
//!
//! Samples are scaled into model time units and counted in unit-width cells
//! `(c, c+1)`. Cells are then merged:
//!
//! 1. a sample lying exactly on an integer `k` is counted in the cell below
//!    and that cell is joined with `(k, k+1)`, so the open bin contains it;
//! 2. while some bin is empty or below `min_bin_prob`, the smallest such bin
//!    (leftmost on ties) is joined with its lighter neighbour (right on ties);
//! 3. a single right-to-left pass joins adjacent bins whose counts agree
//!    within the plateau tolerance.
//!
//! Probabilities are exact `count / total` rationals.

use crate::ratio::{self, Prob};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bin {
    pub lo: u32,
    pub hi: u32,
    pub prob: Prob,
}

/// Discrete distribution over disjoint open integer intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalHistogram {
    /// Seconds per model time unit.
    pub unit: f64,
    pub bins: Vec<Bin>,
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no samples")]
    Empty,
    #[error("unit must be positive, got {0}")]
    NonPositiveUnit(f64),
    #[error("min_bin_prob must lie in [0, 1), got {0}")]
    BadMinBinProb(f64),
    #[error("sample {0} cannot lie inside an open interval with nonnegative bounds")]
    BadSample(f64),
    #[error("invalid histogram: {0}")]
    Invalid(String),
    #[error("stats file: {0}")]
    File(String),
}

impl IntervalHistogram {
    /// Checks bin ordering and normalization.
    pub fn validate(&self) -> Result<(), StatsError> {
        if !(self.unit > 0.0 && self.unit.is_finite()) {
            return Err(StatsError::NonPositiveUnit(self.unit));
        }
        if self.bins.is_empty() {
            return Err(StatsError::Invalid("no bins".into()));
        }
        let mut total = ratio::zero();
        for (i, b) in self.bins.iter().enumerate() {
            if b.lo >= b.hi {
                return Err(StatsError::Invalid(format!("bin ({}, {}) is empty", b.lo, b.hi)));
            }
            if i > 0 && self.bins[i - 1].hi > b.lo {
                return Err(StatsError::Invalid(format!(
                    "bin ({}, {}) overlaps or precedes its predecessor",
                    b.lo, b.hi
                )));
            }
            if b.prob <= ratio::zero() || b.prob > ratio::one() {
                return Err(StatsError::Invalid(format!(
                    "bin ({}, {}) has probability {} outside (0, 1]",
                    b.lo,
                    b.hi,
                    ratio::format_prob(&b.prob)
                )));
            }
            total += b.prob;
        }
        if (ratio::to_f64(&total) - 1.0).abs() > 1e-9 {
            return Err(StatsError::Invalid(format!(
                "probabilities sum to {}",
                ratio::format_prob(&total)
            )));
        }
        Ok(())
    }

    /// Index of the bin whose open interval contains `seconds`.
    pub fn bin_of(&self, seconds: f64) -> Option<usize> {
        let v = seconds / self.unit;
        self.bins.iter().position(|b| v > b.lo as f64 && v < b.hi as f64)
    }

    /// Probabilities rounded to six decimal places, the residual going to the
    /// largest bin (first on ties) so the rounded values still sum to one.
    pub fn rounded_probs(&self) -> Vec<f64> {
        const SCALE: i64 = 1_000_000;
        let mut micros: Vec<i64> = self
            .bins
            .iter()
            .map(|b| {
                let m = (ratio::to_f64(&b.prob) * SCALE as f64).round() as i64;
                m.max(1)
            })
            .collect();
        let residual = SCALE - micros.iter().sum::<i64>();
        let largest = (0..self.bins.len())
            .rev()
            .max_by(|&a, &b| self.bins[a].prob.cmp(&self.bins[b].prob).then(b.cmp(&a)))
            .unwrap_or(0);
        if let Some(m) = micros.get_mut(largest) {
            *m += residual;
        }
        micros.into_iter().map(|m| m as f64 / SCALE as f64).collect()
    }
}

/// Knobs for [`build_histogram_with`].
#[derive(Debug, Clone, Copy)]
pub struct HistogramOptions {
    /// Adjacent bins with `|a - b| <= tol * max(a, b)` counts are joined.
    pub plateau_tolerance: f64,
}

impl Default for HistogramOptions {
    fn default() -> Self {
        HistogramOptions { plateau_tolerance: 0.1 }
    }
}

pub fn build_histogram(
    samples: &[f64],
    unit: f64,
    min_bin_prob: f64,
) -> Result<IntervalHistogram, StatsError> {
    build_histogram_with(samples, unit, min_bin_prob, &HistogramOptions::default())
}

#[derive(Debug, Clone, Copy)]
struct Group {
    lo: u32,
    hi: u32,
    count: u64,
}

impl Group {
    fn join(self, right: Group) -> Group {
        Group { lo: self.lo, hi: right.hi, count: self.count + right.count }
    }
}

pub fn build_histogram_with(
    samples: &[f64],
    unit: f64,
    min_bin_prob: f64,
    options: &HistogramOptions,
) -> Result<IntervalHistogram, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(unit > 0.0 && unit.is_finite()) {
        return Err(StatsError::NonPositiveUnit(unit));
    }
    if !(0.0..1.0).contains(&min_bin_prob) {
        return Err(StatsError::BadMinBinProb(min_bin_prob));
    }
    let mut cells: BTreeMap<u32, u64> = BTreeMap::new();
    let mut boundary: Vec<u32> = Vec::new();
    for &s in samples {
        let v = s / unit;
        if !(v > 0.0 && v.is_finite() && v < u32::MAX as f64 - 1.0) {
            return Err(StatsError::BadSample(s));
        }
        let cell = if v.fract() == 0.0 {
            let below = v as u32 - 1;
            boundary.push(below);
            below
        } else {
            v.floor() as u32
        };
        *cells.entry(cell).or_default() += 1;
    }
    let total: u64 = samples.len() as u64;
    let first = *cells.keys().next().expect("nonempty");
    let mut last = *cells.keys().next_back().expect("nonempty");
    if boundary.contains(&last) {
        last += 1;
    }
    let mut groups: Vec<Group> = (first..=last)
        .map(|c| Group { lo: c, hi: c + 1, count: cells.get(&c).copied().unwrap_or(0) })
        .collect();

    boundary.sort_unstable();
    boundary.dedup();
    for k in boundary.into_iter().rev() {
        let i = groups.iter().position(|g| g.lo <= k && k < g.hi).expect("cell exists");
        if groups[i].hi == k + 1 && i + 1 < groups.len() {
            let right = groups.remove(i + 1);
            groups[i] = groups[i].join(right);
        }
    }

    let min_count = min_bin_prob * total as f64;
    loop {
        if groups.len() < 2 {
            break;
        }
        let light = groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.count == 0 || (g.count as f64) < min_count)
            .min_by_key(|(i, g)| (g.count, *i))
            .map(|(i, _)| i);
        let Some(i) = light else { break };
        let left = i.checked_sub(1).map(|j| groups[j].count);
        let right = groups.get(i + 1).map(|g| g.count);
        let merge_left = match (left, right) {
            (Some(l), Some(r)) => l < r,
            (Some(_), None) => true,
            _ => false,
        };
        if merge_left {
            let g = groups.remove(i);
            groups[i - 1] = groups[i - 1].join(g);
        } else {
            let g = groups.remove(i + 1);
            groups[i] = groups[i].join(g);
        }
    }

    let mut i = groups.len();
    while i > 1 {
        i -= 1;
        let (a, b) = (groups[i - 1].count as f64, groups[i].count as f64);
        if (a - b).abs() <= options.plateau_tolerance * a.max(b) {
            let g = groups.remove(i);
            groups[i - 1] = groups[i - 1].join(g);
        }
    }

    let hist = IntervalHistogram {
        unit,
        bins: groups
            .into_iter()
            .map(|g| Bin { lo: g.lo, hi: g.hi, prob: Prob::new(g.count as i64, total as i64) })
            .collect(),
    };
    debug_assert!(hist.validate().is_ok());
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

pub fn summarize_samples(samples: &[f64]) -> Result<SummaryStats, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    // Welford
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for (i, &x) in samples.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = |p: f64| {
        let r = (p * n as f64).ceil() as usize;
        sorted[r.clamp(1, n) - 1]
    };
    Ok(SummaryStats {
        count: n,
        mean,
        variance: (m2 / n as f64).max(0.0),
        min: sorted[0],
        max: sorted[n - 1],
        p50: rank(0.5),
        p90: rank(0.9),
        p99: rank(0.99),
    })
}

#[derive(Serialize, Deserialize)]
struct HistogramDoc {
    unit: f64,
    bins: Vec<(u32, u32, serde_json::Value)>,
}

/// Writes the stats file: `{"key": {"unit": u, "bins": [[lo, hi, p], ...]}}`.
pub fn write_stats(stats: &BTreeMap<String, IntervalHistogram>) -> String {
    let doc: BTreeMap<&String, HistogramDoc> = stats
        .iter()
        .map(|(k, h)| {
            let probs = h.rounded_probs();
            let bins = h
                .bins
                .iter()
                .zip(probs)
                .map(|(b, p)| {
                    let v = serde_json::Number::from_f64(p).map(serde_json::Value::Number);
                    (b.lo, b.hi, v.unwrap_or(serde_json::Value::Null))
                })
                .collect();
            (k, HistogramDoc { unit: h.unit, bins })
        })
        .collect();
    serde_json::to_string_pretty(&doc).expect("stats serialize")
}

pub fn parse_bin_list(
    unit: f64,
    bins: &[(u32, u32, serde_json::Value)],
) -> Result<IntervalHistogram, StatsError> {
    let bins = bins
        .iter()
        .map(|(lo, hi, p)| {
            let prob = match p {
                serde_json::Value::Number(n) => n.as_f64().and_then(ratio::prob_from_f64),
                serde_json::Value::String(s) => ratio::parse_prob(s),
                _ => None,
            }
            .ok_or_else(|| StatsError::File(format!("bad probability {p}")))?;
            Ok(Bin { lo: *lo, hi: *hi, prob })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    let h = IntervalHistogram { unit, bins };
    h.validate()?;
    Ok(h)
}

pub fn read_stats(text: &str) -> Result<BTreeMap<String, IntervalHistogram>, StatsError> {
    let doc: BTreeMap<String, HistogramDoc> =
        serde_json::from_str(text).map_err(|e| StatsError::File(e.to_string()))?;
    doc.into_iter()
        .map(|(k, d)| {
            let h = parse_bin_list(d.unit, &d.bins)
                .map_err(|e| StatsError::File(format!("{k}: {e}")))?;
            Ok((k, h))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CASE: [f64; 10] = [3.2, 3.7, 3.9, 4.5, 5.1, 5.9, 4.4, 4.8, 5.5, 7.1];

    fn triples(h: &IntervalHistogram) -> Vec<(u32, u32, Prob)> {
        h.bins.iter().map(|b| (b.lo, b.hi, b.prob)).collect()
    }

    #[test]
    fn case_study_distribution() {
        let h = build_histogram(&CASE, 1.0, 0.05).unwrap();
        assert_eq!(
            triples(&h),
            vec![(3, 4, Prob::new(3, 10)), (4, 6, Prob::new(3, 5)), (6, 8, Prob::new(1, 10))]
        );
    }

    #[test]
    fn single_sample() {
        let h = build_histogram(&[5.5], 1.0, 0.05).unwrap();
        assert_eq!(triples(&h), vec![(5, 6, Prob::new(1, 1))]);
    }

    #[test]
    fn scaled_samples_give_the_same_bins() {
        let doubled: Vec<f64> = CASE.iter().map(|s| s * 2.0).collect();
        assert_eq!(
            triples(&build_histogram(&doubled, 2.0, 0.05).unwrap()),
            triples(&build_histogram(&CASE, 1.0, 0.05).unwrap())
        );
    }

    #[test]
    fn boundary_sample_widens_its_bin() {
        let h = build_histogram(&[4.0, 4.5, 6.5], 1.0, 0.0).unwrap();
        assert!(h.bin_of(4.0).is_some());
        assert!(h.bins[0].lo == 3 && h.bins[0].hi >= 5);
        h.validate().unwrap();
    }

    #[test]
    fn errors() {
        assert_eq!(build_histogram(&[], 1.0, 0.0), Err(StatsError::Empty));
        assert_eq!(build_histogram(&[1.5], 0.0, 0.0), Err(StatsError::NonPositiveUnit(0.0)));
        assert_eq!(build_histogram(&[0.0], 1.0, 0.0), Err(StatsError::BadSample(0.0)));
        assert!(build_histogram(&[1.5], 1.0, 1.0).is_err());
    }

    #[test]
    fn rounding_keeps_the_sum() {
        let h = IntervalHistogram {
            unit: 1.0,
            bins: vec![
                Bin { lo: 0, hi: 1, prob: Prob::new(1, 3) },
                Bin { lo: 1, hi: 2, prob: Prob::new(1, 3) },
                Bin { lo: 2, hi: 3, prob: Prob::new(1, 3) },
            ],
        };
        let r = h.rounded_probs();
        assert_eq!(r, vec![0.333334, 0.333333, 0.333333]);
    }

    #[test]
    fn stats_file_round_trip() {
        let mut m = BTreeMap::new();
        m.insert("images:BcastComm".to_string(), build_histogram(&CASE, 1.0, 0.05).unwrap());
        let text = write_stats(&m);
        assert!(text.contains("images:BcastComm"));
        assert_eq!(read_stats(&text).unwrap(), m);
    }

    #[test]
    fn summaries() {
        let s = summarize_samples(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.count, s.min, s.max), (3, 1.0, 3.0));
        assert!((s.mean - 2.0).abs() < 1e-12);
        assert!((s.variance - 2.0 / 3.0).abs() < 1e-12);
        let one = summarize_samples(&[5.0]).unwrap();
        assert_eq!((one.mean, one.variance, one.p50, one.p90, one.p99), (5.0, 0.0, 5.0, 5.0, 5.0));
        let skew = summarize_samples(&[0.0, 0.0, 0.0, 10.0]).unwrap();
        assert_eq!((skew.p50, skew.max), (0.0, 10.0));
        assert_eq!(summarize_samples(&[]), Err(StatsError::Empty));
    }

    fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..40.0, 1..200)
    }

    proptest! {
        #[test]
        fn histograms_are_normalized_and_cover_every_sample(
            samples in sample_strategy(),
            min_p in 0.0f64..0.5,
        ) {
            let h = build_histogram(&samples, 1.0, min_p).unwrap();
            prop_assert!(h.validate().is_ok());
            let total: Prob = h.bins.iter().map(|b| b.prob).sum();
            prop_assert_eq!(total, ratio::one());
            for s in &samples {
                let hits = h.bins.iter().filter(|b| *s > b.lo as f64 && *s < b.hi as f64).count();
                prop_assert_eq!(hits, 1);
            }
        }

        #[test]
        fn integer_samples_are_covered(samples in prop::collection::vec(1u32..30, 1..50)) {
            let samples: Vec<f64> = samples.into_iter().map(f64::from).collect();
            let h = build_histogram(&samples, 1.0, 0.1).unwrap();
            prop_assert!(h.validate().is_ok());
            for s in &samples {
                prop_assert!(h.bin_of(*s).is_some());
            }
        }

        #[test]
        fn scale_equivariance(samples in sample_strategy(), exp in -3i32..4, min_p in 0.0f64..0.3) {
            // Powers of two keep the scaled quotient bit-exact.
            let k = 2f64.powi(exp);
            let scaled: Vec<f64> = samples.iter().map(|s| s * k).collect();
            let a = build_histogram(&samples, 1.0, min_p).unwrap();
            let b = build_histogram(&scaled, k, min_p).unwrap();
            prop_assert_eq!(triples(&a), triples(&b));
        }
    }
}
