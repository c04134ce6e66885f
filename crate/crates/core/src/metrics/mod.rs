//! Windowed statistics behind the evaluators: fairness gaps, distribution
//! drift, performance on feedback and signal rates.
//!
//! Every metric is exposed twice: as a function over a plain sample, and as a
//! formula over the aggregate the engine maintains incrementally (group
//! tallies, sorted value runs, bin counts, category counts). The sample form
//! builds the aggregate and calls the same formula, so the two cannot drift.

mod catalog;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{MetricFamily, MetricRef, CATALOG};

/// Additive smoothing applied to PSI bin proportions.
pub const PSI_EPSILON: f64 = 1e-4;
/// Additive smoothing applied to category probabilities before the JSD.
pub const JSD_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("insufficient groups: {eligible} group(s) with at least {min} samples")]
    InsufficientGroups { eligible: usize, min: u64 },
    #[error("undefined ratio: every eligible group has a zero positive rate")]
    UndefinedRatio,
    #[error("empty sample")]
    EmptySample,
    #[error("degenerate baseline: reference minimum equals maximum ({0})")]
    DegenerateBaseline(f64),
    #[error("psi needs at least 2 bins, got {0}")]
    TooFewBins(u32),
    #[error("no matched prediction/label pairs")]
    NoMatchedPairs,
    #[error("field `{0}` absent in every event")]
    FieldAbsent(String),
}

impl MetricError {
    /// Errors that only mean "not enough data yet" rather than a broken evaluator.
    pub fn is_warm_up(&self) -> bool {
        matches!(
            self,
            MetricError::InsufficientGroups { .. }
                | MetricError::EmptySample
                | MetricError::NoMatchedPairs
                | MetricError::FieldAbsent(_)
        )
    }
}

pub type MetricOutcome = Result<f64, MetricError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCount {
    pub n: u64,
    pub positives: u64,
}

impl GroupCount {
    pub fn rate(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.positives as f64 / self.n as f64
        }
    }
}

/// Per-group outcome counts, ordered by group label.
pub type GroupTally = BTreeMap<String, GroupCount>;

/// Summary of one group (or of the whole window) attached to a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub n: u64,
    pub value: f64,
}

/// Position in the stream at which a result was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamPoint {
    pub index: u64,
    pub ts: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub evaluator: String,
    pub metric: String,
    pub value: f64,
    pub n: u64,
    pub group_stats: BTreeMap<String, GroupStat>,
    pub computed_at: StreamPoint,
}

pub fn tally_outcomes<'a>(outcomes: impl IntoIterator<Item = (&'a str, bool)>) -> GroupTally {
    let mut tally = GroupTally::new();
    for (group, positive) in outcomes {
        let g = tally.entry(group.to_string()).or_default();
        g.n += 1;
        g.positives += u64::from(positive);
    }
    tally
}

fn eligible_rates(tally: &GroupTally, min_per_group: u64) -> Result<Vec<f64>, MetricError> {
    let rates: Vec<f64> = tally
        .values()
        .filter(|g| g.n > 0 && g.n >= min_per_group)
        .map(GroupCount::rate)
        .collect();
    if rates.len() < 2 {
        return Err(MetricError::InsufficientGroups {
            eligible: rates.len(),
            min: min_per_group,
        });
    }
    Ok(rates)
}

/// Largest gap in positive rate between any two groups with at least
/// `min_per_group` members.
pub fn demographic_parity_difference(tally: &GroupTally, min_per_group: u64) -> MetricOutcome {
    let rates = eligible_rates(tally, min_per_group)?;
    let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

/// Smallest ratio of positive rates between any two eligible groups.
pub fn disparate_impact_ratio(tally: &GroupTally, min_per_group: u64) -> MetricOutcome {
    let rates = eligible_rates(tally, min_per_group)?;
    let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    if hi <= 0.0 {
        return Err(MetricError::UndefinedRatio);
    }
    Ok(lo / hi)
}

/// Kolmogorov-Smirnov distance between two value multisets, each given as
/// ascending `(value, count)` runs. Adjacent runs may repeat a value.
pub fn ks_from_sorted_runs(
    reference: impl Iterator<Item = (f64, u64)>,
    n_ref: u64,
    window: impl Iterator<Item = (f64, u64)>,
    n_win: u64,
) -> MetricOutcome {
    if n_ref == 0 || n_win == 0 {
        return Err(MetricError::EmptySample);
    }
    let mut a = reference.peekable();
    let mut b = window.peekable();
    let (mut ca, mut cb) = (0u64, 0u64);
    let (na, nb) = (n_ref as f64, n_win as f64);
    let mut sup = 0.0f64;
    loop {
        let x = match (a.peek(), b.peek()) {
            (None, None) => break,
            (Some(&(x, _)), None) | (None, Some(&(x, _))) => x,
            (Some(&(x, _)), Some(&(y, _))) => x.min(y),
        };
        while let Some(&(v, c)) = a.peek() {
            if v > x {
                break;
            }
            ca += c;
            a.next();
        }
        while let Some(&(v, c)) = b.peek() {
            if v > x {
                break;
            }
            cb += c;
            b.next();
        }
        sup = sup.max((ca as f64 / na - cb as f64 / nb).abs());
    }
    Ok(sup)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Supremum of the absolute difference between the two empirical CDFs.
pub fn ks_statistic(reference: &[f64], window: &[f64]) -> MetricOutcome {
    let r = sorted(reference);
    let w = sorted(window);
    ks_from_sorted_runs(
        r.iter().map(|&x| (x, 1)),
        r.len() as u64,
        w.iter().map(|&x| (x, 1)),
        w.len() as u64,
    )
}

/// Equal-width binning anchored on a reference sample, with the reference's
/// bin proportions precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiBaseline {
    pub lo: f64,
    pub hi: f64,
    pub ref_props: Vec<f64>,
}

impl PsiBaseline {
    pub fn from_reference(reference: &[f64], bins: u32) -> Result<Self, MetricError> {
        if bins < 2 {
            return Err(MetricError::TooFewBins(bins));
        }
        if reference.is_empty() {
            return Err(MetricError::EmptySample);
        }
        let lo = reference.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            return Err(MetricError::DegenerateBaseline(lo));
        }
        let mut base = PsiBaseline {
            lo,
            hi,
            ref_props: vec![0.0; bins as usize],
        };
        let mut counts = vec![0u64; bins as usize];
        for &x in reference {
            counts[base.bin_of(x)] += 1;
        }
        let n = reference.len() as f64;
        base.ref_props = counts.iter().map(|&c| c as f64 / n).collect();
        Ok(base)
    }

    pub fn bins(&self) -> usize {
        self.ref_props.len()
    }

    /// Bin index of `x`; values outside the reference range clip to the edge bins.
    pub fn bin_of(&self, x: f64) -> usize {
        let bins = self.bins();
        let pos = ((x - self.lo) / (self.hi - self.lo) * bins as f64).floor();
        if pos < 0.0 || pos.is_nan() {
            0
        } else {
            (pos as usize).min(bins - 1)
        }
    }

    pub fn psi_from_counts(&self, counts: &[u64], n: u64) -> MetricOutcome {
        if n == 0 {
            return Err(MetricError::EmptySample);
        }
        let total = n as f64;
        Ok(self
            .ref_props
            .iter()
            .zip(counts)
            .map(|(&r, &c)| {
                let w = c as f64 / total + PSI_EPSILON;
                let r = r + PSI_EPSILON;
                (w - r) * (w / r).ln()
            })
            .sum())
    }
}

/// Population stability index over `bins` equal-width bins spanning the
/// reference range.
pub fn psi(reference: &[f64], window: &[f64], bins: u32) -> MetricOutcome {
    let base = PsiBaseline::from_reference(reference, bins)?;
    let mut counts = vec![0u64; base.bins()];
    for &x in window {
        counts[base.bin_of(x)] += 1;
    }
    base.psi_from_counts(&counts, window.len() as u64)
}

pub type CategoryCounts = BTreeMap<String, u64>;

pub fn count_categories<S: AsRef<str>>(values: impl IntoIterator<Item = S>) -> CategoryCounts {
    let mut counts = CategoryCounts::new();
    for v in values {
        *counts.entry(v.as_ref().to_string()).or_default() += 1;
    }
    counts
}

/// Jensen-Shannon divergence (base 2) between two empirical category
/// distributions.
pub fn jsd_from_counts(reference: &CategoryCounts, window: &CategoryCounts) -> MetricOutcome {
    let n_ref: u64 = reference.values().sum();
    let n_win: u64 = window.values().sum();
    if n_ref == 0 || n_win == 0 {
        return Err(MetricError::EmptySample);
    }
    let mut categories: Vec<&String> = reference.keys().chain(window.keys()).collect();
    categories.sort();
    categories.dedup();
    let k = categories.len() as f64;
    let norm = 1.0 + k * JSD_EPSILON;
    let prob = |counts: &CategoryCounts, n: u64, c: &String| {
        (counts.get(c).copied().unwrap_or(0) as f64 / n as f64 + JSD_EPSILON) / norm
    };
    let mut total = 0.0;
    for c in categories {
        let p = prob(reference, n_ref, c);
        let q = prob(window, n_win, c);
        let m = 0.5 * (p + q);
        total += 0.5 * p * (p / m).log2() + 0.5 * q * (q / m).log2();
    }
    Ok(total.clamp(0.0, 1.0))
}

pub fn prediction_drift_jsd<S: AsRef<str>>(
    reference: impl IntoIterator<Item = S>,
    window: impl IntoIterator<Item = S>,
) -> MetricOutcome {
    jsd_from_counts(&count_categories(reference), &count_categories(window))
}

pub fn ratio(hits: u64, n: u64) -> MetricOutcome {
    if n == 0 {
        Err(MetricError::EmptySample)
    } else {
        Ok(hits as f64 / n as f64)
    }
}

/// Fraction of matched pairs whose prediction equals the label.
pub fn accuracy_on_feedback<T: PartialEq>(pairs: &[(T, T)]) -> MetricOutcome {
    let hits = pairs.iter().filter(|(p, l)| p == l).count() as u64;
    ratio(hits, pairs.len() as u64).map_err(|_| MetricError::NoMatchedPairs)
}

pub fn mean_confidence(confidences: &[f64]) -> MetricOutcome {
    if confidences.is_empty() {
        return Err(MetricError::EmptySample);
    }
    Ok(confidences.iter().sum::<f64>() / confidences.len() as f64)
}

/// Fraction of present values outside `[low, high]`; `None` marks events
/// that lack the field.
pub fn range_violation_rate(values: &[Option<f64>], field: &str, low: f64, high: f64) -> MetricOutcome {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(MetricError::FieldAbsent(field.to_string()));
    }
    let outside = present.iter().filter(|&&v| v < low || v > high).count() as u64;
    ratio(outside, present.len() as u64)
}

/// Fraction of present flags that are set.
pub fn flag_rate(flags: &[Option<bool>], field: &str) -> MetricOutcome {
    let present: Vec<bool> = flags.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(MetricError::FieldAbsent(field.to_string()));
    }
    ratio(present.iter().filter(|&&f| f).count() as u64, present.len() as u64)
}
