//! Per-evaluator sliding windows with incrementally maintained aggregates.

use std::collections::{BTreeMap, VecDeque};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::baseline::{BaselineData, Reference};
use crate::compiler::Evaluator;
use crate::dsml::Window;
use crate::metrics::{
    demographic_parity_difference, disparate_impact_ratio, jsd_from_counts, ks_from_sorted_runs,
    ratio, CategoryCounts, GroupStat, GroupTally, MetricError, MetricRef,
};

/// One observation as stored in a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Obs {
    /// Group of each sensitive attribute (in evaluator order) and whether
    /// the outcome was positive.
    Outcome { groups: Vec<Option<String>>, positive: bool },
    Value(f64),
    Category(String),
    /// A counted condition: correct prediction, out-of-range value or set flag.
    Hit(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub index: u64,
    pub ts: i64,
    pub obs: Obs,
}

#[derive(Debug, Clone, PartialEq)]
enum Agg {
    Fairness(Vec<GroupTally>),
    Sorted(BTreeMap<OrderedFloat<f64>, u64>),
    Bins(Vec<u64>),
    Categories(CategoryCounts),
    Hits(u64),
    /// Mean confidence is recomputed from the entries; nothing to maintain.
    Plain,
}

/// Summary of the window content attached to violation evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDigest {
    pub n: u64,
    pub first_index: Option<u64>,
    pub last_index: Option<u64>,
    /// First 16 hex digits of the SHA-256 of the serialized entries.
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

/// The successful value of an evaluation with its per-group breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub n: u64,
    pub group_stats: BTreeMap<String, GroupStat>,
}

#[derive(Debug, Clone)]
pub struct EvaluatorWindow {
    pub entries: VecDeque<Entry>,
    agg: Agg,
}

impl EvaluatorWindow {
    pub fn new(e: &Evaluator, baseline: Option<&BaselineData>) -> Self {
        let agg = match &e.metric {
            MetricRef::DemographicParity | MetricRef::DisparateImpact => {
                Agg::Fairness(vec![GroupTally::new(); e.sensitive_attributes.len()])
            }
            MetricRef::KsDrift { .. } => Agg::Sorted(BTreeMap::new()),
            MetricRef::PsiDrift { bins, .. } => {
                let n = match baseline.map(|b| &b.reference) {
                    Some(Reference::Numeric { psi: Some(Ok(p)), .. }) => p.bins(),
                    _ => *bins as usize,
                };
                Agg::Bins(vec![0; n])
            }
            MetricRef::PredictionDrift => Agg::Categories(CategoryCounts::new()),
            MetricRef::Accuracy | MetricRef::RangeRate { .. } | MetricRef::FlagRate { .. } => Agg::Hits(0),
            MetricRef::MeanConfidence => Agg::Plain,
        };
        Self {
            entries: VecDeque::new(),
            agg,
        }
    }

    /// Rebuilds a window from stored entries (snapshot restore).
    pub fn from_entries(e: &Evaluator, baseline: Option<&BaselineData>, entries: Vec<Entry>) -> Self {
        let mut w = Self::new(e, baseline);
        for entry in entries {
            w.apply(&entry, 1, baseline);
            w.entries.push_back(entry);
        }
        w
    }

    pub fn len(&self) -> u64 {
        self.entries.len() as u64
    }

    fn apply(&mut self, entry: &Entry, sign: i64, baseline: Option<&BaselineData>) {
        let bump = |c: &mut u64| {
            if sign > 0 {
                *c += 1
            } else {
                *c -= 1
            }
        };
        match (&mut self.agg, &entry.obs) {
            (Agg::Fairness(tallies), Obs::Outcome { groups, positive }) => {
                for (tally, group) in tallies.iter_mut().zip(groups) {
                    if let Some(g) = group {
                        let slot = tally.entry(g.clone()).or_default();
                        bump(&mut slot.n);
                        if *positive {
                            bump(&mut slot.positives);
                        }
                        if slot.n == 0 {
                            tally.remove(g);
                        }
                    }
                }
            }
            (Agg::Sorted(map), Obs::Value(x)) => {
                let key = OrderedFloat(*x);
                let slot = map.entry(key).or_default();
                bump(slot);
                if *slot == 0 {
                    map.remove(&key);
                }
            }
            (Agg::Bins(counts), Obs::Value(x)) => {
                if let Some(Reference::Numeric { psi: Some(Ok(p)), .. }) = baseline.map(|b| &b.reference) {
                    bump(&mut counts[p.bin_of(*x)]);
                }
            }
            (Agg::Categories(counts), Obs::Category(c)) => {
                let slot = counts.entry(c.clone()).or_default();
                bump(slot);
                if *slot == 0 {
                    counts.remove(c);
                }
            }
            (Agg::Hits(h), Obs::Hit(hit)) => {
                if *hit {
                    bump(h);
                }
            }
            _ => {}
        }
    }

    /// Appends an entry and evicts what falls out of the window.
    pub fn push(&mut self, window: Window, entry: Entry, baseline: Option<&BaselineData>) {
        self.apply(&entry, 1, baseline);
        let now = entry.ts;
        self.entries.push_back(entry);
        loop {
            let evict = match (window, self.entries.front()) {
                (Window::Count(size), Some(_)) => self.entries.len() as u64 > size,
                (Window::Time(ms), Some(front)) => front.ts <= now - ms.0 as i64,
                (_, None) => false,
            };
            if !evict {
                break;
            }
            let old = self.entries.pop_front().expect("checked non-empty");
            self.apply(&old, -1, baseline);
        }
    }

    /// Computes the metric over the current window. `Ok(None)` means the
    /// window is still warming up.
    pub fn evaluate(
        &self,
        e: &Evaluator,
        baseline: Option<&BaselineData>,
    ) -> Result<Option<Evaluation>, MetricError> {
        let n = self.len();
        let plain = |value: f64| Ok(Some(Evaluation {
            value,
            n,
            group_stats: BTreeMap::new(),
        }));
        match (&self.agg, &e.metric) {
            (Agg::Fairness(tallies), metric) => {
                let mut best: Option<f64> = None;
                let mut first_err = None;
                let mut group_stats = BTreeMap::new();
                for (attr, tally) in e.sensitive_attributes.iter().zip(tallies) {
                    for (g, c) in tally {
                        group_stats.insert(format!("{attr}={g}"), GroupStat { n: c.n, value: c.rate() });
                    }
                    let v = match metric {
                        MetricRef::DisparateImpact => disparate_impact_ratio(tally, e.min_samples),
                        _ => demographic_parity_difference(tally, e.min_samples),
                    };
                    match v {
                        Ok(v) => {
                            best = Some(match (best, metric) {
                                (None, _) => v,
                                (Some(b), MetricRef::DisparateImpact) => b.min(v),
                                (Some(b), _) => b.max(v),
                            })
                        }
                        Err(err) => {
                            first_err.get_or_insert(err);
                        }
                    }
                }
                match (best, first_err) {
                    (Some(value), _) => Ok(Some(Evaluation { value, n, group_stats })),
                    (None, Some(err)) if err.is_warm_up() => Ok(None),
                    (None, Some(err)) => Err(err),
                    (None, None) => Ok(None),
                }
            }
            _ if n < e.min_samples || n == 0 => Ok(None),
            (Agg::Sorted(map), _) => match baseline.map(|b| &b.reference) {
                Some(Reference::Numeric { runs, n: n_ref, .. }) => plain(ks_from_sorted_runs(
                    runs.iter().copied(),
                    *n_ref,
                    map.iter().map(|(k, c)| (k.0, *c)),
                    n,
                )?),
                _ => Err(MetricError::EmptySample),
            },
            (Agg::Bins(counts), _) => match baseline.map(|b| &b.reference) {
                Some(Reference::Numeric { psi: Some(Ok(p)), .. }) => plain(p.psi_from_counts(counts, n)?),
                Some(Reference::Numeric { psi: Some(Err(err)), .. }) => Err(err.clone()),
                _ => Err(MetricError::EmptySample),
            },
            (Agg::Categories(counts), _) => match baseline.map(|b| &b.reference) {
                Some(Reference::Categorical(reference)) => plain(jsd_from_counts(reference, counts)?),
                _ => Err(MetricError::EmptySample),
            },
            (Agg::Hits(h), _) => plain(ratio(*h, n)?),
            (Agg::Plain, _) => {
                let sum: f64 = self
                    .entries
                    .iter()
                    .filter_map(|en| match en.obs {
                        Obs::Value(x) => Some(x),
                        _ => None,
                    })
                    .sum();
                plain(sum / n as f64)
            }
        }
    }

    pub fn digest(&self) -> WindowDigest {
        let mut hasher = Sha256::new();
        for e in &self.entries {
            hasher.update(serde_json::to_vec(e).expect("entries serialize"));
            hasher.update(b"\n");
        }
        let hash = hasher.finalize();
        let hex: String = hash.iter().take(8).map(|b| format!("{b:02x}")).collect();
        let values: Vec<f64> = self
            .entries
            .iter()
            .filter_map(|e| match e.obs {
                Obs::Value(x) => Some(x),
                _ => None,
            })
            .collect();
        let (mean, min, max) = if values.is_empty() {
            (None, None, None)
        } else {
            (
                Some(values.iter().sum::<f64>() / values.len() as f64),
                values.iter().copied().reduce(f64::min),
                values.iter().copied().reduce(f64::max),
            )
        };
        WindowDigest {
            n: self.len(),
            first_index: self.entries.front().map(|e| e.index),
            last_index: self.entries.back().map(|e| e.index),
            sha256: hex,
            mean,
            min,
            max,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsml::Millis;

    fn flag_evaluator(window: Window, min: u64) -> Evaluator {
        Evaluator {
            id: "E".into(),
            metric: MetricRef::FlagRate { field: "f".into() },
            scope: "C".into(),
            window,
            min_samples: min,
            sensitive_attributes: Vec::new(),
            baseline: None,
            baseline_dataset: None,
            context: None,
            deployment: None,
        }
    }

    fn hit(index: u64, ts: i64, h: bool) -> Entry {
        Entry { index, ts, obs: Obs::Hit(h) }
    }

    #[test]
    fn count_window_evicts_oldest() {
        let e = flag_evaluator(Window::Count(3), 1);
        let mut w = EvaluatorWindow::new(&e, None);
        for i in 0..5 {
            w.push(e.window, hit(i, i as i64, i < 2), None);
        }
        assert_eq!(w.len(), 3);
        assert_eq!(w.evaluate(&e, None).unwrap().unwrap().value, 0.0);
    }

    #[test]
    fn time_window_uses_event_time() {
        let e = flag_evaluator(Window::Time(Millis(1000)), 1);
        let mut w = EvaluatorWindow::new(&e, None);
        w.push(e.window, hit(0, 0, true), None);
        w.push(e.window, hit(1, 500, false), None);
        assert_eq!(w.len(), 2);
        w.push(e.window, hit(2, 1000, false), None);
        assert_eq!(w.len(), 2);
        assert_eq!(w.evaluate(&e, None).unwrap().unwrap().value, 0.0);
    }

    #[test]
    fn warm_up_below_min_samples() {
        let e = flag_evaluator(Window::Count(10), 3);
        let mut w = EvaluatorWindow::new(&e, None);
        w.push(e.window, hit(0, 0, true), None);
        assert_eq!(w.evaluate(&e, None).unwrap(), None);
    }

    #[test]
    fn fairness_keeps_per_attribute_tallies() {
        let mut e = flag_evaluator(Window::Count(100), 2);
        e.metric = MetricRef::DemographicParity;
        e.sensitive_attributes = vec!["g".into()];
        let mut w = EvaluatorWindow::new(&e, None);
        for (i, (g, p)) in [("a", true), ("a", true), ("b", true), ("b", false)].iter().enumerate() {
            let obs = Obs::Outcome { groups: vec![Some(g.to_string())], positive: *p };
            w.push(e.window, Entry { index: i as u64, ts: 0, obs }, None);
        }
        let ev = w.evaluate(&e, None).unwrap().unwrap();
        assert_eq!(ev.value, 0.5);
        assert_eq!(ev.group_stats["g=b"], GroupStat { n: 2, value: 0.5 });
        let rebuilt = EvaluatorWindow::from_entries(&e, None, w.entries.iter().cloned().collect());
        assert_eq!(rebuilt.agg, w.agg);
    }
}
