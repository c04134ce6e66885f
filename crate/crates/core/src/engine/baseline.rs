//! Reference samples for drift evaluators, extracted from baseline event files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::event::{EventKind, ObservationEvent};
use super::EngineError;
use crate::compiler::{Evaluator, MonitorSpec};
use crate::metrics::{CategoryCounts, MetricError, MetricRef, PsiBaseline};

/// What an evaluator compares its window against.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Numeric {
        /// Ascending `(value, count)` runs.
        runs: Vec<(f64, u64)>,
        n: u64,
        /// Binning for PSI evaluators; an error here surfaces as an
        /// evaluator error at run time.
        psi: Option<Result<PsiBaseline, MetricError>>,
    },
    Categorical(CategoryCounts),
}

/// Compact description of a reference sample, attached to violation evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub path: String,
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub categories: BTreeMap<String, u64>,
}

#[derive(Debug, Clone)]
pub struct BaselineData {
    pub reference: Reference,
    pub summary: BaselineSummary,
}

/// Reference samples keyed by evaluator id.
#[derive(Debug, Clone, Default)]
pub struct Baselines {
    map: BTreeMap<String, Arc<BaselineData>>,
}

impl Baselines {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn get(&self, evaluator: &str) -> Option<&Arc<BaselineData>> {
        self.map.get(evaluator)
    }

    pub fn insert(&mut self, evaluator: impl Into<String>, data: BaselineData) {
        self.map.insert(evaluator.into(), Arc::new(data));
    }

    /// Builds the reference of every drift evaluator from in-memory events,
    /// looked up by the evaluator's baseline path.
    pub fn from_events<F>(spec: &MonitorSpec, mut events_for: F) -> Result<Self, EngineError>
    where
        F: FnMut(&str) -> Result<Arc<Vec<ObservationEvent>>, EngineError>,
    {
        let mut out = Baselines::none();
        for e in spec.evaluators.iter().filter(|e| e.metric.needs_baseline()) {
            let path = e
                .baseline
                .as_deref()
                .ok_or_else(|| EngineError::Baseline(format!("evaluator `{}` has no baseline", e.id)))?;
            let events = events_for(path)?;
            out.insert(e.id.clone(), extract(e, path, &events)?);
        }
        Ok(out)
    }

    /// Reads baseline event files relative to `dir` (the plan's directory).
    pub fn load(spec: &MonitorSpec, dir: &Path) -> Result<Self, EngineError> {
        let mut cache: BTreeMap<String, Arc<Vec<ObservationEvent>>> = BTreeMap::new();
        Self::from_events(spec, |path| {
            if let Some(ev) = cache.get(path) {
                return Ok(ev.clone());
            }
            let full = dir.join(path);
            let text = fs::read_to_string(&full)
                .map_err(|e| EngineError::Baseline(format!("cannot read baseline {}: {e}", full.display())))?;
            let events = text
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    ObservationEvent::parse_line(l).map_err(|e| {
                        EngineError::Baseline(format!("{}:{}: {e}", full.display(), i + 1))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let events = Arc::new(events);
            cache.insert(path.to_string(), events.clone());
            Ok(events)
        })
    }
}

fn extract(e: &Evaluator, path: &str, events: &[ObservationEvent]) -> Result<BaselineData, EngineError> {
    let mine = events.iter().filter(|ev| ev.component == e.scope);
    let empty = || {
        EngineError::Baseline(format!(
            "baseline {path} has no usable values for evaluator `{}` on `{}`",
            e.id, e.scope
        ))
    };
    let mut summary = BaselineSummary {
        dataset: e.baseline_dataset.clone(),
        path: path.to_string(),
        n: 0,
        mean: None,
        min: None,
        max: None,
        categories: BTreeMap::new(),
    };
    let reference = match &e.metric {
        MetricRef::KsDrift { field } | MetricRef::PsiDrift { field, .. } => {
            let mut values: Vec<f64> = mine
                .filter(|ev| ev.kind != EventKind::Feedback)
                .filter_map(|ev| ev.field(field).and_then(|v| v.as_f64()))
                .collect();
            if values.is_empty() {
                return Err(empty());
            }
            values.sort_by(f64::total_cmp);
            let n = values.len() as u64;
            summary.n = n;
            summary.mean = Some(values.iter().sum::<f64>() / n as f64);
            summary.min = values.first().copied();
            summary.max = values.last().copied();
            let psi = match &e.metric {
                MetricRef::PsiDrift { bins, .. } => Some(PsiBaseline::from_reference(&values, *bins)),
                _ => None,
            };
            let mut runs: Vec<(f64, u64)> = Vec::new();
            for v in values {
                match runs.last_mut() {
                    Some((x, c)) if *x == v => *c += 1,
                    _ => runs.push((v, 1)),
                }
            }
            Reference::Numeric { runs, n, psi }
        }
        MetricRef::PredictionDrift => {
            let mut counts = CategoryCounts::new();
            for ev in mine.filter(|ev| ev.kind == EventKind::Prediction) {
                if let Some(p) = &ev.prediction {
                    *counts.entry(p.category()).or_default() += 1;
                }
            }
            if counts.is_empty() {
                return Err(empty());
            }
            summary.n = counts.values().sum();
            summary.categories = counts.clone();
            Reference::Categorical(counts)
        }
        other => {
            return Err(EngineError::Baseline(format!(
                "metric {other} does not use a baseline"
            )))
        }
    };
    Ok(BaselineData { reference, summary })
}
