//! Runtime state kept in sync with the observed system, and the evaluation
//! schedule over it.
//!
//! A [`Monitor`] interprets a [`MonitorSpec`]: each event is routed to the
//! evaluators whose probe matches its component and kind, their windows are
//! advanced, and only the evaluators that received data are re-evaluated.
//! A rule emits a [`ViolationRecord`] when its evaluator violates the
//! threshold for `hysteresis` consecutive evaluations while the rule was
//! satisfied, and not again until a recovery.

mod baseline;
mod event;
mod run;
mod window;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptation::{ActionOutcome, Classification};
use crate::compiler::{Evaluator, MonitorSpec};
use crate::dsml::{Severity, Threshold, Window};
use crate::metrics::{GroupStat, MetricFamily, MetricRef, MetricResult, StreamPoint};
use crate::par::{map_ordered, ExecutionMode};

pub use baseline::{BaselineData, BaselineSummary, Baselines, Reference};
pub use event::{EventKind, FieldValue, ObservationEvent};
pub use run::{run_stream, Pipeline, RunSummary, Sinks, Step};
pub use window::{Entry, Evaluation, Obs, WindowDigest};
use window::EvaluatorWindow;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("baseline error: {0}")]
    Baseline(String),
    #[error("snapshot error: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    /// Consecutive violating evaluations required before a violation is emitted.
    pub hysteresis: u32,
    /// Predictions awaiting feedback are kept FIFO up to this many.
    pub pending_capacity: usize,
    pub mode: ExecutionMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            hysteresis: 3,
            pending_capacity: 10_000,
            mode: ExecutionMode::Sequential,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub ingested: u64,
    pub routed: u64,
    pub dropped: u64,
    pub malformed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RuleState {
    Satisfied,
    Violated { since: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleStatus {
    pub rule: String,
    #[serde(flatten)]
    pub state: RuleState,
    /// Consecutive violating evaluations so far.
    pub streak: u32,
    pub last_value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Threshold,
    EvaluatorError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub group_stats: BTreeMap<String, GroupStat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSummary>,
    pub window: WindowDigest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub ts: i64,
    pub event_index: u64,
    pub monitor_id: String,
    pub rule: String,
    pub techreq: String,
    pub component: String,
    pub hcr_chain: Vec<String>,
    pub severity: Severity,
    pub metric: String,
    pub family: MetricFamily,
    pub kind: ViolationKind,
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub threshold: Threshold,
    pub window: Window,
    pub evidence: Evidence,
    pub classification: Option<Classification>,
    pub action_outcome: Option<ActionOutcome>,
}

impl ViolationRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

/// What one event produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub results: Vec<MetricResult>,
    pub violations: Vec<ViolationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingPrediction {
    pub component: String,
    pub ref_id: String,
    pub prediction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowState {
    pub evaluator: String,
    pub n: u64,
    pub entries: Vec<Entry>,
}

/// The runtime model: everything needed to resume monitoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub monitor_id: String,
    /// Index the next ingested event will get.
    pub index: u64,
    pub counters: Counters,
    pub rules: Vec<RuleStatus>,
    pub windows: Vec<WindowState>,
    pub pending: Vec<PendingPrediction>,
    pub shutdown: Vec<String>,
}

pub struct Monitor {
    spec: Arc<MonitorSpec>,
    config: EngineConfig,
    baselines: Vec<Option<Arc<BaselineData>>>,
    /// Component to evaluator indices, per event kind.
    routes: HashMap<String, [Vec<usize>; 3]>,
    /// Evaluator index to its rule indices.
    rules_of: Vec<Vec<usize>>,
    /// Components that feed an accuracy evaluator.
    tracks_feedback: BTreeSet<String>,
    windows: Vec<EvaluatorWindow>,
    rules: Vec<RuleStatus>,
    counters: Counters,
    pending: HashMap<(String, String), String>,
    pending_order: VecDeque<(String, String)>,
    shutdown: BTreeSet<String>,
    warned: BTreeSet<String>,
}

fn kind_slot(kind: EventKind) -> usize {
    match kind {
        EventKind::Prediction => 0,
        EventKind::Feedback => 1,
        EventKind::Signal => 2,
    }
}

impl Monitor {
    pub fn new(spec: Arc<MonitorSpec>, baselines: &Baselines, config: EngineConfig) -> Self {
        let mut routes: HashMap<String, [Vec<usize>; 3]> = HashMap::new();
        let mut tracks_feedback = BTreeSet::new();
        for (i, e) in spec.evaluators.iter().enumerate() {
            let Some(probe) = spec.probe(&e.scope) else { continue };
            let slots = routes.entry(e.scope.clone()).or_default();
            for &k in e.metric.event_kinds() {
                if probe.event_kinds.contains(&k) {
                    slots[kind_slot(k)].push(i);
                }
            }
            if e.metric == MetricRef::Accuracy {
                tracks_feedback.insert(e.scope.clone());
            }
        }
        let rules_of = spec
            .evaluators
            .iter()
            .map(|e| {
                spec.rules
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.evaluator == e.id)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        let baselines: Vec<Option<Arc<BaselineData>>> =
            spec.evaluators.iter().map(|e| baselines.get(&e.id).cloned()).collect();
        let windows = spec
            .evaluators
            .iter()
            .zip(&baselines)
            .map(|(e, b)| EvaluatorWindow::new(e, b.as_deref()))
            .collect();
        let rules = spec
            .rules
            .iter()
            .map(|r| RuleStatus {
                rule: r.id.clone(),
                state: RuleState::Satisfied,
                streak: 0,
                last_value: None,
            })
            .collect();
        Self {
            spec,
            config,
            baselines,
            routes,
            rules_of,
            tracks_feedback,
            windows,
            rules,
            counters: Counters::default(),
            pending: HashMap::new(),
            pending_order: VecDeque::new(),
            shutdown: BTreeSet::new(),
            warned: BTreeSet::new(),
        }
    }

    pub fn spec(&self) -> &Arc<MonitorSpec> {
        &self.spec
    }

    pub fn config(&self) -> EngineConfig {
        self.config
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn rule_statuses(&self) -> &[RuleStatus] {
        &self.rules
    }

    /// Number of entries in the window of evaluator `id`.
    pub fn window_len(&self, id: &str) -> Option<u64> {
        let i = self.spec.evaluators.iter().position(|e| e.id == id)?;
        Some(self.windows[i].len())
    }

    /// Total retained observations; bounded by the window sizes plus the
    /// pending-feedback capacity.
    pub fn retained(&self) -> usize {
        self.windows.iter().map(|w| w.entries.len()).sum::<usize>() + self.pending.len()
    }

    /// Stops routing events of `component`.
    pub fn shutdown_component(&mut self, component: &str) {
        self.shutdown.insert(component.to_string());
    }

    fn warn_once(&mut self, key: String, msg: &str) {
        if self.warned.insert(key) {
            log::warn!("{msg}");
        }
    }

    /// Parses and processes one wire line. Unparseable lines count as malformed.
    pub fn process_line(&mut self, line: &str) -> StepOutput {
        match ObservationEvent::parse_line(line) {
            Ok(ev) => self.process(&ev),
            Err(err) => {
                self.counters.ingested += 1;
                self.counters.malformed += 1;
                log::debug!("malformed event at index {}: {err}", self.counters.ingested - 1);
                self.warn_once("malformed".into(), &format!("dropping malformed event: {err}"));
                StepOutput::default()
            }
        }
    }

    /// Ingests one event and evaluates every evaluator it fed.
    pub fn process(&mut self, ev: &ObservationEvent) -> StepOutput {
        let index = self.counters.ingested;
        self.counters.ingested += 1;
        if let Err(err) = ev.check() {
            self.counters.malformed += 1;
            self.warn_once("malformed".into(), &format!("dropping malformed event: {err}"));
            return StepOutput::default();
        }
        let dirty = self.ingest(ev, index);
        if dirty.is_empty() {
            return StepOutput::default();
        }
        self.evaluate(&dirty, index, ev.ts)
    }

    /// Routes the event into windows; returns the indices of evaluators
    /// whose window changed.
    fn ingest(&mut self, ev: &ObservationEvent, index: u64) -> Vec<usize> {
        if self.shutdown.contains(&ev.component) {
            self.counters.dropped += 1;
            return Vec::new();
        }
        let Some(slots) = self.routes.get(&ev.component) else {
            self.counters.dropped += 1;
            self.warn_once(
                format!("component:{}", ev.component),
                &format!("dropping events of unmonitored component `{}`", ev.component),
            );
            return Vec::new();
        };
        let targets = slots[kind_slot(ev.kind)].clone();
        if targets.is_empty() {
            self.counters.dropped += 1;
            return Vec::new();
        }
        self.counters.routed += 1;

        let feedback_hit = self.match_feedback(ev);
        let mut dirty = Vec::new();
        for i in targets {
            let e = &self.spec.evaluators[i];
            if let Some(obs) = observe(e, ev, feedback_hit) {
                let entry = Entry { index, ts: ev.ts, obs };
                self.windows[i].push(e.window, entry, self.baselines[i].as_deref());
                dirty.push(i);
            }
        }
        dirty
    }

    /// Tracks predictions awaiting feedback and resolves feedback against
    /// them. Returns whether the feedback's label matched the prediction.
    fn match_feedback(&mut self, ev: &ObservationEvent) -> Option<bool> {
        if !self.tracks_feedback.contains(&ev.component) {
            return None;
        }
        let ref_id = ev.ref_id.as_ref()?;
        let key = (ev.component.clone(), ref_id.clone());
        match ev.kind {
            EventKind::Prediction => {
                let prediction = ev.prediction.as_ref()?.category();
                if self.pending.insert(key.clone(), prediction).is_none() {
                    self.pending_order.push_back(key);
                }
                while self.pending.len() > self.config.pending_capacity {
                    if let Some(old) = self.pending_order.pop_front() {
                        self.pending.remove(&old);
                    }
                }
                None
            }
            EventKind::Feedback => {
                let prediction = self.pending.remove(&key)?;
                self.pending_order.retain(|k| k != &key);
                Some(prediction == ev.label.as_ref()?.category())
            }
            EventKind::Signal => None,
        }
    }

    fn evaluate(&mut self, dirty: &[usize], index: u64, ts: i64) -> StepOutput {
        let spec = &self.spec;
        let windows = &self.windows;
        let baselines = &self.baselines;
        let evaluations = map_ordered(self.config.mode, dirty, |&i| {
            windows[i].evaluate(&spec.evaluators[i], baselines[i].as_deref())
        });
        let mut out = StepOutput::default();
        let hysteresis = self.config.hysteresis.max(1);
        for (&i, evaluation) in dirty.iter().zip(evaluations) {
            let e = &self.spec.evaluators[i];
            match evaluation {
                Ok(None) => {}
                Ok(Some(ev)) => {
                    for &r in &self.rules_of[i] {
                        let rule = &self.spec.rules[r];
                        let status = &mut self.rules[r];
                        status.last_value = Some(ev.value);
                        if rule.threshold.is_satisfied(ev.value) {
                            status.streak = 0;
                            if let RuleState::Violated { since } = status.state {
                                log::info!(
                                    "rule {} recovered at event {index} (violated since {since}, value {})",
                                    rule.id,
                                    ev.value
                                );
                                status.state = RuleState::Satisfied;
                            }
                        } else {
                            status.streak += 1;
                            if status.state == RuleState::Satisfied && status.streak >= hysteresis {
                                status.state = RuleState::Violated { since: index };
                                out.violations.push(self.record(
                                    r,
                                    i,
                                    index,
                                    ts,
                                    Ok(&ev),
                                ));
                            }
                        }
                    }
                    out.results.push(MetricResult {
                        evaluator: e.id.clone(),
                        metric: e.metric.to_string(),
                        value: ev.value,
                        n: ev.n,
                        group_stats: ev.group_stats,
                        computed_at: StreamPoint { index, ts },
                    });
                }
                Err(err) => {
                    for &r in &self.rules_of[i] {
                        let status = &mut self.rules[r];
                        status.last_value = None;
                        status.streak = 0;
                        if status.state == RuleState::Satisfied {
                            status.state = RuleState::Violated { since: index };
                            log::warn!("evaluator {} failed: {err}", e.id);
                            out.violations.push(self.record(r, i, index, ts, Err(err.to_string())));
                        }
                    }
                }
            }
        }
        out
    }

    fn record(
        &self,
        r: usize,
        i: usize,
        index: u64,
        ts: i64,
        evaluation: Result<&Evaluation, String>,
    ) -> ViolationRecord {
        let rule = &self.spec.rules[r];
        let e: &Evaluator = &self.spec.evaluators[i];
        let (kind, value, error, group_stats) = match evaluation {
            Ok(ev) => (ViolationKind::Threshold, Some(ev.value), None, ev.group_stats.clone()),
            Err(msg) => (ViolationKind::EvaluatorError, None, Some(msg), BTreeMap::new()),
        };
        ViolationRecord {
            ts,
            event_index: index,
            monitor_id: self.spec.monitor_id.clone(),
            rule: rule.id.clone(),
            techreq: e.id.clone(),
            component: e.scope.clone(),
            hcr_chain: rule.hcr_chain.clone(),
            severity: rule.severity,
            metric: e.metric.to_string(),
            family: e.metric.family(),
            kind,
            value,
            error,
            threshold: rule.threshold,
            window: e.window,
            evidence: Evidence {
                group_stats,
                baseline: self.baselines[i].as_ref().map(|b| b.summary.clone()),
                window: self.windows[i].digest(),
            },
            classification: None,
            action_outcome: None,
        }
    }

    pub fn to_snapshot(&self) -> Snapshot {
        Snapshot {
            monitor_id: self.spec.monitor_id.clone(),
            index: self.counters.ingested,
            counters: self.counters,
            rules: self.rules.clone(),
            windows: self
                .spec
                .evaluators
                .iter()
                .zip(&self.windows)
                .map(|(e, w)| WindowState {
                    evaluator: e.id.clone(),
                    n: w.len(),
                    entries: w.entries.iter().cloned().collect(),
                })
                .collect(),
            pending: self
                .pending_order
                .iter()
                .map(|(c, r)| PendingPrediction {
                    component: c.clone(),
                    ref_id: r.clone(),
                    prediction: self.pending[&(c.clone(), r.clone())].clone(),
                })
                .collect(),
            shutdown: self.shutdown.iter().cloned().collect(),
        }
    }

    /// The runtime model as a JSON document.
    pub fn snapshot(&self) -> String {
        serde_json::to_string_pretty(&self.to_snapshot()).expect("snapshots serialize")
    }

    /// Rebuilds a monitor from a snapshot taken with the same spec.
    pub fn restore(
        spec: Arc<MonitorSpec>,
        baselines: &Baselines,
        config: EngineConfig,
        snapshot: &str,
    ) -> Result<Self, EngineError> {
        let snap: Snapshot =
            serde_json::from_str(snapshot).map_err(|e| EngineError::Snapshot(e.to_string()))?;
        let mut m = Monitor::new(spec, baselines, config);
        if snap.monitor_id != m.spec.monitor_id {
            return Err(EngineError::Snapshot(format!(
                "snapshot of monitor `{}` cannot restore `{}`",
                snap.monitor_id, m.spec.monitor_id
            )));
        }
        let rule_ids: Vec<&str> = m.spec.rules.iter().map(|r| r.id.as_str()).collect();
        let snap_rules: Vec<&str> = snap.rules.iter().map(|r| r.rule.as_str()).collect();
        let snap_windows: Vec<&str> = snap.windows.iter().map(|w| w.evaluator.as_str()).collect();
        let eval_ids: Vec<&str> = m.spec.evaluators.iter().map(|e| e.id.as_str()).collect();
        if rule_ids != snap_rules || eval_ids != snap_windows {
            return Err(EngineError::Snapshot("snapshot does not match the plan".into()));
        }
        m.counters = snap.counters;
        m.rules = snap.rules;
        for (i, w) in snap.windows.into_iter().enumerate() {
            m.windows[i] =
                EvaluatorWindow::from_entries(&m.spec.evaluators[i], m.baselines[i].as_deref(), w.entries);
        }
        for p in snap.pending {
            let key = (p.component, p.ref_id);
            m.pending.insert(key.clone(), p.prediction);
            m.pending_order.push_back(key);
        }
        m.shutdown = snap.shutdown.into_iter().collect();
        Ok(m)
    }
}

/// What evaluator `e` records from event `ev`, if anything.
fn observe(e: &Evaluator, ev: &ObservationEvent, feedback_hit: Option<bool>) -> Option<Obs> {
    let number = |field: &str| ev.field(field).and_then(|v| v.as_f64());
    match &e.metric {
        MetricRef::DemographicParity | MetricRef::DisparateImpact => {
            let prediction = ev.prediction.as_ref()?;
            let groups: Vec<Option<String>> = e
                .sensitive_attributes
                .iter()
                .map(|a| ev.features.get(a).map(FieldValue::category))
                .collect();
            groups.iter().any(Option::is_some).then(|| Obs::Outcome {
                groups,
                positive: prediction.is_positive(),
            })
        }
        MetricRef::KsDrift { field } | MetricRef::PsiDrift { field, .. } => number(field).map(Obs::Value),
        MetricRef::PredictionDrift => ev.prediction.as_ref().map(|p| Obs::Category(p.category())),
        MetricRef::Accuracy => match ev.kind {
            EventKind::Feedback => feedback_hit.map(Obs::Hit),
            _ => None,
        },
        MetricRef::MeanConfidence => ev.confidence.map(Obs::Value),
        MetricRef::RangeRate { field, low, high } => {
            number(field).map(|x| Obs::Hit(x < *low || x > *high))
        }
        MetricRef::FlagRate { field } => match ev.field(field)? {
            FieldValue::Bool(b) => Some(Obs::Hit(b)),
            FieldValue::Num(x) => Some(Obs::Hit(x != 0.0)),
            FieldValue::Text(_) => None,
        },
    }
}
