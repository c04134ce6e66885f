//! Simulated drone-delivery system with injectable mutations, closed-loop
//! runs against a monitor, and detection scoring.

mod generator;
mod scenario;
mod scoring;

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptation::AlertRecord;
use crate::compiler::MonitorSpec;
use crate::engine::{Baselines, EngineConfig, Monitor, ObservationEvent, Pipeline, RunSummary, ViolationRecord};
use crate::metrics::MetricFamily;
use crate::par::{map_ordered, ExecutionMode};

pub use generator::{check_setup, generate, GroundTruth, Simulator, TruthInterval, LEAK_SIGNAL};
pub use scenario::{
    parse_scenario, ClassSpec, ComponentSpec, Effect, GroupSpec, Mutation, NormalSpec, ScenarioConfig, ScenarioFile,
};
pub use scoring::{score_detection, Detection, DetectionScore, IntervalScore};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Everything a closed-loop run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub truth: GroundTruth,
    pub violations: Vec<ViolationRecord>,
    pub alerts: Vec<AlertRecord>,
    /// Audit lines of executed adaptations.
    pub audit: Vec<String>,
    pub summary: RunSummary,
    /// The generated stream, when requested.
    pub events: Option<Vec<ObservationEvent>>,
}

impl RunOutcome {
    pub fn detections(&self) -> Vec<Detection> {
        self.violations
            .iter()
            .map(|v| Detection {
                event_index: v.event_index,
                family: v.family,
            })
            .collect()
    }

    pub fn score(&self, grace: u64) -> DetectionScore {
        score_detection(&self.detections(), &self.truth, grace)
    }
}

/// Simulates the scenario and feeds every event through a fresh monitor,
/// applying its adaptations back onto the simulator as they happen.
pub fn run_closed_loop(
    spec: Arc<MonitorSpec>,
    baselines: &Baselines,
    engine: EngineConfig,
    config: &ScenarioConfig,
    mutations: &[Mutation],
    keep_events: bool,
) -> Result<RunOutcome, HarnessError> {
    let mut sim = Simulator::new(config, mutations)?;
    let mut pipeline = Pipeline::new(Monitor::new(spec, baselines, engine));
    let mut out = RunOutcome {
        truth: sim.truth(),
        violations: Vec::new(),
        alerts: Vec::new(),
        audit: Vec::new(),
        summary: RunSummary::default(),
        events: keep_events.then(Vec::new),
    };
    while let Some(ev) = sim.next_event() {
        let step = pipeline.feed(&ev, &mut sim);
        out.violations.extend(step.violations);
        out.alerts.extend(step.alerts);
        out.audit.extend(step.audit);
        if let Some(events) = out.events.as_mut() {
            events.push(ev);
        }
    }
    out.summary = pipeline.summary();
    Ok(out)
}

/// One evaluated case: the unmutated baseline or a single mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub case: String,
    pub mutation: Option<String>,
    pub family: Option<MetricFamily>,
    pub events: u64,
    pub violations: u64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub latency: Option<u64>,
    pub adaptations: u64,
    pub alerts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scenario: String,
    pub seed: u64,
    pub n_events: u64,
    pub grace: u64,
    pub rows: Vec<ReportRow>,
}

impl EvaluationReport {
    /// Fixed-column text table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario {} seed {} events {} grace {}",
            self.scenario, self.seed, self.n_events, self.grace
        );
        let _ = writeln!(
            out,
            "{:<20} {:<36} {:>8} {:>6} {:>6} {:>6} {:>9} {:>7} {:>8} {:>6} {:>6}",
            "case", "mutation", "events", "viol", "tp", "fp", "precision", "recall", "latency", "adapt", "alerts"
        );
        let ratio = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<20} {:<36} {:>8} {:>6} {:>6} {:>6} {:>9} {:>7} {:>8} {:>6} {:>6}",
                r.case,
                r.mutation.as_deref().unwrap_or("-"),
                r.events,
                r.violations,
                r.true_positives,
                r.false_positives,
                ratio(r.precision),
                ratio(r.recall),
                r.latency.map_or("-".to_string(), |l| l.to_string()),
                r.adaptations,
                r.alerts
            );
        }
        out
    }

    /// Machine-readable form: a header record, then one record per row.
    pub fn to_lines(&self) -> String {
        let header = EvaluationReport {
            rows: Vec::new(),
            ..self.clone()
        };
        let mut out = serde_json::to_string(&header).expect("report serializes");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r).expect("report serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty()).enumerate();
        let (_, first) = lines.next().ok_or("empty report")?;
        let mut report: EvaluationReport =
            serde_json::from_str(first).map_err(|e| format!("line 1: invalid report header: {e}"))?;
        for (i, line) in lines {
            report
                .rows
                .push(serde_json::from_str(line).map_err(|e| format!("line {}: invalid report row: {e}", i + 1))?);
        }
        Ok(report)
    }
}

/// Runs the unmutated baseline and each mutation on its own, scoring every
/// run against its ground truth. Cases run concurrently in parallel mode.
pub fn evaluate(
    spec: Arc<MonitorSpec>,
    baselines: &Baselines,
    engine: EngineConfig,
    config: &ScenarioConfig,
    mutations: &[Mutation],
    mode: ExecutionMode,
) -> Result<EvaluationReport, HarnessError> {
    check_setup(config, mutations)?;
    let cases: Vec<Option<&Mutation>> = std::iter::once(None).chain(mutations.iter().map(Some)).collect();
    let rows = map_ordered(mode, &cases, |case| -> Result<ReportRow, HarnessError> {
        let muts: Vec<Mutation> = case.iter().map(|m| (*m).clone()).collect();
        let run = run_closed_loop(spec.clone(), baselines, engine, config, &muts, false)?;
        let score = run.score(config.grace);
        Ok(ReportRow {
            case: case.map_or("baseline".to_string(), |m| m.name.clone()),
            mutation: case.map(Mutation::spec_string),
            family: case.map(|m| m.effect.family()),
            events: run.summary.events,
            violations: score.violations,
            true_positives: score.true_positives,
            false_positives: score.false_positives,
            precision: score.precision,
            recall: score.recall,
            latency: score.latency,
            adaptations: run.summary.adaptations,
            alerts: run.summary.alerts,
        })
    });
    Ok(EvaluationReport {
        scenario: config.name.clone(),
        seed: config.seed,
        n_events: config.n_events,
        grace: config.grace,
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}
