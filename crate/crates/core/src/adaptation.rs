//! Violation classification and the MAPE-K loop around the monitored system.
//!
//! The engine is the Monitor and Analyze stages; this module plans and
//! executes adaptations through a [`SystemHandle`], keeping its Knowledge
//! (cooldown clocks, component status, action history) in [`MapeState`].

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::compiler::{AdaptationRule, MonitorSpec};
use crate::dsml::{Action, Threshold};
use crate::engine::{ViolationKind, ViolationRecord};
use crate::metrics::GroupStat;

/// How many recent violations and executed actions the knowledge base keeps.
const HISTORY: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classification {
    Fixable { adaptation: String, action: Action },
    Unfixable { reason: String },
}

impl Classification {
    pub fn unfixable(reason: impl Into<String>) -> Self {
        Classification::Unfixable { reason: reason.into() }
    }

    pub fn is_fixable(&self) -> bool {
        matches!(self, Classification::Fixable { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ActionOutcome {
    Applied { action: Action, target: String, ts: i64 },
    Failed { action: Action, target: String, ts: i64, reason: String },
}

impl ActionOutcome {
    /// `ts action target outcome`
    pub fn audit_line(&self) -> String {
        match self {
            ActionOutcome::Applied { action, target, ts } => format!("{ts} {action} {target} applied"),
            ActionOutcome::Failed {
                action,
                target,
                ts,
                reason,
            } => format!("{ts} {action} {target} failed:{}", reason.replace(' ', "_")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ComponentStatus {
    Running,
    Throttled { factor: f64 },
    Shutdown,
}

/// The system an adaptation acts upon.
pub trait SystemHandle {
    /// Applies `action` to `target` at event time `ts`; `Err` carries the
    /// rejection reason.
    fn apply(&mut self, action: &Action, target: &str, ts: i64) -> Result<(), String>;
}

/// Accepts every action without effect; used when monitoring a live stream
/// the tool cannot control.
#[derive(Debug, Default)]
pub struct DryRunHandle {
    pub applied: Vec<(i64, Action, String)>,
}

impl SystemHandle for DryRunHandle {
    fn apply(&mut self, action: &Action, target: &str, ts: i64) -> Result<(), String> {
        self.applied.push((ts, action.clone(), target.to_string()));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutedAction {
    pub ts: i64,
    pub adaptation: String,
    pub outcome: ActionOutcome,
}

/// Knowledge shared by the loop's stages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MapeState {
    /// Rule ids of recent violations, oldest first.
    pub recent: VecDeque<String>,
    pub executed: VecDeque<ExecutedAction>,
    /// Event time each adaptation rule last fired.
    pub last_fired: BTreeMap<String, i64>,
    pub components: BTreeMap<String, ComponentStatus>,
}

impl MapeState {
    pub fn status(&self, component: &str) -> ComponentStatus {
        self.components
            .get(component)
            .copied()
            .unwrap_or(ComponentStatus::Running)
    }

    pub fn is_shutdown(&self, component: &str) -> bool {
        self.status(component) == ComponentStatus::Shutdown
    }
}

/// Context-model fields that help diagnose why a requirement is violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDiagnosis {
    pub component: String,
    pub context: Option<String>,
    pub deployment: Option<String>,
    pub baseline_dataset: Option<String>,
    pub sensitive_attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub ts: i64,
    pub event_index: u64,
    pub rule: String,
    pub techreq: String,
    pub reason: String,
    pub metric: String,
    pub value: Option<f64>,
    pub threshold: Threshold,
    pub hcr_chain: Vec<String>,
    pub group_stats: BTreeMap<String, GroupStat>,
    pub diagnosis: ContextDiagnosis,
    pub explanation: String,
    pub target: String,
}

/// What the loop did about one violation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reaction {
    pub outcome: Option<ActionOutcome>,
    pub alert: Option<AlertRecord>,
    /// Component taken down by this reaction; the engine stops routing it.
    pub shutdown: Option<String>,
}

pub struct Mape {
    spec: Arc<MonitorSpec>,
    pub state: MapeState,
    /// Where alerts are delivered; recorded on every alert.
    pub alert_target: String,
}

impl Mape {
    pub fn new(spec: Arc<MonitorSpec>) -> Self {
        Self {
            spec,
            state: MapeState::default(),
            alert_target: "alerts".to_string(),
        }
    }

    fn target_of(action: &Action, v: &ViolationRecord) -> String {
        action
            .target_component()
            .map_or_else(|| v.component.clone(), str::to_string)
    }

    fn select(&self, v: &ViolationRecord) -> Result<&AdaptationRule, String> {
        if v.kind == ViolationKind::EvaluatorError {
            return Err("evaluator error".into());
        }
        let mut reason = "no rule".to_string();
        for rule in self.spec.adaptation_rules.iter().filter(|a| a.on == v.rule) {
            if self.state.is_shutdown(&Self::target_of(&rule.action, v)) {
                reason = "component shutdown".into();
                continue;
            }
            if let Some(&last) = self.state.last_fired.get(&rule.id) {
                if v.ts - last < rule.cooldown.0 as i64 {
                    reason = "cooldown".into();
                    continue;
                }
            }
            if rule.action == Action::Notify {
                return Err("notify".into());
            }
            return Ok(rule);
        }
        Err(reason)
    }

    /// First declared adaptation rule for the violated rule that is out of
    /// cooldown and whose target is up; otherwise the reason it is unfixable.
    pub fn classify(&self, v: &ViolationRecord) -> Classification {
        match self.select(v) {
            Ok(rule) => Classification::Fixable {
                adaptation: rule.id.clone(),
                action: rule.action.clone(),
            },
            Err(reason) => Classification::Unfixable { reason },
        }
    }

    /// Executes a fixable classification against the system and records the
    /// outcome. Returns `None` for unfixable classifications.
    pub fn plan_and_execute(
        &mut self,
        classification: &Classification,
        v: &ViolationRecord,
        handle: &mut dyn SystemHandle,
    ) -> Option<ActionOutcome> {
        let Classification::Fixable { adaptation, action } = classification else {
            return None;
        };
        let target = Self::target_of(action, v);
        let result = if self.state.is_shutdown(&target) {
            Err("component shutdown".to_string())
        } else {
            handle.apply(action, &target, v.ts)
        };
        let outcome = match result {
            Ok(()) => {
                match action {
                    Action::Shutdown { .. } => {
                        self.state.components.insert(target.clone(), ComponentStatus::Shutdown);
                    }
                    Action::Throttle { factor, .. } => {
                        let prev = match self.state.status(&target) {
                            ComponentStatus::Throttled { factor } => factor,
                            _ => 1.0,
                        };
                        self.state
                            .components
                            .insert(target.clone(), ComponentStatus::Throttled { factor: prev * factor });
                    }
                    _ => {}
                }
                ActionOutcome::Applied {
                    action: action.clone(),
                    target,
                    ts: v.ts,
                }
            }
            Err(reason) => ActionOutcome::Failed {
                action: action.clone(),
                target,
                ts: v.ts,
                reason,
            },
        };
        self.state.last_fired.insert(adaptation.clone(), v.ts);
        self.state.executed.push_back(ExecutedAction {
            ts: v.ts,
            adaptation: adaptation.clone(),
            outcome: outcome.clone(),
        });
        if self.state.executed.len() > HISTORY {
            self.state.executed.pop_front();
        }
        Some(outcome)
    }

    /// Builds the developer alert for a violation the loop could not fix.
    pub fn alert(&self, v: &ViolationRecord, reason: &str) -> AlertRecord {
        let evaluator = self.spec.evaluator(&v.techreq);
        let diagnosis = ContextDiagnosis {
            component: v.component.clone(),
            context: evaluator.and_then(|e| e.context.clone()),
            deployment: evaluator.and_then(|e| e.deployment.clone()),
            baseline_dataset: evaluator.and_then(|e| e.baseline_dataset.clone()),
            sensitive_attributes: evaluator.map(|e| e.sensitive_attributes.clone()).unwrap_or_default(),
        };
        let mut text = String::new();
        match (v.value, &v.error) {
            (Some(x), _) => {
                let _ = write!(text, "{} = {x:.4} violates {} on {}", v.metric, v.threshold, v.component);
            }
            (None, Some(err)) => {
                let _ = write!(text, "{} on {} could not be evaluated: {err}", v.metric, v.component);
            }
            (None, None) => {
                let _ = write!(text, "{} on {} failed", v.metric, v.component);
            }
        }
        let _ = write!(text, "; requirements: {}", v.hcr_chain.join(" > "));
        if let Some(ctx) = &diagnosis.context {
            let _ = write!(text, "; context {ctx}");
            if let Some(d) = &diagnosis.deployment {
                let _ = write!(text, " (deployment: {d})");
            }
        }
        if let Some(b) = &diagnosis.baseline_dataset {
            let _ = write!(text, "; baseline dataset {b}");
        }
        if !v.evidence.group_stats.is_empty() {
            text.push_str("; groups:");
            for (g, s) in &v.evidence.group_stats {
                let _ = write!(text, " {g} rate {:.4} (n={})", s.value, s.n);
            }
        }
        let _ = write!(text, "; reason: {reason}");
        AlertRecord {
            ts: v.ts,
            event_index: v.event_index,
            rule: v.rule.clone(),
            techreq: v.techreq.clone(),
            reason: reason.to_string(),
            metric: v.metric.clone(),
            value: v.value,
            threshold: v.threshold,
            hcr_chain: v.hcr_chain.clone(),
            group_stats: v.evidence.group_stats.clone(),
            diagnosis,
            explanation: text,
            target: self.alert_target.clone(),
        }
    }

    /// Runs one loop iteration for a violation: classify, then either act
    /// or alert. Fills the record's classification and outcome. A failed
    /// action is alerted as well.
    pub fn react(&mut self, v: &mut ViolationRecord, handle: &mut dyn SystemHandle) -> Reaction {
        self.state.recent.push_back(v.rule.clone());
        if self.state.recent.len() > HISTORY {
            self.state.recent.pop_front();
        }
        let classification = self.classify(v);
        let mut reaction = Reaction::default();
        match &classification {
            Classification::Unfixable { reason } => {
                reaction.alert = Some(self.alert(v, reason));
            }
            Classification::Fixable { action, .. } => {
                let outcome = self
                    .plan_and_execute(&classification, v, handle)
                    .expect("fixable classifications produce an outcome");
                match &outcome {
                    ActionOutcome::Failed { reason, .. } => {
                        reaction.alert = Some(self.alert(v, &format!("action failed: {reason}")));
                    }
                    ActionOutcome::Applied { target, .. } => {
                        if matches!(action, Action::Shutdown { .. }) {
                            reaction.shutdown = Some(target.clone());
                        }
                    }
                }
                reaction.outcome = Some(outcome);
            }
        }
        v.classification = Some(classification);
        v.action_outcome = reaction.outcome.clone();
        reaction
    }
}
