//! Model-to-model transformation from a woven model to a [`MonitorSpec`],
//! and model-to-text emission of the interpreted monitor plan.

mod plan;

use std::collections::BTreeMap;

use crate::diag::{Diagnostic, Location};
use crate::dsml::{Action, Millis, ModelKind, Severity, Threshold, Window};
use crate::engine::EventKind;
use crate::metrics::MetricRef;
use crate::weaver::{EdgeKind, NodeDecl, TraceChain, WovenModel};

pub use plan::{emit_plan, load_plan};

/// Cooldown applied to adaptation rules that do not declare one.
pub const DEFAULT_COOLDOWN: Millis = Millis(60_000);

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub component: String,
    pub event_kinds: Vec<EventKind>,
    /// Feature, signal and slot names read from the component's events.
    pub fields: Vec<String>,
}

impl Probe {
    pub fn covers(&self, kind: EventKind, field: &str) -> bool {
        self.event_kinds.contains(&kind) && self.fields.iter().any(|f| f == field)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluator {
    /// Id of the technical requirement the evaluator checks.
    pub id: String,
    pub metric: MetricRef,
    pub scope: String,
    pub window: Window,
    pub min_samples: u64,
    pub sensitive_attributes: Vec<String>,
    /// Path of the reference event sample, relative to the plan file.
    pub baseline: Option<String>,
    pub baseline_dataset: Option<String>,
    pub context: Option<String>,
    pub deployment: Option<String>,
}

impl Evaluator {
    pub fn fields(&self) -> Vec<String> {
        self.metric.fields(&self.sensitive_attributes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationRule {
    /// `<techreq>@<requirement>`
    pub id: String,
    pub evaluator: String,
    pub threshold: Threshold,
    /// Most specific requirement first, root last.
    pub hcr_chain: Vec<String>,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationRule {
    /// `<adaptation block>@<requirement>`
    pub id: String,
    /// Violation rule that triggers this adaptation.
    pub on: String,
    pub action: Action,
    pub cooldown: Millis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSpec {
    pub monitor_id: String,
    pub probes: Vec<Probe>,
    pub evaluators: Vec<Evaluator>,
    pub rules: Vec<ViolationRule>,
    pub adaptation_rules: Vec<AdaptationRule>,
    /// Keyed by violation rule id: the trace of the rule's most specific requirement.
    pub trace_index: BTreeMap<String, TraceChain>,
}

impl MonitorSpec {
    pub fn empty(monitor_id: impl Into<String>) -> Self {
        Self {
            monitor_id: monitor_id.into(),
            probes: Vec::new(),
            evaluators: Vec::new(),
            rules: Vec::new(),
            adaptation_rules: Vec::new(),
            trace_index: BTreeMap::new(),
        }
    }

    pub fn evaluator(&self, id: &str) -> Option<&Evaluator> {
        self.evaluators.iter().find(|e| e.id == id)
    }

    pub fn rule(&self, id: &str) -> Option<&ViolationRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn probe(&self, component: &str) -> Option<&Probe> {
        self.probes.iter().find(|p| p.component == component)
    }

    /// Structural checks shared by `compile` and `load_plan`. Locations are
    /// left at the origin; the plan loader fills in line numbers.
    pub(crate) fn check(&self) -> Vec<(Diagnostic, Anchor)> {
        let mut out = Vec::new();
        for (i, e) in self.evaluators.iter().enumerate() {
            for field in e.fields() {
                let covered = self.probe(&e.scope).is_some_and(|p| {
                    p.fields.contains(&field)
                        && e.metric.event_kinds().iter().all(|k| p.event_kinds.contains(k))
                });
                if !covered {
                    out.push((
                        Diagnostic::error(
                            "uncovered-field",
                            format!(
                                "uncovered field `{field}` of evaluator `{}`: no probe on `{}` reads it",
                                e.id, e.scope
                            ),
                            Location::default(),
                        ),
                        Anchor::Evaluator(i),
                    ));
                }
            }
            if e.metric.needs_baseline() && e.baseline.is_none() {
                out.push((
                    Diagnostic::error(
                        "missing-baseline",
                        format!("drift evaluator `{}` has no baseline", e.id),
                        Location::default(),
                    ),
                    Anchor::Evaluator(i),
                ));
            }
            if e.metric.is_fairness() && e.sensitive_attributes.is_empty() {
                out.push((
                    Diagnostic::error(
                        "missing-sensitive-attributes",
                        format!("fairness evaluator `{}` has no sensitive attributes", e.id),
                        Location::default(),
                    ),
                    Anchor::Evaluator(i),
                ));
            }
        }
        for (i, r) in self.rules.iter().enumerate() {
            if self.evaluator(&r.evaluator).is_none() {
                out.push((
                    Diagnostic::error(
                        "unknown-evaluator",
                        format!("rule `{}` references unknown evaluator `{}`", r.id, r.evaluator),
                        Location::default(),
                    ),
                    Anchor::Rule(i),
                ));
            }
            if r.hcr_chain.is_empty() {
                out.push((
                    Diagnostic::error(
                        "empty-chain",
                        format!("rule `{}` has an empty requirement chain", r.id),
                        Location::default(),
                    ),
                    Anchor::Rule(i),
                ));
            }
        }
        for (i, a) in self.adaptation_rules.iter().enumerate() {
            if self.rule(&a.on).is_none() {
                out.push((
                    Diagnostic::error(
                        "unknown-rule",
                        format!("adaptation `{}` references unknown rule `{}`", a.id, a.on),
                        Location::default(),
                    ),
                    Anchor::Adaptation(i),
                ));
            }
        }
        out
    }
}

/// Which record of a spec a structural diagnostic belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Anchor {
    Evaluator(usize),
    Rule(usize),
    Adaptation(usize),
}

/// Builds the runtime monitor for an error-free woven model.
///
/// Evaluators follow technical-requirement declaration order, one per leaf
/// that satisfies at least one requirement. Each satisfied requirement
/// yields one violation rule; each adaptation block of the technical
/// requirement yields one adaptation rule per violation rule.
pub fn compile(woven: &WovenModel) -> Result<MonitorSpec, Vec<Diagnostic>> {
    if !woven.is_compilable() {
        let mut errs: Vec<Diagnostic> = woven.diagnostics.iter().filter(|d| d.is_error()).cloned().collect();
        errs.push(Diagnostic::error(
            "not-compilable",
            "woven model has errors",
            Location::new(1, 1),
        ));
        return Err(errs);
    }
    let mut spec = MonitorSpec::empty(woven.model(ModelKind::Hcr).name.clone());
    let mut errors = Vec::new();

    for (idx, node) in woven.nodes.iter().enumerate() {
        let NodeDecl::TechReq(t) = &node.decl else { continue };
        if !t.is_leaf() {
            continue;
        }
        let satisfied = woven.targets(idx, EdgeKind::Satisfies);
        if satisfied.is_empty() {
            continue;
        }
        let (Some(metric), Some(scope), Some(threshold), Some(window), Some(min_samples)) = (
            t.metric.clone(),
            t.scope.as_deref(),
            t.threshold,
            t.window,
            t.min_samples,
        ) else {
            continue;
        };
        let Some(scope_idx) = woven.resolve(ModelKind::Arch, scope) else { continue };
        let scope_id = woven.node(scope_idx).id.clone();

        let contexts: Vec<_> = woven
            .targets(scope_idx, EdgeKind::ContextualizedBy)
            .into_iter()
            .filter_map(|c| match &woven.node(c).decl {
                NodeDecl::Context(ctx) => Some(ctx),
                _ => None,
            })
            .collect();
        let mut sensitive: Vec<String> = Vec::new();
        for c in &contexts {
            for a in &c.sensitive_attributes {
                if !sensitive.contains(a) {
                    sensitive.push(a.clone());
                }
            }
        }
        let baseline_ctx = contexts.iter().find(|c| c.baseline_dataset().is_some());
        let primary_ctx = baseline_ctx.or(contexts.first());
        let baseline_ds = baseline_ctx.and_then(|c| c.baseline_dataset());

        if metric.is_fairness() && sensitive.is_empty() {
            errors.push(
                Diagnostic::error(
                    "missing-sensitive-attributes",
                    format!(
                        "fairness metric {metric} of `{}` needs sensitive attributes in a context of `{scope_id}`",
                        t.id
                    ),
                    node.location,
                )
                .in_model(ModelKind::Tech),
            );
        }
        if metric.needs_baseline() && baseline_ds.is_none() {
            errors.push(
                Diagnostic::error(
                    "missing-baseline",
                    format!(
                        "drift metric {metric} of `{}` needs a training baseline in a context of `{scope_id}`",
                        t.id
                    ),
                    node.location,
                )
                .in_model(ModelKind::Tech),
            );
        }

        let evaluator = Evaluator {
            id: t.id.clone(),
            metric: metric.clone(),
            scope: scope_id,
            window,
            min_samples,
            sensitive_attributes: if metric.is_fairness() { sensitive } else { Vec::new() },
            baseline: if metric.needs_baseline() {
                baseline_ds.and_then(|d| d.baseline.clone())
            } else {
                None
            },
            baseline_dataset: if metric.needs_baseline() {
                baseline_ds.map(|d| d.name.clone())
            } else {
                None
            },
            context: primary_ctx.map(|c| c.id.clone()),
            deployment: primary_ctx.and_then(|c| c.deployment.clone()),
        };

        for req in satisfied {
            let path = woven.requirement_path(req);
            let hcr_chain: Vec<String> = path.iter().map(|&i| woven.node(i).id.clone()).collect();
            let severity = path
                .iter()
                .filter_map(|&i| match &woven.node(i).decl {
                    NodeDecl::Requirement(r) => Some(r.severity),
                    _ => None,
                })
                .max()
                .unwrap_or(Severity::Low);
            let rule_id = format!("{}@{}", t.id, hcr_chain[0]);
            if let Ok(trace) = woven.trace(&hcr_chain[0]) {
                spec.trace_index.insert(rule_id.clone(), trace);
            }
            for a in &t.adaptations {
                spec.adaptation_rules.push(AdaptationRule {
                    id: format!("{}@{}", a.id, hcr_chain[0]),
                    on: rule_id.clone(),
                    action: a.action.clone(),
                    cooldown: a.cooldown.unwrap_or(DEFAULT_COOLDOWN),
                });
            }
            spec.rules.push(ViolationRule {
                id: rule_id,
                evaluator: t.id.clone(),
                threshold,
                hcr_chain,
                severity,
            });
        }
        spec.evaluators.push(evaluator);
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    spec.probes = derive_probes(woven, &spec.evaluators);
    Ok(spec)
}

/// One probe per monitored component, in architecture declaration order.
fn derive_probes(woven: &WovenModel, evaluators: &[Evaluator]) -> Vec<Probe> {
    woven
        .model(ModelKind::Arch)
        .components()
        .filter_map(|c| {
            let mine: Vec<&Evaluator> = evaluators.iter().filter(|e| e.scope == c.id).collect();
            if mine.is_empty() {
                return None;
            }
            let mut kinds: Vec<EventKind> = mine
                .iter()
                .flat_map(|e| e.metric.event_kinds().iter().copied())
                .collect();
            kinds.sort();
            kinds.dedup();
            let mut fields: Vec<String> = mine.iter().flat_map(|e| e.fields()).collect();
            fields.sort();
            fields.dedup();
            Some(Probe {
                component: c.id.clone(),
                event_kinds: kinds,
                fields,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{spec, spec_with, woven, ARCH, CONTEXT, DESIGN, HCR, TECH};

    #[test]
    fn one_evaluator_per_monitored_leaf() {
        let s = spec();
        assert_eq!(s.monitor_id, "H");
        let ids: Vec<&str> = s.evaluators.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["Parity", "Ratio", "Leak", "Correct", "Speed"]);
        assert_eq!(s.evaluator("Parity").unwrap().sensitive_attributes, ["group"]);
        assert!(s.evaluator("Leak").unwrap().sensitive_attributes.is_empty());
        assert_eq!(s.evaluator("Leak").unwrap().context.as_deref(), Some("RecCtx"));
        assert_eq!(s.evaluator("Leak").unwrap().deployment.as_deref(), Some("suburbs"));
    }

    #[test]
    fn one_rule_per_satisfied_requirement() {
        let s = spec();
        let ids: Vec<&str> = s.rules.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(
            ids,
            ["Parity@Fair", "Ratio@Fair", "Leak@Private", "Correct@Fair", "Correct@Private", "Speed@Private"]
        );
        let fair = s.rule("Correct@Fair").unwrap();
        assert_eq!(fair.hcr_chain, ["Fair", "Root"]);
        assert_eq!(fair.severity, Severity::High);
        assert_eq!(s.rule("Correct@Private").unwrap().severity, Severity::Critical);
        assert_eq!(s.trace_index["Leak@Private"].components, ["Recogniser", "Camera", "Nav"]);
        assert_eq!(s.trace_index.len(), s.rules.len());
    }

    #[test]
    fn adaptation_rules_and_default_cooldown() {
        let s = spec();
        assert_eq!(s.adaptation_rules.len(), 2);
        let hide = &s.adaptation_rules[0];
        assert_eq!((hide.id.as_str(), hide.on.as_str()), ("Hide@Private", "Leak@Private"));
        assert_eq!(hide.cooldown, Millis(10_000));
        let ground = &s.adaptation_rules[1];
        assert_eq!(ground.action, Action::Shutdown { component: "Nav".into() });
        assert_eq!(ground.cooldown, DEFAULT_COOLDOWN);
    }

    #[test]
    fn probes_cover_every_evaluator_field() {
        let s = spec();
        assert!(s.check().is_empty());
        for e in &s.evaluators {
            let p = s.probe(&e.scope).unwrap();
            for f in e.fields() {
                assert!(p.fields.contains(&f), "{} {f}", e.id);
            }
        }
        assert!(s.probe("Camera").is_none());
    }

    #[test]
    fn plan_round_trip() {
        let s = spec();
        let text = emit_plan(&s);
        let back = load_plan(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(emit_plan(&back), text);
    }

    #[test]
    fn fairness_without_sensitive_attributes() {
        let context = CONTEXT.replace("sensitive_attributes: group; ", "");
        let w = woven(&[HCR, TECH, ARCH, DESIGN, &context]);
        let errs = compile(&w).unwrap_err();
        let codes: Vec<&str> = errs.iter().map(|d| d.code.as_str()).collect();
        assert_eq!(codes, ["missing-sensitive-attributes", "missing-sensitive-attributes"]);
        assert_eq!(errs[0].location.line, 2);
    }

    #[test]
    fn drift_needs_a_baseline() {
        let extra = "techreq Drift {
  metric: ks_drift(speed); scope: Nav; threshold: <= 0.1;
  window: 100ev; min_samples: 10; satisfies: Honesty;
}
";
        let errs = compile(&woven(&[HCR, &format!("{TECH}{extra}"), ARCH, DESIGN, CONTEXT])).unwrap_err();
        assert_eq!(errs[0].code, "missing-baseline");

        let context = format!(
            "{CONTEXT}context NavCtx {{ for: Nav; dataset Logs {{ source: \"logs\"; role: training; baseline: \"nav.jsonl\"; }} }}\n"
        );
        let s = compile(&woven(&[HCR, &format!("{TECH}{extra}"), ARCH, DESIGN, &context])).unwrap();
        let e = s.evaluator("Drift").unwrap();
        assert_eq!(e.baseline.as_deref(), Some("nav.jsonl"));
        assert_eq!(e.baseline_dataset.as_deref(), Some("Logs"));
        assert_eq!(s.rule("Drift@Honesty").unwrap().severity, Severity::Medium);
    }

    #[test]
    fn unlinked_and_parent_techreqs_are_skipped() {
        let extra = "techreq Group {
  satisfies: Honesty;
  techreq Inner {
    metric: mean_confidence; scope: Recogniser; threshold: >= 0.5;
    window: 100ev; min_samples: 10;
  }
}
techreq Orphan {
  metric: mean_confidence; scope: Recogniser; threshold: >= 0.5;
  window: 100ev; min_samples: 10;
}
";
        let s = spec_with(&format!("{TECH}{extra}"));
        assert_eq!(s.evaluators.len(), 5);
        assert!(s.evaluator("Orphan").is_none() && s.evaluator("Group").is_none());
    }

    #[test]
    fn errors_in_the_woven_model_block_compilation() {
        let tech = TECH.replace("satisfies: Private;\n  adaptation Ground", "satisfies: Ghost;\n  adaptation Ground");
        let errs = compile(&woven(&[HCR, &tech, ARCH, DESIGN, CONTEXT])).unwrap_err();
        assert_eq!(errs.last().unwrap().code, "not-compilable");
        assert_eq!(errs[0].code, "dangling-reference");
    }

    #[test]
    fn compilation_is_deterministic() {
        assert_eq!(emit_plan(&spec()), emit_plan(&spec()));
    }
}
