//! The monitor plan text format.
//!
//! ```text
//! monitor:
//!   id=Drone
//! probes:
//!   component=Recogniser kinds=prediction,signal fields=image_stored
//! evaluators:
//!   id=Privacy metric=flag_rate(image_stored) scope=Recogniser window=1000ev min_samples=100 sensitive_attributes=""
//! rules:
//!   id=Privacy@PrivacyOfImages evaluator=Privacy threshold=<=0.01 severity=high hcr_chain=PrivacyOfImages trace_tech=Privacy ...
//! adaptations:
//!   id=Obfuscate@PrivacyOfImages on=Privacy@PrivacyOfImages action=obfuscate(image_stored) cooldown=60s
//! ```
//!
//! Sections appear once each, in this order. Records are indented lines of
//! `key=value` tokens; a value is bare, or a JSON string literal when it is
//! empty or contains whitespace or quotes. Lists are comma-joined. Optional
//! keys are omitted when absent. Blank lines and `#` comment lines are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::{AdaptationRule, Anchor, Evaluator, MonitorSpec, Probe, ViolationRule};
use crate::diag::{Diagnostic, Location};
use crate::dsml::{Action, Millis, Severity, Threshold, Window};
use crate::engine::EventKind;
use crate::metrics::MetricRef;
use crate::weaver::TraceChain;

const SECTIONS: [&str; 5] = ["monitor", "probes", "evaluators", "rules", "adaptations"];

fn quote(value: &str) -> String {
    if value.is_empty() || value.chars().any(|c| c.is_whitespace() || c == '"') || value.starts_with('#') {
        serde_json::to_string(value).expect("strings serialize")
    } else {
        value.to_string()
    }
}

struct Record(String);

impl Record {
    fn new() -> Self {
        Record(String::from(" "))
    }

    fn put(mut self, key: &str, value: impl AsRef<str>) -> Self {
        let _ = write!(self.0, " {key}={}", quote(value.as_ref()));
        self
    }

    fn opt(self, key: &str, value: &Option<String>) -> Self {
        match value {
            Some(v) => self.put(key, v),
            None => self,
        }
    }

    fn list<S: AsRef<str>>(self, key: &str, values: &[S]) -> Self {
        let joined: Vec<&str> = values.iter().map(AsRef::as_ref).collect();
        self.put(key, joined.join(","))
    }

    fn finish(self, out: &mut String) {
        out.push_str(&self.0);
        out.push('\n');
    }
}

/// Canonical plan text for a spec. Deterministic: equal specs emit equal bytes.
pub fn emit_plan(spec: &MonitorSpec) -> String {
    let mut out = String::from("monitor:\n");
    Record::new().put("id", &spec.monitor_id).finish(&mut out);

    out.push_str("probes:\n");
    for p in &spec.probes {
        let kinds: Vec<&str> = p.event_kinds.iter().map(|k| k.keyword()).collect();
        Record::new()
            .put("component", &p.component)
            .list("kinds", &kinds)
            .list("fields", &p.fields)
            .finish(&mut out);
    }

    out.push_str("evaluators:\n");
    for e in &spec.evaluators {
        Record::new()
            .put("id", &e.id)
            .put("metric", e.metric.to_string())
            .put("scope", &e.scope)
            .put("window", e.window.to_string())
            .put("min_samples", e.min_samples.to_string())
            .list("sensitive_attributes", &e.sensitive_attributes)
            .opt("baseline", &e.baseline)
            .opt("baseline_dataset", &e.baseline_dataset)
            .opt("context", &e.context)
            .opt("deployment", &e.deployment)
            .finish(&mut out);
    }

    out.push_str("rules:\n");
    for r in &spec.rules {
        let mut rec = Record::new()
            .put("id", &r.id)
            .put("evaluator", &r.evaluator)
            .put("threshold", r.threshold.to_string())
            .put("severity", r.severity.to_string())
            .list("hcr_chain", &r.hcr_chain);
        if let Some(t) = spec.trace_index.get(&r.id) {
            rec = rec
                .put("trace_requirement", &t.requirement)
                .list("trace_tech", &t.tech)
                .list("trace_components", &t.components)
                .list("trace_designs", &t.designs)
                .list("trace_contexts", &t.contexts);
        }
        rec.finish(&mut out);
    }

    out.push_str("adaptations:\n");
    for a in &spec.adaptation_rules {
        Record::new()
            .put("id", &a.id)
            .put("on", &a.on)
            .put("action", a.action.to_string())
            .put("cooldown", a.cooldown.to_string())
            .finish(&mut out);
    }
    out
}

struct Field {
    value: String,
    loc: Location,
}

/// Parsed `key=value` tokens of one record line.
struct Fields {
    line: u32,
    map: BTreeMap<String, Field>,
}

impl Fields {
    fn err(loc: Location, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::error("plan-schema", msg, loc)
    }

    fn parse(text: &str, line: u32) -> Result<Fields, Diagnostic> {
        let mut map = BTreeMap::new();
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            let loc = Location::new(line, start as u32 + 1);
            while i < chars.len() && chars[i] != '=' && !chars[i].is_whitespace() {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '=' {
                return Err(Self::err(loc, "expected `key=value`"));
            }
            let key: String = chars[start..i].iter().collect();
            i += 1;
            let value = if i < chars.len() && chars[i] == '"' {
                let vstart = i;
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    if chars[i] == '\\' {
                        i += 1;
                    }
                    i += 1;
                }
                if i >= chars.len() {
                    return Err(Self::err(loc, format!("unterminated string in `{key}`")));
                }
                i += 1;
                let lit: String = chars[vstart..i].iter().collect();
                serde_json::from_str::<String>(&lit)
                    .map_err(|e| Self::err(loc, format!("bad string in `{key}`: {e}")))?
            } else {
                let vstart = i;
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
                chars[vstart..i].iter().collect()
            };
            if map.insert(key.clone(), Field { value, loc }).is_some() {
                return Err(Self::err(loc, format!("duplicate key `{key}`")));
            }
        }
        Ok(Fields { line, map })
    }

    fn take(&mut self, key: &str) -> Result<Field, Diagnostic> {
        self.map
            .remove(key)
            .ok_or_else(|| Self::err(Location::new(self.line, 3), format!("missing key `{key}`")))
    }

    fn text(&mut self, key: &str) -> Result<String, Diagnostic> {
        Ok(self.take(key)?.value)
    }

    fn opt(&mut self, key: &str) -> Option<String> {
        self.map.remove(key).map(|f| f.value)
    }

    fn list(&mut self, key: &str) -> Result<Vec<String>, Diagnostic> {
        Ok(split_list(&self.take(key)?.value))
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> Result<T, Diagnostic>
    where
        T::Err: std::fmt::Display,
    {
        let f = self.take(key)?;
        f.value
            .parse()
            .map_err(|e| Self::err(f.loc, format!("invalid `{key}` value `{}`: {e}", f.value)))
    }

    fn done(self) -> Result<(), Diagnostic> {
        match self.map.into_iter().next() {
            Some((k, f)) => Err(Self::err(f.loc, format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split(',').map(str::to_string).collect()
    }
}

fn probe(mut f: Fields) -> Result<Probe, Diagnostic> {
    let component = f.text("component")?;
    let kinds_field = f.take("kinds")?;
    let event_kinds = split_list(&kinds_field.value)
        .iter()
        .map(|k| k.parse::<EventKind>().map_err(|e| Fields::err(kinds_field.loc, e)))
        .collect::<Result<_, _>>()?;
    let fields = f.list("fields")?;
    f.done()?;
    Ok(Probe {
        component,
        event_kinds,
        fields,
    })
}

fn evaluator(mut f: Fields) -> Result<Evaluator, Diagnostic> {
    let e = Evaluator {
        id: f.text("id")?,
        metric: f.parsed::<MetricRef>("metric")?,
        scope: f.text("scope")?,
        window: f.parsed::<Window>("window")?,
        min_samples: f.parsed::<u64>("min_samples")?,
        sensitive_attributes: f.list("sensitive_attributes")?,
        baseline: f.opt("baseline"),
        baseline_dataset: f.opt("baseline_dataset"),
        context: f.opt("context"),
        deployment: f.opt("deployment"),
    };
    f.done()?;
    Ok(e)
}

fn rule(mut f: Fields) -> Result<(ViolationRule, Option<TraceChain>), Diagnostic> {
    let r = ViolationRule {
        id: f.text("id")?,
        evaluator: f.text("evaluator")?,
        threshold: f.parsed::<Threshold>("threshold")?,
        severity: f.parsed::<Severity>("severity")?,
        hcr_chain: f.list("hcr_chain")?,
    };
    let trace = match f.opt("trace_requirement") {
        Some(requirement) => Some(TraceChain {
            requirement,
            tech: f.list("trace_tech")?,
            components: f.list("trace_components")?,
            designs: f.list("trace_designs")?,
            contexts: f.list("trace_contexts")?,
        }),
        None => None,
    };
    f.done()?;
    Ok((r, trace))
}

fn adaptation(mut f: Fields) -> Result<AdaptationRule, Diagnostic> {
    let a = AdaptationRule {
        id: f.text("id")?,
        on: f.text("on")?,
        action: f.parsed::<Action>("action")?,
        cooldown: f.parsed::<Millis>("cooldown")?,
    };
    f.done()?;
    Ok(a)
}

/// Parses plan text back into a spec and checks its structural invariants
/// (every evaluator field covered by a probe, rules and adaptations
/// referencing existing records).
pub fn load_plan(text: &str) -> Result<MonitorSpec, Vec<Diagnostic>> {
    let mut section: Option<usize> = None;
    let mut monitor_id: Option<String> = None;
    let mut spec = MonitorSpec::empty("");
    let mut record_lines: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    let mut errors = Vec::new();
    let mut last_line = 0;

    for (n, raw) in text.lines().enumerate() {
        let line = n as u32 + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !raw.starts_with(char::is_whitespace) {
            let loc = Location::new(line, 1);
            let Some(name) = trimmed.strip_suffix(':') else {
                errors.push(Fields::err(loc, format!("expected a section header, found `{trimmed}`")));
                continue;
            };
            let Some(idx) = SECTIONS.iter().position(|s| *s == name) else {
                errors.push(Fields::err(loc, format!("unknown section `{name}`")));
                continue;
            };
            let expected = section.map_or(0, |s| s + 1);
            if idx != expected {
                errors.push(Fields::err(
                    loc,
                    format!("section `{name}:` out of order (expected `{}:`)", SECTIONS.get(expected).unwrap_or(&"end of plan")),
                ));
            }
            section = Some(idx);
            continue;
        }
        let Some(sec) = section else {
            errors.push(Fields::err(Location::new(line, 1), "record outside any section"));
            continue;
        };
        let fields = match Fields::parse(raw, line) {
            Ok(f) => f,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let result = match sec {
            0 => {
                let mut f = fields;
                f.text("id").and_then(|id| {
                    f.done()?;
                    if monitor_id.replace(id).is_some() {
                        return Err(Fields::err(Location::new(line, 3), "more than one monitor record"));
                    }
                    Ok(())
                })
            }
            1 => probe(fields).map(|p| {
                record_lines.insert((1, spec.probes.len()), line);
                spec.probes.push(p);
            }),
            2 => evaluator(fields).map(|e| {
                record_lines.insert((2, spec.evaluators.len()), line);
                spec.evaluators.push(e);
            }),
            3 => rule(fields).map(|(r, t)| {
                record_lines.insert((3, spec.rules.len()), line);
                if let Some(t) = t {
                    spec.trace_index.insert(r.id.clone(), t);
                }
                spec.rules.push(r);
            }),
            _ => adaptation(fields).map(|a| {
                record_lines.insert((4, spec.adaptation_rules.len()), line);
                spec.adaptation_rules.push(a);
            }),
        };
        if let Err(e) = result {
            errors.push(e);
        }
    }

    let end = Location::new(last_line.max(1), 1);
    if section != Some(SECTIONS.len() - 1) && errors.is_empty() {
        let missing = section.map_or(0, |s| s + 1);
        errors.push(Fields::err(end, format!("missing section `{}:` (truncated plan?)", SECTIONS[missing])));
    }
    match monitor_id {
        Some(id) => spec.monitor_id = id,
        None if errors.is_empty() => errors.push(Fields::err(end, "missing monitor record")),
        None => {}
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let structural: Vec<Diagnostic> = spec
        .check()
        .into_iter()
        .map(|(mut d, anchor)| {
            let key = match anchor {
                Anchor::Evaluator(i) => (2, i),
                Anchor::Rule(i) => (3, i),
                Anchor::Adaptation(i) => (4, i),
            };
            d.location = Location::new(record_lines.get(&key).copied().unwrap_or(1), 3);
            d
        })
        .collect();
    if !structural.is_empty() {
        return Err(structural);
    }
    Ok(spec)
}
