//! Scenario and mutation files (`model scenario <name>;`).
//!
//! ```text
//! settings Run { seed: 42; events: 20000; start: 1700000000000; interval: 100; grace: 4000; }
//! component Scheduler {
//!   rate: 0.5;
//!   attribute: neighbourhood;
//!   group groupA { proportion: 0.5; positive_rate: 0.8; }
//!   feature distance { mean: 5; sd: 1.5; }
//! }
//! mutation Bias { effect: bias(groupA, 0.5); onset: 10000; duration: 5000; }
//! ```

use std::fmt;
use std::str::FromStr;

use crate::diag::{Diagnostic, Location};
use crate::dsml::syntax::{parse_document, Decl, Property, Value};
use crate::metrics::MetricFamily;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalSpec {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub name: String,
    pub proportion: f64,
    /// Probability of a positive prediction for members of the group.
    pub positive_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub name: String,
    pub proportion: f64,
}

/// Generative model of one simulated component.
///
/// A component with groups emits boolean predictions carrying the group as
/// a feature; one with classes emits class predictions (with confidence and
/// delayed feedback); one with neither emits signal events. Numeric
/// features ride on features of prediction events or signals of signal
/// events. A leak probability adds the boolean `image_stored` signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub id: String,
    /// Probability of emitting an event per tick.
    pub rate: f64,
    pub attribute: String,
    pub groups: Vec<GroupSpec>,
    pub classes: Vec<ClassSpec>,
    /// Probability that a class prediction equals the true class.
    pub accuracy: f64,
    /// Ticks between a class prediction and its feedback; 0 disables feedback.
    pub feedback_delay: u64,
    pub confidence: Option<NormalSpec>,
    pub leak_probability: Option<f64>,
    pub features: Vec<(String, NormalSpec)>,
}

impl ComponentSpec {
    pub fn emits_predictions(&self) -> bool {
        !self.groups.is_empty() || !self.classes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub n_events: u64,
    /// Timestamp of tick 0, unix milliseconds.
    pub start_ts: i64,
    /// Event time per tick, milliseconds.
    pub interval_ms: i64,
    /// Events after a mutation ends during which a detection still counts.
    pub grace: u64,
    pub components: Vec<ComponentSpec>,
}

/// A generative change injected into the simulated system.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    BiasInjection { group: String, rate: f64 },
    PrivacyLeak { rate: f64 },
    SpeedSurge { shift: f64 },
    CovariateDrift { field: String, shift: f64 },
    PredictionShift { class: String, delta: f64 },
}

impl Effect {
    /// The metric family a monitor should report for this fault.
    pub fn family(&self) -> MetricFamily {
        match self {
            Effect::BiasInjection { .. } => MetricFamily::Fairness,
            Effect::PrivacyLeak { .. } => MetricFamily::Flag,
            Effect::SpeedSurge { .. } => MetricFamily::Range,
            Effect::CovariateDrift { .. } => MetricFamily::InputDrift,
            Effect::PredictionShift { .. } => MetricFamily::PredictionDrift,
        }
    }

    fn parse_parts(name: &str, args: &[Value]) -> Result<Self, String> {
        let ident = |i: usize| match args.get(i) {
            Some(Value::Ident(s)) => Ok(s.clone()),
            _ => Err(format!("`{name}` expects an identifier as argument {}", i + 1)),
        };
        let num = |i: usize| match args.get(i) {
            Some(Value::Num(n)) => Ok(*n),
            _ => Err(format!("`{name}` expects a number as argument {}", i + 1)),
        };
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("`{name}` takes {n} argument(s), got {}", args.len()))
            }
        };
        let effect = match name {
            "bias" => {
                arity(2)?;
                Effect::BiasInjection { group: ident(0)?, rate: num(1)? }
            }
            "privacy_leak" => {
                arity(1)?;
                Effect::PrivacyLeak { rate: num(0)? }
            }
            "speed_surge" => {
                arity(1)?;
                Effect::SpeedSurge { shift: num(0)? }
            }
            "covariate_drift" => {
                arity(2)?;
                Effect::CovariateDrift { field: ident(0)?, shift: num(1)? }
            }
            "prediction_shift" => {
                arity(2)?;
                Effect::PredictionShift { class: ident(0)?, delta: num(1)? }
            }
            other => return Err(format!("unknown mutation `{other}`")),
        };
        match &effect {
            Effect::BiasInjection { rate, .. } | Effect::PrivacyLeak { rate } if !(0.0..=1.0).contains(rate) => {
                Err(format!("`{name}` rate must lie in [0, 1]"))
            }
            _ => Ok(effect),
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::BiasInjection { group, rate } => write!(f, "bias({group},{rate})"),
            Effect::PrivacyLeak { rate } => write!(f, "privacy_leak({rate})"),
            Effect::SpeedSurge { shift } => write!(f, "speed_surge({shift})"),
            Effect::CovariateDrift { field, shift } => write!(f, "covariate_drift({field},{shift})"),
            Effect::PredictionShift { class, delta } => write!(f, "prediction_shift({class},{delta})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mutation {
    pub name: String,
    pub effect: Effect,
    /// Index of the first affected event.
    pub onset: u64,
    /// Number of affected events; `None` lasts to the end of the stream.
    pub duration: Option<u64>,
}

impl Mutation {
    pub fn is_active(&self, index: u64) -> bool {
        index >= self.onset && self.duration.is_none_or(|d| index < self.onset + d)
    }

    /// Compact form `effect@onset[+duration]`, also accepted by `FromStr`.
    pub fn spec_string(&self) -> String {
        match self.duration {
            Some(d) => format!("{}@{}+{d}", self.effect, self.onset),
            None => format!("{}@{}", self.effect, self.onset),
        }
    }
}

impl FromStr for Mutation {
    type Err = String;

    /// Parses `bias(groupB,0.5)@10000` or `bias(groupB,0.5)@10000+5000`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (effect_text, timing) = s
            .rsplit_once('@')
            .ok_or_else(|| format!("mutation `{s}` lacks `@onset`"))?;
        let (onset, duration) = match timing.split_once('+') {
            Some((o, d)) => (o, Some(d)),
            None => (timing, None),
        };
        let onset: u64 = onset.trim().parse().map_err(|_| format!("invalid onset in `{s}`"))?;
        let duration = duration
            .map(|d| d.trim().parse::<u64>().map_err(|_| format!("invalid duration in `{s}`")))
            .transpose()?;
        let src = format!("model scenario M;\nmutation M {{ effect: {effect_text}; }}\n");
        let doc = parse_document(&src).map_err(|d| format!("invalid mutation `{s}`: {}", d.message))?;
        let prop = doc.decls[0].properties().next().ok_or("empty mutation")?;
        let effect = match &prop.values[..] {
            [Value::Call(name, args)] => Effect::parse_parts(name, args)?,
            _ => return Err(format!("invalid mutation effect `{effect_text}`")),
        };
        Ok(Mutation {
            name: effect.to_string(),
            effect,
            onset,
            duration,
        })
    }
}

/// Contents of a scenario file: settings and components when present,
/// and any mutation blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub config: Option<ScenarioConfig>,
    pub mutations: Vec<Mutation>,
}

struct Props<'a> {
    decl: &'a Decl,
    props: Vec<&'a Property>,
}

fn err(loc: Location, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error("scenario", msg, loc)
}

impl<'a> Props<'a> {
    fn new(decl: &'a Decl, allowed: &[&str]) -> Result<Self, Diagnostic> {
        let props: Vec<&Property> = decl.properties().collect();
        for (i, p) in props.iter().enumerate() {
            if !allowed.contains(&p.key.as_str()) {
                return Err(err(p.loc, format!("unknown property `{}` in {} `{}`", p.key, decl.keyword, decl.id)));
            }
            if props[..i].iter().any(|q| q.key == p.key) {
                return Err(err(p.loc, format!("duplicate property `{}`", p.key)));
            }
        }
        Ok(Self { decl, props })
    }

    fn get(&self, key: &str) -> Option<&'a Property> {
        self.props.iter().copied().find(|p| p.key == key)
    }

    fn num(&self, key: &str) -> Result<Option<f64>, Diagnostic> {
        match self.get(key) {
            None => Ok(None),
            Some(p) => match &p.values[..] {
                [Value::Num(n)] => Ok(Some(*n)),
                _ => Err(err(p.loc, format!("`{key}` expects a number"))),
            },
        }
    }

    fn req_num(&self, key: &str) -> Result<f64, Diagnostic> {
        self.num(key)?.ok_or_else(|| {
            err(self.decl.loc, format!("{} `{}` lacks `{key}`", self.decl.keyword, self.decl.id))
        })
    }

    fn count(&self, key: &str) -> Result<Option<u64>, Diagnostic> {
        match self.num(key)? {
            Some(n) if n >= 0.0 && n.fract() == 0.0 => Ok(Some(n as u64)),
            Some(_) => Err(err(self.get(key).unwrap().loc, format!("`{key}` expects a non-negative integer"))),
            None => Ok(None),
        }
    }

    fn prob(&self, key: &str) -> Result<Option<f64>, Diagnostic> {
        match self.num(key)? {
            Some(p) if !(0.0..=1.0).contains(&p) => {
                Err(err(self.get(key).unwrap().loc, format!("`{key}` must lie in [0, 1]")))
            }
            other => Ok(other),
        }
    }

    fn ident(&self, key: &str) -> Result<Option<String>, Diagnostic> {
        match self.get(key) {
            None => Ok(None),
            Some(p) => match &p.values[..] {
                [Value::Ident(s)] => Ok(Some(s.clone())),
                _ => Err(err(p.loc, format!("`{key}` expects an identifier"))),
            },
        }
    }
}

fn normal(decl: &Decl) -> Result<NormalSpec, Diagnostic> {
    let p = Props::new(decl, &["mean", "sd"])?;
    let sd = p.req_num("sd")?;
    if sd < 0.0 {
        return Err(err(decl.loc, "`sd` must be non-negative"));
    }
    Ok(NormalSpec { mean: p.req_num("mean")?, sd })
}

fn component(decl: &Decl) -> Result<ComponentSpec, Diagnostic> {
    let p = Props::new(
        decl,
        &["rate", "attribute", "accuracy", "feedback_delay", "leak_probability"],
    )?;
    let mut c = ComponentSpec {
        id: decl.id.clone(),
        rate: p.prob("rate")?.unwrap_or(1.0),
        attribute: p.ident("attribute")?.unwrap_or_else(|| "group".into()),
        groups: Vec::new(),
        classes: Vec::new(),
        accuracy: p.prob("accuracy")?.unwrap_or(1.0),
        feedback_delay: p.count("feedback_delay")?.unwrap_or(0),
        confidence: None,
        leak_probability: p.prob("leak_probability")?,
        features: Vec::new(),
    };
    for child in decl.children() {
        match child.keyword.as_str() {
            "group" => {
                let g = Props::new(child, &["proportion", "positive_rate"])?;
                c.groups.push(GroupSpec {
                    name: child.id.clone(),
                    proportion: g.prob("proportion")?.unwrap_or(0.0),
                    positive_rate: g.prob("positive_rate")?.unwrap_or(0.0),
                });
            }
            "class" => {
                let g = Props::new(child, &["proportion"])?;
                c.classes.push(ClassSpec {
                    name: child.id.clone(),
                    proportion: g.prob("proportion")?.unwrap_or(0.0),
                });
            }
            "feature" if child.id == "confidence" => c.confidence = Some(normal(child)?),
            "feature" => c.features.push((child.id.clone(), normal(child)?)),
            other => return Err(err(child.loc, format!("unknown block `{other}` in component `{}`", decl.id))),
        }
    }
    for (what, total) in [
        ("group", c.groups.iter().map(|g| g.proportion).sum::<f64>()),
        ("class", c.classes.iter().map(|g| g.proportion).sum::<f64>()),
    ] {
        let present = if what == "group" { !c.groups.is_empty() } else { !c.classes.is_empty() };
        if present && (total - 1.0).abs() > 1e-9 {
            return Err(err(
                decl.loc,
                format!("{what} proportions of `{}` sum to {total}, not 1", decl.id),
            ));
        }
    }
    if !c.groups.is_empty() && !c.classes.is_empty() {
        return Err(err(decl.loc, format!("component `{}` declares both groups and classes", decl.id)));
    }
    Ok(c)
}

fn mutation(decl: &Decl) -> Result<Mutation, Diagnostic> {
    let p = Props::new(decl, &["effect", "onset", "duration"])?;
    let prop = p
        .get("effect")
        .ok_or_else(|| err(decl.loc, format!("mutation `{}` lacks `effect`", decl.id)))?;
    let effect = match &prop.values[..] {
        [Value::Call(name, args)] => Effect::parse_parts(name, args).map_err(|m| err(prop.loc, m))?,
        _ => return Err(err(prop.loc, "`effect` expects a call such as `bias(groupB, 0.5)`")),
    };
    Ok(Mutation {
        name: decl.id.clone(),
        effect,
        onset: p
            .count("onset")?
            .ok_or_else(|| err(decl.loc, format!("mutation `{}` lacks `onset`", decl.id)))?,
        duration: p.count("duration")?,
    })
}

/// Parses a scenario or mutations file.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, Diagnostic> {
    let doc = parse_document(text)?;
    if doc.kind != "scenario" {
        return Err(err(doc.kind_loc, format!("expected `model scenario`, found `{}`", doc.kind)));
    }
    let mut settings = None;
    let mut components = Vec::new();
    let mut mutations = Vec::new();
    for decl in &doc.decls {
        match decl.keyword.as_str() {
            "settings" => {
                if settings.is_some() {
                    return Err(err(decl.loc, "more than one settings block"));
                }
                let p = Props::new(decl, &["seed", "events", "start", "interval", "grace"])?;
                settings = Some((
                    p.count("seed")?.unwrap_or(0),
                    p.count("events")?.unwrap_or(10_000),
                    p.count("start")?.unwrap_or(1_700_000_000_000) as i64,
                    p.count("interval")?.unwrap_or(100) as i64,
                    p.count("grace")?.unwrap_or(4_000),
                ));
            }
            "component" => components.push(component(decl)?),
            "mutation" => mutations.push(mutation(decl)?),
            other => return Err(err(decl.loc, format!("unknown keyword `{other}` in a scenario"))),
        }
    }
    let config = match (settings, components.is_empty()) {
        (None, true) => None,
        (s, _) => {
            let (seed, n_events, start_ts, interval_ms, grace) =
                s.unwrap_or((0, 10_000, 1_700_000_000_000, 100, 4_000));
            Some(ScenarioConfig {
                name: doc.name.clone(),
                seed,
                n_events,
                start_ts,
                interval_ms,
                grace,
                components,
            })
        }
    };
    Ok(ScenarioFile { config, mutations })
}
