use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use super::lexer::Comparator;
use crate::diag::Location;
use crate::metrics::MetricRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Hcr,
    Tech,
    Arch,
    Design,
    Context,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Hcr,
        ModelKind::Tech,
        ModelKind::Arch,
        ModelKind::Design,
        ModelKind::Context,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ModelKind::Hcr => "hcr",
            ModelKind::Tech => "tech",
            ModelKind::Arch => "arch",
            ModelKind::Design => "design",
            ModelKind::Context => "context",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|k| k.keyword() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Category {
    Fairness,
    Privacy,
    Safety,
    Wellbeing,
    Transparency,
    Values,
    Other(String),
}

impl Category {
    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "fairness" => Category::Fairness,
            "privacy" => Category::Privacy,
            "safety" => Category::Safety,
            "wellbeing" => Category::Wellbeing,
            "transparency" => Category::Transparency,
            "values" => Category::Values,
            _ => return None,
        })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Category::Fairness => f.write_str("fairness"),
            Category::Privacy => f.write_str("privacy"),
            Category::Safety => f.write_str("safety"),
            Category::Wellbeing => f.write_str("wellbeing"),
            Category::Transparency => f.write_str("transparency"),
            Category::Values => f.write_str("values"),
            Category::Other(s) => write!(f, "other({s:?})"),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
    Critical,
}

impl Severity {
    pub fn keyword(self) -> &'static str {
        match self {
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
            Severity::Critical => "critical",
        }
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "low" => Severity::Low,
            "medium" => Severity::Medium,
            "high" => Severity::High,
            "critical" => Severity::Critical,
            _ => return Err(format!("unknown severity `{s}`")),
        })
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Satisfaction condition of a technical requirement. A metric value `v`
/// satisfies the threshold when `v <comparator> bound` holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    #[serde(with = "comparator_serde")]
    pub comparator: Comparator,
    pub bound: f64,
}

impl Threshold {
    pub fn new(comparator: Comparator, bound: f64) -> Self {
        Self { comparator, bound }
    }

    pub fn is_satisfied(&self, value: f64) -> bool {
        self.comparator.holds(value, self.bound)
    }

    /// The set of satisfying values as at most two disjoint intervals.
    pub fn satisfaction_set(&self) -> Vec<Interval> {
        let b = self.bound;
        match self.comparator {
            Comparator::Lt => vec![Interval::new(f64::NEG_INFINITY, false, b, false)],
            Comparator::Le => vec![Interval::new(f64::NEG_INFINITY, false, b, true)],
            Comparator::Gt => vec![Interval::new(b, false, f64::INFINITY, false)],
            Comparator::Ge => vec![Interval::new(b, true, f64::INFINITY, false)],
            Comparator::Eq => vec![Interval::new(b, true, b, true)],
            Comparator::Ne => vec![
                Interval::new(f64::NEG_INFINITY, false, b, false),
                Interval::new(b, false, f64::INFINITY, false),
            ],
        }
    }

    /// Whether some value satisfies both thresholds.
    pub fn overlaps(&self, other: &Threshold) -> bool {
        self.satisfaction_set().iter().any(|a| {
            other
                .satisfaction_set()
                .iter()
                .any(|b| !a.intersect(b).is_empty())
        })
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.comparator, self.bound)
    }
}

impl FromStr for Threshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let split = s
            .find(|c: char| !matches!(c, '<' | '>' | '=' | '!'))
            .unwrap_or(s.len());
        let comparator = Comparator::from_symbol(&s[..split])
            .ok_or_else(|| format!("malformed threshold `{s}`"))?;
        let bound: f64 = s[split..]
            .trim()
            .parse()
            .map_err(|_| format!("malformed threshold `{s}`"))?;
        Ok(Threshold { comparator, bound })
    }
}

mod comparator_serde {
    use super::Comparator;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &Comparator, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(c.symbol())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Comparator, D::Error> {
        let s = String::deserialize(d)?;
        Comparator::from_symbol(&s).ok_or_else(|| serde::de::Error::custom("bad comparator"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, lo_closed: bool, hi: f64, hi_closed: bool) -> Self {
        Self {
            lo,
            lo_closed,
            hi,
            hi_closed,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        Interval::new(lo, lo_closed, hi, hi_closed)
    }
}

/// Duration in event-time milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Millis(pub u64);

impl Millis {
    pub fn from_secs_f64(secs: f64) -> Self {
        Millis((secs * 1000.0).round() as u64)
    }
}

impl fmt::Display for Millis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0 as f64 / 1000.0)
    }
}

impl FromStr for Millis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (num, mult) = if let Some(n) = s.strip_suffix('s') {
            (n, 1.0)
        } else if let Some(n) = s.strip_suffix('m') {
            (n, 60.0)
        } else if let Some(n) = s.strip_suffix('h') {
            (n, 3600.0)
        } else {
            return Err(format!("malformed duration `{s}`"));
        };
        let v: f64 = num
            .parse()
            .map_err(|_| format!("malformed duration `{s}`"))?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(format!("malformed duration `{s}`"));
        }
        Ok(Millis::from_secs_f64(v * mult))
    }
}

/// Evaluation window: the last `n` routed events, or the events within the
/// last `d` milliseconds of event time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Window {
    Count(u64),
    Time(Millis),
}

impl Window {
    pub fn size(&self) -> u64 {
        match self {
            Window::Count(n) => *n,
            Window::Time(ms) => ms.0,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Count(n) => write!(f, "{n}ev"),
            Window::Time(ms) => write!(f, "{ms}"),
        }
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(n) = s.strip_suffix("ev") {
            let n: f64 = n.parse().map_err(|_| format!("malformed window `{s}`"))?;
            if n < 0.0 || n.fract() != 0.0 {
                return Err(format!("malformed window `{s}`"));
            }
            Ok(Window::Count(n as u64))
        } else {
            s.parse::<Millis>()
                .map(Window::Time)
                .map_err(|_| format!("malformed window `{s}`"))
        }
    }
}

impl Serialize for Window {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Adaptation action attached to a technical requirement.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Obfuscate { field: String },
    Shutdown { component: String },
    Throttle { component: String, factor: f64 },
    SwitchThreshold { component: String, name: String, value: f64 },
    Notify,
}

impl Action {
    /// Component the action acts upon, if it targets one.
    pub fn target_component(&self) -> Option<&str> {
        match self {
            Action::Shutdown { component }
            | Action::Throttle { component, .. }
            | Action::SwitchThreshold { component, .. } => Some(component),
            Action::Obfuscate { .. } | Action::Notify => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Action::Obfuscate { .. } => "obfuscate",
            Action::Shutdown { .. } => "shutdown",
            Action::Throttle { .. } => "throttle",
            Action::SwitchThreshold { .. } => "switch_threshold",
            Action::Notify => "notify",
        }
    }

    pub fn from_parts(name: &str, args: &[CallArg]) -> Result<Self, String> {
        let ident = |i: usize| match args.get(i) {
            Some(CallArg::Ident(s)) => Ok(s.clone()),
            _ => Err(format!("`{name}` expects an identifier as argument {}", i + 1)),
        };
        let number = |i: usize| match args.get(i) {
            Some(CallArg::Num(n)) => Ok(*n),
            _ => Err(format!("`{name}` expects a number as argument {}", i + 1)),
        };
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("`{name}` takes {n} argument(s), got {}", args.len()))
            }
        };
        match name {
            "obfuscate" => {
                arity(1)?;
                Ok(Action::Obfuscate { field: ident(0)? })
            }
            "shutdown" => {
                arity(1)?;
                Ok(Action::Shutdown {
                    component: ident(0)?,
                })
            }
            "throttle" => {
                arity(2)?;
                let factor = number(1)?;
                if !(factor > 0.0 && factor <= 1.0) {
                    return Err(format!("throttle factor {factor} outside (0, 1]"));
                }
                Ok(Action::Throttle {
                    component: ident(0)?,
                    factor,
                })
            }
            "switch_threshold" => {
                arity(3)?;
                Ok(Action::SwitchThreshold {
                    component: ident(0)?,
                    name: ident(1)?,
                    value: number(2)?,
                })
            }
            "notify" => {
                arity(0)?;
                Ok(Action::Notify)
            }
            other => Err(format!("unknown adaptation action `{other}`")),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Obfuscate { field } => write!(f, "obfuscate({field})"),
            Action::Shutdown { component } => write!(f, "shutdown({component})"),
            Action::Throttle { component, factor } => {
                write!(f, "throttle({component},{factor})")
            }
            Action::SwitchThreshold {
                component,
                name,
                value,
            } => write!(f, "switch_threshold({component},{name},{value})"),
            Action::Notify => f.write_str("notify"),
        }
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, args) = parse_call(s)?;
        Action::from_parts(&name, &args)
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Argument of a call-shaped value such as `range_rate(speed, 0, 15)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CallArg {
    Ident(String),
    Num(f64),
}

impl fmt::Display for CallArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CallArg::Ident(s) => f.write_str(s),
            CallArg::Num(n) => write!(f, "{n}"),
        }
    }
}

/// Parses `name` or `name(arg, ...)` where each arg is an identifier or number.
pub fn parse_call(s: &str) -> Result<(String, Vec<CallArg>), String> {
    let s = s.trim();
    let Some(open) = s.find('(') else {
        return if is_identifier(s) {
            Ok((s.to_string(), Vec::new()))
        } else {
            Err(format!("malformed call `{s}`"))
        };
    };
    let name = &s[..open];
    let inner = s[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| format!("malformed call `{s}`"))?;
    if !is_identifier(name) {
        return Err(format!("malformed call `{s}`"));
    }
    let mut args = Vec::new();
    for raw in inner.split(',') {
        let raw = raw.trim();
        if let Ok(n) = raw.parse::<f64>() {
            args.push(CallArg::Num(n));
        } else if is_identifier(raw) {
            args.push(CallArg::Ident(raw.to_string()));
        } else {
            return Err(format!("malformed argument `{raw}` in `{s}`"));
        }
    }
    Ok((name.to_string(), args))
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

#[derive(Debug, Clone, PartialEq)]
pub struct Requirement {
    pub id: String,
    pub description: Option<String>,
    pub category: Category,
    pub severity: Severity,
    pub children: Vec<Requirement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationSpec {
    pub id: String,
    pub action: Action,
    pub cooldown: Option<Millis>,
}

/// Technical requirement. Leaves must carry the monitoring fields
/// (checked by the validator); grouping nodes may omit them.
#[derive(Debug, Clone, PartialEq)]
pub struct TechReq {
    pub id: String,
    pub description: Option<String>,
    pub metric: Option<MetricRef>,
    pub scope: Option<String>,
    pub threshold: Option<Threshold>,
    pub window: Option<Window>,
    pub min_samples: Option<u64>,
    pub satisfies: Vec<String>,
    pub children: Vec<TechReq>,
    pub adaptations: Vec<AdaptationSpec>,
}

impl TechReq {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Ml,
    Traditional,
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentKind::Ml => "ml",
            ComponentKind::Traditional => "traditional",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub id: String,
    pub kind: ComponentKind,
    pub description: Option<String>,
    pub implements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connector {
    pub id: String,
    pub from: String,
    pub to: String,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Num(f64),
    Str(String),
    Ident(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Num(n) => write!(f, "{n}"),
            ParamValue::Str(s) => f.write_str(s),
            ParamValue::Ident(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: ParamValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub id: String,
    pub target: String,
    pub description: Option<String>,
    pub algorithm: String,
    pub framework: String,
    pub hyperparams: Vec<Param>,
    pub train_metrics: Vec<Param>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetRole {
    Training,
    Production,
}

impl fmt::Display for DatasetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetRole::Training => "training",
            DatasetRole::Production => "production",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub source: String,
    pub role: DatasetRole,
    pub baseline: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextSpec {
    pub id: String,
    pub target: String,
    pub description: Option<String>,
    pub deployment: Option<String>,
    pub sensitive_attributes: Vec<String>,
    pub datasets: Vec<Dataset>,
}

impl ContextSpec {
    /// The training dataset that carries a baseline sample, if any.
    pub fn baseline_dataset(&self) -> Option<&Dataset> {
        self.datasets
            .iter()
            .find(|d| d.role == DatasetRole::Training && d.baseline.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Declaration {
    Requirement(Requirement),
    TechReq(TechReq),
    Component(Component),
    Connector(Connector),
    Design(DesignSpec),
    Context(ContextSpec),
}

impl Declaration {
    pub fn id(&self) -> &str {
        match self {
            Declaration::Requirement(d) => &d.id,
            Declaration::TechReq(d) => &d.id,
            Declaration::Component(d) => &d.id,
            Declaration::Connector(d) => &d.id,
            Declaration::Design(d) => &d.id,
            Declaration::Context(d) => &d.id,
        }
    }
}

/// A parsed model file. Equality is structural: source locations are ignored.
#[derive(Debug, Clone)]
pub struct SourceModel {
    pub kind: ModelKind,
    pub name: String,
    pub declarations: Vec<Declaration>,
    /// Declaration id to the location of its keyword. Ids of design
    /// parameters are scoped as `Design.param`.
    pub spans: BTreeMap<String, Location>,
}

impl PartialEq for SourceModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.name == other.name
            && self.declarations == other.declarations
    }
}

impl SourceModel {
    pub fn new(kind: ModelKind, name: impl Into<String>) -> Self {
        Self {
            kind,
            name: name.into(),
            declarations: Vec::new(),
            spans: BTreeMap::new(),
        }
    }

    pub fn location_of(&self, id: &str) -> Location {
        self.spans.get(id).copied().unwrap_or(Location::new(1, 1))
    }

    pub fn requirements(&self) -> impl Iterator<Item = &Requirement> {
        self.declarations.iter().filter_map(|d| match d {
            Declaration::Requirement(r) => Some(r),
            _ => None,
        })
    }

    pub fn techreqs(&self) -> impl Iterator<Item = &TechReq> {
        self.declarations.iter().filter_map(|d| match d {
            Declaration::TechReq(t) => Some(t),
            _ => None,
        })
    }

    pub fn components(&self) -> impl Iterator<Item = &Component> {
        self.declarations.iter().filter_map(|d| match d {
            Declaration::Component(c) => Some(c),
            _ => None,
        })
    }

    pub fn connectors(&self) -> impl Iterator<Item = &Connector> {
        self.declarations.iter().filter_map(|d| match d {
            Declaration::Connector(c) => Some(c),
            _ => None,
        })
    }

    pub fn designs(&self) -> impl Iterator<Item = &DesignSpec> {
        self.declarations.iter().filter_map(|d| match d {
            Declaration::Design(x) => Some(x),
            _ => None,
        })
    }

    pub fn contexts(&self) -> impl Iterator<Item = &ContextSpec> {
        self.declarations.iter().filter_map(|d| match d {
            Declaration::Context(x) => Some(x),
            _ => None,
        })
    }
}

/// Pre-order walk over a requirement tree, yielding `(node, parent id)`.
pub fn walk_requirements<'a>(
    roots: impl IntoIterator<Item = &'a Requirement>,
) -> Vec<(&'a Requirement, Option<&'a str>)> {
    fn go<'a>(
        r: &'a Requirement,
        parent: Option<&'a str>,
        out: &mut Vec<(&'a Requirement, Option<&'a str>)>,
    ) {
        out.push((r, parent));
        for c in &r.children {
            go(c, Some(&r.id), out);
        }
    }
    let mut out = Vec::new();
    for r in roots {
        go(r, None, &mut out);
    }
    out
}

/// Pre-order walk over a technical requirement tree, yielding `(node, parent id)`.
pub fn walk_techreqs<'a>(
    roots: impl IntoIterator<Item = &'a TechReq>,
) -> Vec<(&'a TechReq, Option<&'a str>)> {
    fn go<'a>(t: &'a TechReq, parent: Option<&'a str>, out: &mut Vec<(&'a TechReq, Option<&'a str>)>) {
        out.push((t, parent));
        for c in &t.children {
            go(c, Some(&t.id), out);
        }
    }
    let mut out = Vec::new();
    for t in roots {
        go(t, None, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_overlap_rules() {
        let le = |b| Threshold::new(Comparator::Le, b);
        let ge = |b| Threshold::new(Comparator::Ge, b);
        assert!(!le(0.1).overlaps(&ge(0.5)));
        assert!(le(0.3).overlaps(&le(0.1)));
        assert!(le(0.5).overlaps(&ge(0.5)));
        assert!(!Threshold::new(Comparator::Lt, 0.5).overlaps(&ge(0.5)));
        assert!(!Threshold::new(Comparator::Ne, 1.0).overlaps(&Threshold::new(Comparator::Eq, 1.0)));
        assert!(Threshold::new(Comparator::Ne, 1.0).overlaps(&Threshold::new(Comparator::Eq, 2.0)));
    }

    #[test]
    fn textual_forms_round_trip() {
        for s in ["<=0.1", ">=0.8", "!=0", "<-2.5"] {
            assert_eq!(s.parse::<Threshold>().unwrap().to_string(), s);
        }
        for s in ["2000ev", "60s", "0.5s"] {
            assert_eq!(s.parse::<Window>().unwrap().to_string(), s);
        }
        assert_eq!("2m".parse::<Window>().unwrap(), Window::Time(Millis(120_000)));
        for s in [
            "obfuscate(image_stored)",
            "throttle(Nav,0.5)",
            "switch_threshold(Nav,max_speed,12)",
            "notify",
        ] {
            assert_eq!(s.parse::<Action>().unwrap().to_string(), s);
        }
        assert!("throttle(Nav,2)".parse::<Action>().is_err());
        assert!("<= ".parse::<Threshold>().is_err());
    }
}
