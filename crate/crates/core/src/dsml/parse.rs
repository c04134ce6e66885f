use std::collections::{BTreeMap, HashSet};

use super::lexer::Unit;
use super::model::*;
use super::syntax::{parse_document, Decl, Property, Value};
use crate::diag::{Diagnostic, Location};
use crate::metrics::MetricRef;

/// Parses one model file. On failure every collected diagnostic is returned.
pub fn parse_model(text: &str, expected: Option<ModelKind>) -> Result<SourceModel, Vec<Diagnostic>> {
    let doc = parse_document(text).map_err(|d| vec![d])?;
    let Some(kind) = ModelKind::from_keyword(&doc.kind) else {
        return Err(vec![Diagnostic::error(
            "unknown-kind",
            format!(
                "unknown model kind `{}` (expected hcr, tech, arch, design or context)",
                doc.kind
            ),
            doc.kind_loc,
        )]);
    };
    if let Some(expected) = expected {
        if expected != kind {
            return Err(vec![Diagnostic::error(
                "kind-mismatch",
                format!("expected a {expected} model, found {kind}"),
                doc.kind_loc,
            )
            .in_model(kind)]);
        }
    }

    let mut b = Builder {
        kind,
        errors: Vec::new(),
        spans: BTreeMap::new(),
        seen: HashSet::new(),
    };
    let mut declarations = Vec::new();
    for decl in &doc.decls {
        if let Some(d) = b.top_level(decl) {
            declarations.push(d);
        }
    }
    if !b.errors.is_empty() {
        return Err(b.errors.into_iter().map(|d| d.in_model(kind)).collect());
    }
    Ok(SourceModel {
        kind,
        name: doc.name,
        declarations,
        spans: b.spans,
    })
}

struct Builder {
    kind: ModelKind,
    errors: Vec<Diagnostic>,
    spans: BTreeMap<String, Location>,
    seen: HashSet<String>,
}

type Props<'a> = BTreeMap<&'a str, &'a Property>;

impl Builder {
    fn err(&mut self, code: &str, msg: impl Into<String>, loc: Location) {
        self.errors.push(Diagnostic::error(code, msg, loc));
    }

    fn register(&mut self, key: String, loc: Location) {
        if !self.seen.insert(key.clone()) {
            self.err("duplicate-id", format!("duplicate identifier `{key}`"), loc);
        } else {
            self.spans.insert(key, loc);
        }
    }

    fn top_level(&mut self, decl: &Decl) -> Option<Declaration> {
        let allowed: &[&str] = match self.kind {
            ModelKind::Hcr => &["requirement"],
            ModelKind::Tech => &["techreq"],
            ModelKind::Arch => &["component", "connector"],
            ModelKind::Design => &["design"],
            ModelKind::Context => &["context"],
        };
        if !allowed.contains(&decl.keyword.as_str()) {
            self.unknown_keyword(decl, allowed);
            return None;
        }
        match decl.keyword.as_str() {
            "requirement" => self.requirement(decl).map(Declaration::Requirement),
            "techreq" => self.techreq(decl).map(Declaration::TechReq),
            "component" => self.component(decl).map(Declaration::Component),
            "connector" => self.connector(decl).map(Declaration::Connector),
            "design" => self.design(decl).map(Declaration::Design),
            _ => self.context(decl).map(Declaration::Context),
        }
    }

    fn unknown_keyword(&mut self, decl: &Decl, allowed: &[&str]) {
        self.err(
            "unknown-keyword",
            format!(
                "unknown keyword `{}` in {} model (expected {})",
                decl.keyword,
                self.kind,
                allowed.join(", ")
            ),
            decl.loc,
        );
    }

    /// Collects properties, reporting unknown and repeated keys.
    fn props<'a>(&mut self, decl: &'a Decl, allowed: &[&str]) -> Props<'a> {
        let mut out = Props::new();
        for p in decl.properties() {
            if !allowed.contains(&p.key.as_str()) {
                self.err(
                    "unknown-property",
                    format!(
                        "unknown property `{}` for {} (expected {})",
                        p.key,
                        decl.keyword,
                        allowed.join(", ")
                    ),
                    p.loc,
                );
            } else if out.insert(p.key.as_str(), p).is_some() {
                self.err(
                    "duplicate-property",
                    format!("property `{}` given twice", p.key),
                    p.loc,
                );
            }
        }
        out
    }

    fn nested<'a>(&mut self, decl: &'a Decl, allowed: &[&str]) -> Vec<&'a Decl> {
        let mut out = Vec::new();
        for c in decl.children() {
            if allowed.contains(&c.keyword.as_str()) {
                out.push(c);
            } else {
                let msg = if allowed.is_empty() {
                    format!("`{}` cannot contain nested declarations", decl.keyword)
                } else {
                    format!(
                        "unknown keyword `{}` inside {} (expected {})",
                        c.keyword,
                        decl.keyword,
                        allowed.join(", ")
                    )
                };
                self.err("unknown-keyword", msg, c.loc);
            }
        }
        out
    }

    fn missing(&mut self, decl: &Decl, key: &str) {
        self.err(
            "missing-property",
            format!("{} `{}` is missing required property `{key}`", decl.keyword, decl.id),
            decl.loc,
        );
    }

    fn single<'a>(&mut self, p: &'a Property) -> Option<&'a Value> {
        if p.values.len() == 1 {
            Some(&p.values[0])
        } else {
            self.err(
                "invalid-value",
                format!("property `{}` takes a single value", p.key),
                p.loc,
            );
            None
        }
    }

    fn text(&mut self, p: &Property) -> Option<String> {
        match self.single(p)? {
            Value::Str(s) => Some(s.clone()),
            v => {
                let msg = format!("property `{}` expects a string, found {}", p.key, v.describe());
                self.err("invalid-value", msg, p.loc);
                None
            }
        }
    }

    fn ident(&mut self, p: &Property) -> Option<String> {
        match self.single(p)? {
            Value::Ident(s) => Some(s.clone()),
            v => {
                let msg = format!("property `{}` expects an identifier, found {}", p.key, v.describe());
                self.err("invalid-value", msg, p.loc);
                None
            }
        }
    }

    fn ident_list(&mut self, p: &Property) -> Option<Vec<String>> {
        let mut out = Vec::new();
        for v in &p.values {
            match v {
                Value::Ident(s) => out.push(s.clone()),
                v => {
                    let msg = format!("property `{}` expects identifiers, found {}", p.key, v.describe());
                    self.err("invalid-value", msg, p.loc);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn count(&mut self, p: &Property) -> Option<u64> {
        match self.single(p)? {
            Value::Num(n) if *n >= 0.0 && n.fract() == 0.0 => Some(*n as u64),
            _ => {
                let msg = format!("property `{}` expects a non-negative integer", p.key);
                self.err("invalid-value", msg, p.loc);
                None
            }
        }
    }

    fn threshold(&mut self, p: &Property) -> Option<Threshold> {
        match p.values.as_slice() {
            [Value::Cmp(c, n)] => Some(Threshold::new(*c, *n)),
            _ => {
                self.err(
                    "malformed-threshold",
                    "malformed threshold: expected `<comparator> <number>`",
                    p.loc,
                );
                None
            }
        }
    }

    fn window(&mut self, p: &Property) -> Option<Window> {
        match p.values.as_slice() {
            [Value::Quantity(n, Unit::Events)] if *n >= 0.0 && n.fract() == 0.0 => {
                Some(Window::Count(*n as u64))
            }
            [Value::Quantity(n, unit)] if *n >= 0.0 && *unit != Unit::Events => {
                Some(Window::Time(Millis::from_secs_f64(*n * unit_secs(*unit))))
            }
            _ => {
                self.err(
                    "malformed-window",
                    "malformed window: expected `<count>ev` or a duration such as `60s`",
                    p.loc,
                );
                None
            }
        }
    }

    fn duration(&mut self, p: &Property) -> Option<Millis> {
        match p.values.as_slice() {
            [Value::Quantity(n, unit)] if *n >= 0.0 && *unit != Unit::Events => {
                Some(Millis::from_secs_f64(*n * unit_secs(*unit)))
            }
            _ => {
                let msg = format!("property `{}` expects a duration such as `60s`", p.key);
                self.err("invalid-value", msg, p.loc);
                None
            }
        }
    }

    fn call(&mut self, p: &Property) -> Option<(String, Vec<CallArg>)> {
        match self.single(p)? {
            Value::Ident(name) => Some((name.clone(), Vec::new())),
            Value::Call(name, args) => {
                let mut out = Vec::new();
                for a in args {
                    match a {
                        Value::Ident(s) => out.push(CallArg::Ident(s.clone())),
                        Value::Num(n) => out.push(CallArg::Num(*n)),
                        other => {
                            let msg = format!(
                                "argument of `{name}` must be an identifier or number, found {}",
                                other.describe()
                            );
                            self.err("invalid-value", msg, p.loc);
                            return None;
                        }
                    }
                }
                Some((name.clone(), out))
            }
            v => {
                let msg = format!("property `{}` expects a name or call, found {}", p.key, v.describe());
                self.err("invalid-value", msg, p.loc);
                None
            }
        }
    }

    fn requirement(&mut self, decl: &Decl) -> Option<Requirement> {
        self.register(decl.id.clone(), decl.loc);
        let props = self.props(decl, &["description", "category", "severity"]);
        let description = props.get("description").and_then(|p| self.text(p));
        let category = match props.get("category") {
            None => {
                self.missing(decl, "category");
                None
            }
            Some(p) => match self.single(p) {
                Some(Value::Ident(s)) => match Category::from_keyword(s) {
                    Some(c) => Some(c),
                    None => {
                        let msg = format!(
                            "unknown category `{s}` (expected fairness, privacy, safety, wellbeing, transparency, values or other(\"...\"))"
                        );
                        self.err("invalid-value", msg, p.loc);
                        None
                    }
                },
                Some(Value::Call(name, args)) if name == "other" => match args.as_slice() {
                    [Value::Str(s)] => Some(Category::Other(s.clone())),
                    _ => {
                        self.err("invalid-value", "other(...) takes one string", p.loc);
                        None
                    }
                },
                Some(_) => {
                    self.err("invalid-value", "malformed category", p.loc);
                    None
                }
                None => None,
            },
        };
        let severity = match props.get("severity") {
            None => {
                self.missing(decl, "severity");
                None
            }
            Some(p) => self.ident(p).and_then(|s| match s.parse::<Severity>() {
                Ok(s) => Some(s),
                Err(e) => {
                    self.err("invalid-value", e, p.loc);
                    None
                }
            }),
        };
        let children: Vec<_> = self
            .nested(decl, &["requirement"])
            .into_iter()
            .filter_map(|c| self.requirement(c))
            .collect();
        Some(Requirement {
            id: decl.id.clone(),
            description,
            category: category?,
            severity: severity?,
            children,
        })
    }

    fn techreq(&mut self, decl: &Decl) -> Option<TechReq> {
        self.register(decl.id.clone(), decl.loc);
        let props = self.props(
            decl,
            &[
                "description",
                "metric",
                "scope",
                "threshold",
                "window",
                "min_samples",
                "satisfies",
            ],
        );
        let description = props.get("description").and_then(|p| self.text(p));
        let metric = props.get("metric").and_then(|p| {
            let (name, args) = self.call(p)?;
            match MetricRef::from_parts(&name, &args) {
                Ok(m) => Some(m),
                Err(e) => {
                    self.err("invalid-metric", e, p.loc);
                    None
                }
            }
        });
        let scope = props.get("scope").and_then(|p| self.ident(p));
        let threshold = props.get("threshold").and_then(|p| self.threshold(p));
        let window = props.get("window").and_then(|p| self.window(p));
        let min_samples = props.get("min_samples").and_then(|p| self.count(p));
        let satisfies = props
            .get("satisfies")
            .and_then(|p| self.ident_list(p))
            .unwrap_or_default();

        let mut children = Vec::new();
        let mut adaptations = Vec::new();
        for c in self.nested(decl, &["techreq", "adaptation"]) {
            if c.keyword == "techreq" {
                children.extend(self.techreq(c));
            } else {
                adaptations.extend(self.adaptation(c));
            }
        }
        Some(TechReq {
            id: decl.id.clone(),
            description,
            metric,
            scope,
            threshold,
            window,
            min_samples,
            satisfies,
            children,
            adaptations,
        })
    }

    fn adaptation(&mut self, decl: &Decl) -> Option<AdaptationSpec> {
        self.register(decl.id.clone(), decl.loc);
        let props = self.props(decl, &["action", "cooldown"]);
        self.nested(decl, &[]);
        let action = match props.get("action") {
            None => {
                self.missing(decl, "action");
                None
            }
            Some(p) => self.call(p).and_then(|(name, args)| {
                match Action::from_parts(&name, &args) {
                    Ok(a) => Some(a),
                    Err(e) => {
                        self.err("invalid-action", e, p.loc);
                        None
                    }
                }
            }),
        };
        let cooldown = props.get("cooldown").and_then(|p| self.duration(p));
        Some(AdaptationSpec {
            id: decl.id.clone(),
            action: action?,
            cooldown,
        })
    }

    fn component(&mut self, decl: &Decl) -> Option<Component> {
        self.register(decl.id.clone(), decl.loc);
        let props = self.props(decl, &["description", "kind", "implements"]);
        self.nested(decl, &[]);
        let description = props.get("description").and_then(|p| self.text(p));
        let kind = match props.get("kind") {
            None => {
                self.missing(decl, "kind");
                None
            }
            Some(p) => match self.ident(p).as_deref() {
                Some("ml") => Some(ComponentKind::Ml),
                Some("traditional") => Some(ComponentKind::Traditional),
                Some(other) => {
                    let msg = format!("unknown component kind `{other}` (expected ml or traditional)");
                    self.err("invalid-value", msg, p.loc);
                    None
                }
                None => None,
            },
        };
        let implements = props
            .get("implements")
            .and_then(|p| self.ident_list(p))
            .unwrap_or_default();
        Some(Component {
            id: decl.id.clone(),
            kind: kind?,
            description,
            implements,
        })
    }

    fn connector(&mut self, decl: &Decl) -> Option<Connector> {
        self.register(decl.id.clone(), decl.loc);
        let props = self.props(decl, &["description", "from", "to"]);
        self.nested(decl, &[]);
        let description = props.get("description").and_then(|p| self.text(p));
        let from = self.required_ident(decl, &props, "from");
        let to = self.required_ident(decl, &props, "to");
        Some(Connector {
            id: decl.id.clone(),
            from: from?,
            to: to?,
            description,
        })
    }

    fn required_ident(&mut self, decl: &Decl, props: &Props<'_>, key: &str) -> Option<String> {
        match props.get(key) {
            None => {
                self.missing(decl, key);
                None
            }
            Some(p) => self.ident(p),
        }
    }

    fn required_text(&mut self, decl: &Decl, props: &Props<'_>, key: &str) -> Option<String> {
        match props.get(key) {
            None => {
                self.missing(decl, key);
                None
            }
            Some(p) => self.text(p),
        }
    }

    fn design(&mut self, decl: &Decl) -> Option<DesignSpec> {
        self.register(decl.id.clone(), decl.loc);
        let props = self.props(decl, &["description", "for", "algorithm", "framework"]);
        let description = props.get("description").and_then(|p| self.text(p));
        let target = self.required_ident(decl, &props, "for");
        let algorithm = self.required_text(decl, &props, "algorithm");
        let framework = self.required_text(decl, &props, "framework");
        let mut hyperparams = Vec::new();
        let mut train_metrics = Vec::new();
        for c in self.nested(decl, &["hyperparam", "trainmetric"]) {
            self.register(format!("{}.{}", decl.id, c.id), c.loc);
            let cprops = self.props(c, &["value"]);
            self.nested(c, &[]);
            let value = match cprops.get("value") {
                None => {
                    self.missing(c, "value");
                    None
                }
                Some(p) => match self.single(p) {
                    Some(Value::Num(n)) => Some(ParamValue::Num(*n)),
                    Some(Value::Str(s)) => Some(ParamValue::Str(s.clone())),
                    Some(Value::Ident(s)) => Some(ParamValue::Ident(s.clone())),
                    Some(v) => {
                        let msg = format!("parameter value must be a number, string or identifier, found {}", v.describe());
                        self.err("invalid-value", msg, p.loc);
                        None
                    }
                    None => None,
                },
            };
            if let Some(value) = value {
                let param = Param {
                    name: c.id.clone(),
                    value,
                };
                if c.keyword == "hyperparam" {
                    hyperparams.push(param);
                } else {
                    train_metrics.push(param);
                }
            }
        }
        Some(DesignSpec {
            id: decl.id.clone(),
            target: target?,
            description,
            algorithm: algorithm?,
            framework: framework?,
            hyperparams,
            train_metrics,
        })
    }

    fn context(&mut self, decl: &Decl) -> Option<ContextSpec> {
        self.register(decl.id.clone(), decl.loc);
        let props = self.props(
            decl,
            &["description", "for", "deployment", "sensitive_attributes"],
        );
        let description = props.get("description").and_then(|p| self.text(p));
        let target = self.required_ident(decl, &props, "for");
        let deployment = props.get("deployment").and_then(|p| self.text(p));
        let sensitive_attributes = props
            .get("sensitive_attributes")
            .and_then(|p| self.ident_list(p))
            .unwrap_or_default();
        let mut datasets = Vec::new();
        for c in self.nested(decl, &["dataset"]) {
            self.register(c.id.clone(), c.loc);
            let dprops = self.props(c, &["source", "role", "baseline"]);
            self.nested(c, &[]);
            let source = self.required_text(c, &dprops, "source");
            let role = match dprops.get("role") {
                None => {
                    self.missing(c, "role");
                    None
                }
                Some(p) => match self.ident(p).as_deref() {
                    Some("training") => Some(DatasetRole::Training),
                    Some("production") => Some(DatasetRole::Production),
                    Some(other) => {
                        let msg = format!("unknown dataset role `{other}` (expected training or production)");
                        self.err("invalid-value", msg, p.loc);
                        None
                    }
                    None => None,
                },
            };
            let baseline = dprops.get("baseline").and_then(|p| self.text(p));
            if let (Some(source), Some(role)) = (source, role) {
                datasets.push(Dataset {
                    name: c.id.clone(),
                    source,
                    role,
                    baseline,
                });
            }
        }
        Some(ContextSpec {
            id: decl.id.clone(),
            target: target?,
            description,
            deployment,
            sensitive_attributes,
            datasets,
        })
    }
}

fn unit_secs(unit: Unit) -> f64 {
    match unit {
        Unit::Seconds => 1.0,
        Unit::Minutes => 60.0,
        Unit::Hours => 3600.0,
        Unit::Events => 0.0,
    }
}
