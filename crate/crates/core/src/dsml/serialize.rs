use std::fmt::Write as _;

use super::lexer::Unit;
use super::model::*;
use super::syntax::{write_property, Value};

/// Canonical text of a model: fixed property order, two-space indentation,
/// one blank line between top-level declarations, comments dropped.
pub fn serialize_model(model: &SourceModel) -> String {
    let mut out = format!("model {} {};\n", model.kind, model.name);
    for decl in &model.declarations {
        out.push('\n');
        match decl {
            Declaration::Requirement(r) => requirement(&mut out, 0, r),
            Declaration::TechReq(t) => techreq(&mut out, 0, t),
            Declaration::Component(c) => component(&mut out, c),
            Declaration::Connector(c) => connector(&mut out, c),
            Declaration::Design(d) => design(&mut out, d),
            Declaration::Context(c) => context(&mut out, c),
        }
    }
    out
}

fn open(out: &mut String, indent: usize, keyword: &str, id: &str) {
    let _ = writeln!(out, "{:indent$}{keyword} {id} {{", "", indent = indent);
}

fn close(out: &mut String, indent: usize) {
    let _ = writeln!(out, "{:indent$}}}", "", indent = indent);
}

fn prop(out: &mut String, indent: usize, key: &str, value: Value) {
    write_property(out, indent + 2, key, std::slice::from_ref(&value));
}

fn opt_text(out: &mut String, indent: usize, key: &str, value: &Option<String>) {
    if let Some(v) = value {
        prop(out, indent, key, Value::Str(v.clone()));
    }
}

fn idents(out: &mut String, indent: usize, key: &str, ids: &[String]) {
    if !ids.is_empty() {
        let values: Vec<Value> = ids.iter().cloned().map(Value::Ident).collect();
        write_property(out, indent + 2, key, &values);
    }
}

fn call_value(name: &str, args: Vec<CallArg>) -> Value {
    if args.is_empty() {
        Value::Ident(name.to_string())
    } else {
        Value::Call(
            name.to_string(),
            args.into_iter()
                .map(|a| match a {
                    CallArg::Ident(s) => Value::Ident(s),
                    CallArg::Num(n) => Value::Num(n),
                })
                .collect(),
        )
    }
}

fn action_value(action: &Action) -> Value {
    let id = |s: &String| CallArg::Ident(s.clone());
    let args = match action {
        Action::Obfuscate { field } => vec![id(field)],
        Action::Shutdown { component } => vec![id(component)],
        Action::Throttle { component, factor } => vec![id(component), CallArg::Num(*factor)],
        Action::SwitchThreshold {
            component,
            name,
            value,
        } => vec![id(component), id(name), CallArg::Num(*value)],
        Action::Notify => Vec::new(),
    };
    call_value(action.name(), args)
}

fn duration_value(ms: Millis) -> Value {
    Value::Quantity(ms.0 as f64 / 1000.0, Unit::Seconds)
}

fn requirement(out: &mut String, indent: usize, r: &Requirement) {
    open(out, indent, "requirement", &r.id);
    opt_text(out, indent, "description", &r.description);
    let category = match &r.category {
        Category::Other(s) => Value::Call("other".into(), vec![Value::Str(s.clone())]),
        c => Value::Ident(c.to_string()),
    };
    prop(out, indent, "category", category);
    prop(out, indent, "severity", Value::Ident(r.severity.to_string()));
    for c in &r.children {
        requirement(out, indent + 2, c);
    }
    close(out, indent);
}

fn techreq(out: &mut String, indent: usize, t: &TechReq) {
    open(out, indent, "techreq", &t.id);
    opt_text(out, indent, "description", &t.description);
    if let Some(m) = &t.metric {
        prop(out, indent, "metric", call_value(m.name(), m.args()));
    }
    if let Some(s) = &t.scope {
        prop(out, indent, "scope", Value::Ident(s.clone()));
    }
    if let Some(th) = &t.threshold {
        prop(out, indent, "threshold", Value::Cmp(th.comparator, th.bound));
    }
    if let Some(w) = &t.window {
        let v = match w {
            Window::Count(n) => Value::Quantity(*n as f64, Unit::Events),
            Window::Time(ms) => duration_value(*ms),
        };
        prop(out, indent, "window", v);
    }
    if let Some(n) = t.min_samples {
        prop(out, indent, "min_samples", Value::Num(n as f64));
    }
    idents(out, indent, "satisfies", &t.satisfies);
    for a in &t.adaptations {
        open(out, indent + 2, "adaptation", &a.id);
        prop(out, indent + 2, "action", action_value(&a.action));
        if let Some(c) = a.cooldown {
            prop(out, indent + 2, "cooldown", duration_value(c));
        }
        close(out, indent + 2);
    }
    for c in &t.children {
        techreq(out, indent + 2, c);
    }
    close(out, indent);
}

fn component(out: &mut String, c: &Component) {
    open(out, 0, "component", &c.id);
    opt_text(out, 0, "description", &c.description);
    prop(out, 0, "kind", Value::Ident(c.kind.to_string()));
    idents(out, 0, "implements", &c.implements);
    close(out, 0);
}

fn connector(out: &mut String, c: &Connector) {
    open(out, 0, "connector", &c.id);
    opt_text(out, 0, "description", &c.description);
    prop(out, 0, "from", Value::Ident(c.from.clone()));
    prop(out, 0, "to", Value::Ident(c.to.clone()));
    close(out, 0);
}

fn param_value(v: &ParamValue) -> Value {
    match v {
        ParamValue::Num(n) => Value::Num(*n),
        ParamValue::Str(s) => Value::Str(s.clone()),
        ParamValue::Ident(s) => Value::Ident(s.clone()),
    }
}

fn design(out: &mut String, d: &DesignSpec) {
    open(out, 0, "design", &d.id);
    opt_text(out, 0, "description", &d.description);
    prop(out, 0, "for", Value::Ident(d.target.clone()));
    prop(out, 0, "algorithm", Value::Str(d.algorithm.clone()));
    prop(out, 0, "framework", Value::Str(d.framework.clone()));
    for (keyword, params) in [("hyperparam", &d.hyperparams), ("trainmetric", &d.train_metrics)] {
        for p in params {
            open(out, 2, keyword, &p.name);
            prop(out, 2, "value", param_value(&p.value));
            close(out, 2);
        }
    }
    close(out, 0);
}

fn context(out: &mut String, c: &ContextSpec) {
    open(out, 0, "context", &c.id);
    opt_text(out, 0, "description", &c.description);
    prop(out, 0, "for", Value::Ident(c.target.clone()));
    opt_text(out, 0, "deployment", &c.deployment);
    idents(out, 0, "sensitive_attributes", &c.sensitive_attributes);
    for d in &c.datasets {
        open(out, 2, "dataset", &d.name);
        prop(out, 2, "source", Value::Str(d.source.clone()));
        prop(out, 2, "role", Value::Ident(d.role.to_string()));
        opt_text(out, 2, "baseline", &d.baseline);
        close(out, 2);
    }
    close(out, 0);
}
