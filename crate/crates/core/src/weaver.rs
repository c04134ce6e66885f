//! Cross-links the five models into one traced graph.
//!
//! Node keys are qualified as `<model-name>.<decl-id>`. A reference written
//! in a model is first looked up as a local id in the model kind it must
//! point to, then as a qualified id; anything else is a dangling reference.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::{has_errors, Diagnostic, Location};
use crate::dsml::{
    walk_requirements, walk_techreqs, Component, ComponentKind, ContextSpec, DesignSpec,
    ModelKind, Requirement, SourceModel, TechReq,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    /// TechReq -> Requirement
    Satisfies,
    /// Component -> TechReq
    Implements,
    /// Component -> DesignSpec
    DesignedBy,
    /// Component -> ContextSpec
    ContextualizedBy,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Satisfies => "SATISFIES",
            EdgeKind::Implements => "IMPLEMENTS",
            EdgeKind::DesignedBy => "DESIGNED_BY",
            EdgeKind::ContextualizedBy => "CONTEXTUALIZED_BY",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub kind: EdgeKind,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeDecl {
    Requirement(Requirement),
    TechReq(TechReq),
    Component(Component),
    Connector,
    Design(DesignSpec),
    Context(ContextSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub qualified: String,
    pub id: String,
    pub kind: ModelKind,
    pub decl: NodeDecl,
    /// Enclosing requirement or techreq, for nested declarations.
    pub parent: Option<usize>,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WovenModel {
    /// One model per kind, indexed by `ModelKind::index`.
    pub models: Vec<SourceModel>,
    /// All declarations in model-kind order, each in declaration pre-order.
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub diagnostics: Vec<Diagnostic>,
    qualified_index: HashMap<String, usize>,
    local_index: Vec<HashMap<String, usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceChain {
    pub requirement: String,
    pub tech: Vec<String>,
    pub components: Vec<String>,
    pub designs: Vec<String>,
    pub contexts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("unknown requirement `{0}`")]
    UnknownRequirement(String),
}

impl WovenModel {
    pub fn model(&self, kind: ModelKind) -> &SourceModel {
        &self.models[kind.index()]
    }

    pub fn is_compilable(&self) -> bool {
        !has_errors(&self.diagnostics)
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn by_qualified(&self, qid: &str) -> Option<usize> {
        self.qualified_index.get(qid).copied()
    }

    pub fn by_local(&self, kind: ModelKind, id: &str) -> Option<usize> {
        self.local_index[kind.index()].get(id).copied()
    }

    /// Resolves a reference written in some model that must point into `kind`.
    pub fn resolve(&self, kind: ModelKind, reference: &str) -> Option<usize> {
        self.by_local(kind, reference).or_else(|| {
            self.by_qualified(reference)
                .filter(|&i| self.nodes[i].kind == kind)
        })
    }

    pub fn targets(&self, from: usize, kind: EdgeKind) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter(|e| e.kind == kind && e.from == from)
            .map(|e| e.to)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn sources(&self, to: usize, kind: EdgeKind) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter(|e| e.kind == kind && e.to == to)
            .map(|e| e.from)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The requirement and its ancestors, most specific first.
    pub fn requirement_path(&self, req: usize) -> Vec<usize> {
        let mut path = vec![req];
        let mut cur = req;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path
    }

    pub fn trace(&self, requirement_id: &str) -> Result<TraceChain, TraceError> {
        let req = self
            .resolve(ModelKind::Hcr, requirement_id)
            .filter(|&i| matches!(self.nodes[i].decl, NodeDecl::Requirement(_)))
            .ok_or_else(|| TraceError::UnknownRequirement(requirement_id.to_string()))?;
        let tech = self.sources(req, EdgeKind::Satisfies);
        let mut components: Vec<usize> = tech
            .iter()
            .flat_map(|&t| self.sources(t, EdgeKind::Implements))
            .collect();
        components.sort_unstable();
        components.dedup();
        let collect = |kind: EdgeKind| {
            let mut v: Vec<usize> = components
                .iter()
                .flat_map(|&c| self.targets(c, kind))
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let designs = collect(EdgeKind::DesignedBy);
        let contexts = collect(EdgeKind::ContextualizedBy);
        let ids = |v: &[usize]| v.iter().map(|&i| self.nodes[i].id.clone()).collect();
        Ok(TraceChain {
            requirement: self.nodes[req].id.clone(),
            tech: ids(&tech),
            components: ids(&components),
            designs: ids(&designs),
            contexts: ids(&contexts),
        })
    }

    /// Leaf requirements no technical requirement satisfies.
    pub fn unmonitored_requirements(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| {
                matches!(&n.decl, NodeDecl::Requirement(r) if r.children.is_empty())
                    && self.sources(*i, EdgeKind::Satisfies).is_empty()
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Indented text of a trace chain with each declaration's description
    /// and the datasets of each context.
    pub fn render_trace(&self, chain: &TraceChain) -> String {
        let mut out = String::new();
        let line = |out: &mut String, indent: usize, label: &str, kind: ModelKind, id: &str| {
            let description = self.by_local(kind, id).and_then(|i| match &self.nodes[i].decl {
                NodeDecl::Requirement(r) => r.description.clone(),
                NodeDecl::TechReq(t) => t.description.clone(),
                NodeDecl::Component(c) => c.description.clone(),
                NodeDecl::Design(d) => d.description.clone(),
                NodeDecl::Context(c) => c.description.clone(),
                NodeDecl::Connector => None,
            });
            out.push_str(&format!("{:indent$}{label} {id}", "", indent = indent));
            if let Some(d) = description {
                out.push_str(&format!(" {d:?}"));
            }
            out.push('\n');
        };
        line(&mut out, 0, "requirement", ModelKind::Hcr, &chain.requirement);
        for t in &chain.tech {
            line(&mut out, 2, "tech", ModelKind::Tech, t);
        }
        for c in &chain.components {
            line(&mut out, 4, "component", ModelKind::Arch, c);
        }
        for d in &chain.designs {
            line(&mut out, 6, "design", ModelKind::Design, d);
        }
        for c in &chain.contexts {
            line(&mut out, 6, "context", ModelKind::Context, c);
            if let Some(NodeDecl::Context(ctx)) = self.by_local(ModelKind::Context, c).map(|i| &self.nodes[i].decl) {
                for ds in &ctx.datasets {
                    out.push_str(&format!("{:8}dataset {} {} {:?}\n", "", ds.name, ds.role, ds.source));
                }
            }
        }
        out
    }
}

/// Weaves exactly one model of each kind. Fails on a missing or repeated
/// kind and on qualified ids declared twice; every other finding is
/// recorded in `WovenModel::diagnostics`.
pub fn weave(models: &[SourceModel]) -> Result<WovenModel, Vec<Diagnostic>> {
    let mut slots: Vec<Option<&SourceModel>> = vec![None; 5];
    let mut fatal = Vec::new();
    for m in models {
        let slot = &mut slots[m.kind.index()];
        if slot.is_some() {
            fatal.push(
                Diagnostic::error(
                    "duplicate-model",
                    format!("more than one {} model given", m.kind),
                    Location::new(1, 1),
                )
                .in_model(m.kind),
            );
        } else {
            *slot = Some(m);
        }
    }
    for kind in ModelKind::ALL {
        if slots[kind.index()].is_none() {
            fatal.push(Diagnostic::error(
                "missing-model",
                format!("missing {kind} model"),
                Location::new(1, 1),
            ));
        }
    }
    if !fatal.is_empty() {
        return Err(fatal);
    }
    let models: Vec<SourceModel> = slots.into_iter().flatten().cloned().collect();

    let mut nodes = Vec::new();
    for m in &models {
        collect_nodes(m, &mut nodes);
    }
    let mut qualified_index = HashMap::new();
    let mut local_index = vec![HashMap::new(); 5];
    for (i, n) in nodes.iter().enumerate() {
        if qualified_index.insert(n.qualified.clone(), i).is_some() {
            fatal.push(
                Diagnostic::error(
                    "duplicate-qualified-id",
                    format!("qualified id `{}` declared more than once", n.qualified),
                    n.location,
                )
                .in_model(n.kind),
            );
        }
        local_index[n.kind.index()].entry(n.id.clone()).or_insert(i);
    }
    if !fatal.is_empty() {
        return Err(fatal);
    }

    let mut woven = WovenModel {
        models,
        nodes,
        edges: Vec::new(),
        diagnostics: Vec::new(),
        qualified_index,
        local_index,
    };
    link(&mut woven);
    if woven.is_compilable() {
        let conflicts = detect_conflicts(&woven);
        woven.diagnostics.extend(conflicts);
    }
    Ok(woven)
}

fn collect_nodes(m: &SourceModel, nodes: &mut Vec<Node>) {
    let qualify = |id: &str| format!("{}.{}", m.name, id);
    let push = |nodes: &mut Vec<Node>, id: &str, decl: NodeDecl, parent: Option<usize>| {
        nodes.push(Node {
            qualified: qualify(id),
            id: id.to_string(),
            kind: m.kind,
            decl,
            parent,
            location: m.location_of(id),
        });
        nodes.len() - 1
    };
    let mut parents: HashMap<String, usize> = HashMap::new();
    for (r, parent) in walk_requirements(m.requirements()) {
        let p = parent.and_then(|p| parents.get(p).copied());
        let idx = push(nodes, &r.id, NodeDecl::Requirement(r.clone()), p);
        parents.insert(r.id.clone(), idx);
    }
    for (t, parent) in walk_techreqs(m.techreqs()) {
        let p = parent.and_then(|p| parents.get(p).copied());
        let idx = push(nodes, &t.id, NodeDecl::TechReq(t.clone()), p);
        parents.insert(t.id.clone(), idx);
    }
    for d in &m.declarations {
        use crate::dsml::Declaration as D;
        match d {
            D::Component(c) => {
                push(nodes, &c.id, NodeDecl::Component(c.clone()), None);
            }
            D::Connector(c) => {
                push(nodes, &c.id, NodeDecl::Connector, None);
            }
            D::Design(ds) => {
                push(nodes, &ds.id, NodeDecl::Design(ds.clone()), None);
            }
            D::Context(c) => {
                push(nodes, &c.id, NodeDecl::Context(c.clone()), None);
            }
            D::Requirement(_) | D::TechReq(_) => {}
        }
    }
}

fn dangling(reference: &str, role: &str, owner: &Node) -> Diagnostic {
    Diagnostic::error(
        "dangling-reference",
        format!("dangling reference {reference} in {role} of `{}`", owner.id),
        owner.location,
    )
    .in_model(owner.kind)
}

fn link(w: &mut WovenModel) {
    let mut edges = Vec::new();
    let mut diags = Vec::new();
    let is_component = |w: &WovenModel, i: usize| matches!(w.nodes[i].decl, NodeDecl::Component(_));

    for (i, node) in w.nodes.iter().enumerate() {
        match &node.decl {
            NodeDecl::TechReq(t) => {
                for r in &t.satisfies {
                    match w
                        .resolve(ModelKind::Hcr, r)
                        .filter(|&j| matches!(w.nodes[j].decl, NodeDecl::Requirement(_)))
                    {
                        Some(j) => edges.push(Edge {
                            kind: EdgeKind::Satisfies,
                            from: i,
                            to: j,
                        }),
                        None => diags.push(dangling(r, "satisfies", node)),
                    }
                }
                if let Some(scope) = &t.scope {
                    if w
                        .resolve(ModelKind::Arch, scope)
                        .filter(|&j| is_component(w, j))
                        .is_none()
                    {
                        diags.push(
                            Diagnostic::error(
                                "unknown-scope",
                                format!("techreq `{}` is scoped to undeclared component {scope}", t.id),
                                node.location,
                            )
                            .in_model(node.kind),
                        );
                    }
                }
                for a in &t.adaptations {
                    if let Some(c) = a.action.target_component() {
                        if w.resolve(ModelKind::Arch, c).filter(|&j| is_component(w, j)).is_none() {
                            diags.push(dangling(c, "adaptation action", node));
                        }
                    }
                }
            }
            NodeDecl::Component(c) => {
                for t in &c.implements {
                    match w
                        .resolve(ModelKind::Tech, t)
                        .filter(|&j| matches!(w.nodes[j].decl, NodeDecl::TechReq(_)))
                    {
                        Some(j) => edges.push(Edge {
                            kind: EdgeKind::Implements,
                            from: i,
                            to: j,
                        }),
                        None => diags.push(dangling(t, "implements", node)),
                    }
                }
            }
            NodeDecl::Connector => {
                let model = w.model(ModelKind::Arch);
                if let Some(conn) = model.connectors().find(|c| c.id == node.id) {
                    for (end, role) in [(&conn.from, "from"), (&conn.to, "to")] {
                        if w.resolve(ModelKind::Arch, end).filter(|&j| is_component(w, j)).is_none() {
                            diags.push(dangling(end, role, node));
                        }
                    }
                }
            }
            NodeDecl::Design(d) => {
                match w
                    .resolve(ModelKind::Arch, &d.target)
                    .filter(|&j| is_component(w, j))
                {
                    Some(j) => {
                        if let NodeDecl::Component(c) = &w.nodes[j].decl {
                            if c.kind != ComponentKind::Ml {
                                diags.push(
                                    Diagnostic::error(
                                        "not-ml-component",
                                        format!(
                                            "design `{}` targets `{}`, which is not an ml component",
                                            d.id, c.id
                                        ),
                                        node.location,
                                    )
                                    .in_model(node.kind),
                                );
                            }
                        }
                        edges.push(Edge {
                            kind: EdgeKind::DesignedBy,
                            from: j,
                            to: i,
                        });
                    }
                    None => diags.push(dangling(&d.target, "for", node)),
                }
            }
            NodeDecl::Context(c) => {
                match w
                    .resolve(ModelKind::Arch, &c.target)
                    .filter(|&j| is_component(w, j))
                {
                    Some(j) => edges.push(Edge {
                        kind: EdgeKind::ContextualizedBy,
                        from: j,
                        to: i,
                    }),
                    None => diags.push(dangling(&c.target, "for", node)),
                }
            }
            NodeDecl::Requirement(_) => {}
        }
    }
    w.edges = edges;

    for i in w.unmonitored_requirements() {
        let n = &w.nodes[i];
        diags.push(
            Diagnostic::warning(
                "unmonitored-requirement",
                format!("unmonitored requirement `{}`", n.id),
                n.location,
            )
            .in_model(n.kind),
        );
    }
    for (i, n) in w.nodes.iter().enumerate() {
        if let NodeDecl::Component(c) = &n.decl {
            if c.kind == ComponentKind::Ml && w.targets(i, EdgeKind::DesignedBy).is_empty() {
                diags.push(
                    Diagnostic::warning(
                        "missing-design",
                        format!("ml component `{}` has no design", c.id),
                        n.location,
                    )
                    .in_model(n.kind),
                );
            }
        }
    }
    w.diagnostics = diags;
}

/// Reports each pair of technical requirements that constrain the same
/// metric (kind and arguments) on the same component with thresholds no
/// value can satisfy together. Each pair is reported once, at the later one.
pub fn detect_conflicts(woven: &WovenModel) -> Vec<Diagnostic> {
    let monitored: Vec<(&Node, &TechReq, usize)> = woven
        .nodes
        .iter()
        .filter_map(|n| match &n.decl {
            NodeDecl::TechReq(t) if t.metric.is_some() && t.threshold.is_some() => {
                let scope = t
                    .scope
                    .as_deref()
                    .and_then(|s| woven.resolve(ModelKind::Arch, s))?;
                Some((n, t, scope))
            }
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for (j, (nb, b, sb)) in monitored.iter().enumerate() {
        for (_, a, sa) in &monitored[..j] {
            if sa == sb
                && a.metric == b.metric
                && !a.threshold.unwrap().overlaps(&b.threshold.unwrap())
            {
                out.push(
                    Diagnostic::error(
                        "conflict",
                        format!(
                            "conflicting requirements `{}` ({}) and `{}` ({}) on {} for {}",
                            a.id,
                            a.threshold.unwrap(),
                            b.id,
                            b.threshold.unwrap(),
                            a.metric.as_ref().unwrap(),
                            woven.nodes[*sb].id
                        ),
                        nb.location,
                    )
                    .in_model(nb.kind),
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{parse_all, woven, ARCH, CONTEXT, DESIGN, HCR, TECH};

    fn all() -> WovenModel {
        woven(&[HCR, TECH, ARCH, DESIGN, CONTEXT])
    }

    fn codes(w: &WovenModel) -> Vec<&str> {
        w.diagnostics.iter().map(|d| d.code.as_str()).collect()
    }

    #[test]
    fn trace_follows_every_edge_kind() {
        let w = all();
        let chain = w.trace("Private").unwrap();
        assert_eq!(chain.tech, ["Leak", "Correct", "Speed"]);
        assert_eq!(chain.components, ["Recogniser", "Camera", "Nav"]);
        assert_eq!(chain.designs, ["Cnn"]);
        assert_eq!(chain.contexts, ["RecCtx"]);
        let text = w.render_trace(&chain);
        assert!(text.starts_with("requirement Private\n  tech Leak\n"));
        assert!(text.contains("        dataset Train training \"images\"\n"));
    }

    #[test]
    fn trace_of_unknown_requirement() {
        assert_eq!(
            all().trace("Nope"),
            Err(TraceError::UnknownRequirement("Nope".into()))
        );
        assert!(all().trace("Leak").is_err());
    }

    #[test]
    fn order_is_independent_of_input_order() {
        let a = all();
        let b = woven(&[CONTEXT, DESIGN, ARCH, TECH, HCR]);
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.edges, b.edges);
        assert_eq!(a.diagnostics, b.diagnostics);
    }

    #[test]
    fn unmonitored_leaf_is_a_warning() {
        let w = all();
        assert!(w.is_compilable());
        let unmonitored: Vec<&str> = w.unmonitored_requirements().iter().map(|&i| w.node(i).id.as_str()).collect();
        assert_eq!(unmonitored, ["Honesty"]);
        assert_eq!(codes(&w), ["unmonitored-requirement"]);
    }

    #[test]
    fn missing_and_repeated_models_are_fatal() {
        let errs = weave(&parse_all(&[HCR, TECH, ARCH, DESIGN])).unwrap_err();
        assert_eq!(errs[0].code, "missing-model");
        let errs = weave(&parse_all(&[HCR, HCR, TECH, ARCH, DESIGN, CONTEXT])).unwrap_err();
        assert_eq!(errs[0].code, "duplicate-model");
    }

    #[test]
    fn dangling_references_are_located() {
        let tech = TECH.replace("satisfies: Private;\n  adaptation Ground", "satisfies: Ghost;\n  adaptation Ground");
        let w = woven(&[HCR, &tech, ARCH, DESIGN, CONTEXT]);
        assert!(!w.is_compilable());
        let d = w.diagnostics.iter().find(|d| d.code == "dangling-reference").unwrap();
        assert!(d.message.contains("Ghost"));
        assert_eq!(d.location.line, 19);
        assert_eq!(d.model, Some(ModelKind::Tech));
    }

    #[test]
    fn design_for_traditional_component() {
        let design = format!("{DESIGN}design Bad {{ for: Nav; algorithm: \"x\"; framework: \"y\"; }}\n");
        let w = woven(&[HCR, TECH, ARCH, &design, CONTEXT]);
        assert!(codes(&w).contains(&"not-ml-component"));
    }

    #[test]
    fn many_to_many_through_qualified_ids() {
        let tech = TECH.replace("satisfies: Fair;\n}\ntechreq Leak", "satisfies: H.Fair, H.Private;\n}\ntechreq Leak");
        let arch = ARCH.replace("implements: Speed;", "implements: T.Speed, T.Parity;");
        let w = woven(&[HCR, &tech, &arch, DESIGN, CONTEXT]);
        assert!(w.is_compilable(), "{:?}", w.diagnostics);
        let chain = w.trace("H.Private").unwrap();
        assert_eq!(chain.tech, ["Ratio", "Leak", "Correct", "Speed"]);
        assert_eq!(chain.components, ["Ranker", "Recogniser", "Camera", "Nav"]);
        assert_eq!(chain.designs, ["Cnn", "Trees"]);
        let parity = w.by_local(ModelKind::Tech, "Parity").unwrap();
        assert_eq!(w.sources(parity, EdgeKind::Implements).len(), 2);
    }

    #[test]
    fn disjoint_thresholds_conflict() {
        let extra = "techreq Loose {
  metric: demographic_parity; scope: Ranker; threshold: >= 0.2;
  window: 100ev; min_samples: 10; satisfies: Honesty;
}
";
        let w = woven(&[HCR, &format!("{TECH}{extra}"), ARCH, DESIGN, CONTEXT]);
        let c: Vec<_> = w.diagnostics.iter().filter(|d| d.code == "conflict").collect();
        assert_eq!(c.len(), 1);
        assert!(c[0].message.contains("`Parity` (<=0.1) and `Loose` (>=0.2)"), "{}", c[0].message);
    }

    #[test]
    fn overlapping_thresholds_do_not_conflict() {
        let extra = "techreq Tight {
  metric: demographic_parity; scope: Ranker; threshold: <= 0.05;
  window: 100ev; min_samples: 10; satisfies: Honesty;
}
techreq Elsewhere {
  metric: demographic_parity; scope: Recogniser; threshold: >= 0.5;
  window: 100ev; min_samples: 10; satisfies: Honesty;
}
";
        let w = woven(&[HCR, &format!("{TECH}{extra}"), ARCH, DESIGN, CONTEXT]);
        assert!(!codes(&w).contains(&"conflict"));
    }
}
