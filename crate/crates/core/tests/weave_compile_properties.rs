mod gen;

use std::collections::BTreeSet;

use hcmon::compiler::{compile, emit_plan, load_plan};
use hcmon::dsml::{ModelKind, SourceModel};
use hcmon::weaver::{weave, EdgeKind, NodeDecl, WovenModel};
use proptest::prelude::*;

fn conflict_pairs(w: &WovenModel) -> Vec<BTreeSet<String>> {
    w.diagnostics
        .iter()
        .filter(|d| d.code == "conflict")
        .map(|d| {
            d.message
                .split('`')
                .skip(1)
                .step_by(2)
                .take(2)
                .map(str::to_string)
                .collect()
        })
        .collect()
}

fn endpoint_kinds(kind: EdgeKind) -> (ModelKind, ModelKind) {
    match kind {
        EdgeKind::Satisfies => (ModelKind::Tech, ModelKind::Hcr),
        EdgeKind::Implements => (ModelKind::Arch, ModelKind::Tech),
        EdgeKind::DesignedBy => (ModelKind::Arch, ModelKind::Design),
        EdgeKind::ContextualizedBy => (ModelKind::Arch, ModelKind::Context),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn edges_resolve_to_the_right_kinds(shape in gen::system_shape()) {
        let w = weave(&shape.models()).unwrap();
        prop_assert!(w.diagnostics.iter().all(|d| !d.is_error() || d.code == "conflict"), "{:?}", w.diagnostics);
        for e in &w.edges {
            let (from, to) = endpoint_kinds(e.kind);
            prop_assert_eq!(w.node(e.from).kind, from);
            prop_assert_eq!(w.node(e.to).kind, to);
        }
    }

    #[test]
    fn weaving_is_deterministic(shape in gen::system_shape()) {
        let models = shape.models();
        let a = weave(&models).unwrap();
        let b = weave(&models).unwrap();
        prop_assert_eq!(&a, &b);
        let reversed: Vec<SourceModel> = models.iter().rev().cloned().collect();
        prop_assert_eq!(&a, &weave(&reversed).unwrap());
    }

    #[test]
    fn each_conflict_is_reported_once_in_any_order(shape in gen::system_shape()) {
        let mut models = shape.models();
        let a = weave(&models).unwrap();
        models[1].declarations.reverse();
        let b = weave(&models).unwrap();
        let (mut pa, mut pb) = (conflict_pairs(&a), conflict_pairs(&b));
        let distinct: BTreeSet<_> = pa.iter().cloned().collect();
        prop_assert_eq!(distinct.len(), pa.len());
        pa.sort();
        pb.sort();
        prop_assert_eq!(pa, pb);
    }

    #[test]
    fn compilation_is_total_and_traceable(shape in gen::system_shape()) {
        let w = weave(&shape.models()).unwrap();
        let Ok(spec) = compile(&w) else {
            prop_assert!(!w.is_compilable());
            return Ok(());
        };
        for node in &w.nodes {
            let NodeDecl::TechReq(t) = &node.decl else { continue };
            let satisfied: Vec<_> = w.targets(w.by_local(ModelKind::Tech, &t.id).unwrap(), EdgeKind::Satisfies);
            let evaluators = spec.evaluators.iter().filter(|e| e.id == t.id).count();
            let rules = spec.rules.iter().filter(|r| r.evaluator == t.id).count();
            if satisfied.is_empty() {
                prop_assert_eq!((evaluators, rules), (0, 0));
            } else {
                prop_assert_eq!(evaluators, 1);
                prop_assert_eq!(rules, satisfied.len());
            }
        }
        for r in &spec.rules {
            prop_assert_eq!(&spec.trace_index[&r.id], &w.trace(&r.hcr_chain[0]).unwrap());
            let max = r.hcr_chain.iter().map(|id| match &w.node(w.by_local(ModelKind::Hcr, id).unwrap()).decl {
                NodeDecl::Requirement(req) => req.severity,
                _ => unreachable!(),
            }).max().unwrap();
            prop_assert_eq!(r.severity, max);
        }
        let text = emit_plan(&spec);
        prop_assert_eq!(&load_plan(&text).unwrap(), &spec);
        prop_assert_eq!(emit_plan(&compile(&w).unwrap()), text);
    }
}
