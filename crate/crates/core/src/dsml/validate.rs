use std::collections::HashSet;

use super::model::*;
use crate::diag::Diagnostic;

/// Intra-file checks run after parsing and before weaving.
pub fn validate_model(model: &SourceModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = HashSet::new();
    let mut check_dup = |id: &str, diags: &mut Vec<Diagnostic>| {
        if !seen.insert(id.to_string()) {
            diags.push(Diagnostic::error(
                "duplicate-id",
                format!("duplicate identifier `{id}`"),
                model.location_of(id),
            ));
        }
    };

    for (r, _) in walk_requirements(model.requirements()) {
        check_dup(&r.id, &mut diags);
    }

    for (t, _) in walk_techreqs(model.techreqs()) {
        check_dup(&t.id, &mut diags);
        for a in &t.adaptations {
            check_dup(&a.id, &mut diags);
        }
        let loc = model.location_of(&t.id);
        if t.min_samples == Some(0) {
            diags.push(Diagnostic::error(
                "invalid-min-samples",
                format!("techreq `{}` has min_samples 0 (must be at least 1)", t.id),
                loc,
            ));
        }
        if matches!(t.window, Some(w) if w.size() == 0) {
            diags.push(Diagnostic::error(
                "invalid-window",
                format!("techreq `{}` has an empty window", t.id),
                loc,
            ));
        }
        if t.is_leaf() {
            let missing: Vec<&str> = [
                ("metric", t.metric.is_none()),
                ("scope", t.scope.is_none()),
                ("threshold", t.threshold.is_none()),
                ("window", t.window.is_none()),
                ("min_samples", t.min_samples.is_none()),
            ]
            .into_iter()
            .filter_map(|(k, absent)| absent.then_some(k))
            .collect();
            if !missing.is_empty() {
                diags.push(Diagnostic::error(
                    "incomplete-techreq",
                    format!(
                        "leaf techreq `{}` lacks {}",
                        t.id,
                        missing.join(", ")
                    ),
                    loc,
                ));
            }
            if t.satisfies.is_empty() {
                diags.push(Diagnostic::warning(
                    "unlinked-techreq",
                    format!("unlinked technical requirement `{}`", t.id),
                    loc,
                ));
            }
        }
    }

    for d in &model.declarations {
        match d {
            Declaration::Component(_) | Declaration::Connector(_) => check_dup(d.id(), &mut diags),
            Declaration::Design(ds) => {
                check_dup(&ds.id, &mut diags);
                let mut names = HashSet::new();
                for p in ds.hyperparams.iter().chain(&ds.train_metrics) {
                    if !names.insert(p.name.as_str()) {
                        diags.push(Diagnostic::error(
                            "duplicate-id",
                            format!("duplicate parameter `{}` in design `{}`", p.name, ds.id),
                            model.location_of(&format!("{}.{}", ds.id, p.name)),
                        ));
                    }
                }
            }
            Declaration::Context(c) => {
                check_dup(&c.id, &mut diags);
                for ds in &c.datasets {
                    check_dup(&ds.name, &mut diags);
                }
                let baselines = c
                    .datasets
                    .iter()
                    .filter(|d| d.role == DatasetRole::Training && d.baseline.is_some())
                    .count();
                if baselines > 1 {
                    diags.push(Diagnostic::error(
                        "multiple-baselines",
                        format!("context `{}` declares {baselines} training baselines (at most one)", c.id),
                        model.location_of(&c.id),
                    ));
                }
            }
            Declaration::Requirement(_) | Declaration::TechReq(_) => {}
        }
    }

    for d in &mut diags {
        d.model = Some(model.kind);
    }
    diags
}
