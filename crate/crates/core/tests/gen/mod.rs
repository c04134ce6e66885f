//! Proptest strategies for random, valid source models of every kind.

#![allow(dead_code)]

use hcmon::dsml::*;
use hcmon::metrics::MetricRef;
use proptest::collection::vec;
use proptest::prelude::*;

pub fn ident() -> impl Strategy<Value = String> {
    "[A-Z][A-Za-z0-9_]{0,6}"
}

pub fn field() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}"
}

pub fn text() -> impl Strategy<Value = String> {
    prop_oneof!["[ -~]{0,16}", "\\PC{0,8}"]
}

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![
        (0u32..1000).prop_map(|n| f64::from(n) / 100.0),
        (-1000i32..1000).prop_map(f64::from),
        0.0f64..1.0,
    ]
}

fn category() -> impl Strategy<Value = Category> {
    prop_oneof![
        Just(Category::Fairness),
        Just(Category::Privacy),
        Just(Category::Safety),
        Just(Category::Wellbeing),
        Just(Category::Transparency),
        Just(Category::Values),
        text().prop_map(Category::Other),
    ]
}

fn severity() -> impl Strategy<Value = Severity> {
    prop_oneof![
        Just(Severity::Low),
        Just(Severity::Medium),
        Just(Severity::High),
        Just(Severity::Critical)
    ]
}

pub fn metric() -> impl Strategy<Value = MetricRef> {
    prop_oneof![
        Just(MetricRef::DemographicParity),
        Just(MetricRef::DisparateImpact),
        field().prop_map(|field| MetricRef::KsDrift { field }),
        (field(), 2u32..50).prop_map(|(field, bins)| MetricRef::PsiDrift { field, bins }),
        Just(MetricRef::PredictionDrift),
        Just(MetricRef::Accuracy),
        Just(MetricRef::MeanConfidence),
        (field(), number(), number()).prop_map(|(field, a, b)| MetricRef::RangeRate {
            field,
            low: a.min(b),
            high: a.max(b)
        }),
        field().prop_map(|field| MetricRef::FlagRate { field }),
    ]
}

pub fn comparator() -> impl Strategy<Value = Comparator> {
    prop_oneof![
        Just(Comparator::Lt),
        Just(Comparator::Le),
        Just(Comparator::Gt),
        Just(Comparator::Ge),
        Just(Comparator::Eq),
        Just(Comparator::Ne),
    ]
}

pub fn threshold() -> impl Strategy<Value = Threshold> {
    (comparator(), number()).prop_map(|(c, b)| Threshold::new(c, b))
}

fn window() -> impl Strategy<Value = Window> {
    prop_oneof![
        (1u64..100_000).prop_map(Window::Count),
        (1u64..10_000_000).prop_map(|ms| Window::Time(Millis(ms))),
    ]
}

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        field().prop_map(|field| Action::Obfuscate { field }),
        ident().prop_map(|component| Action::Shutdown { component }),
        (ident(), 1u32..=100).prop_map(|(component, f)| Action::Throttle {
            component,
            factor: f64::from(f) / 100.0
        }),
        (ident(), field(), number()).prop_map(|(component, name, value)| Action::SwitchThreshold {
            component,
            name,
            value
        }),
        Just(Action::Notify),
    ]
}

fn adaptation() -> impl Strategy<Value = AdaptationSpec> {
    (ident(), action(), proptest::option::of((0u64..10_000_000).prop_map(Millis))).prop_map(
        |(id, action, cooldown)| AdaptationSpec { id, action, cooldown },
    )
}

fn requirement(depth: u32) -> BoxedStrategy<Requirement> {
    let children = if depth == 0 {
        Just(Vec::new()).boxed()
    } else {
        vec(requirement(depth - 1), 0..3).boxed()
    };
    (ident(), proptest::option::of(text()), category(), severity(), children)
        .prop_map(|(id, description, category, severity, children)| Requirement {
            id,
            description,
            category,
            severity,
            children,
        })
        .boxed()
}

fn techreq_fields() -> impl Strategy<Value = (Option<MetricRef>, Option<String>, Option<Threshold>, Option<Window>, Option<u64>)> {
    (
        metric(),
        ident(),
        threshold(),
        window(),
        1u64..5000,
    )
        .prop_map(|(m, s, t, w, n)| (Some(m), Some(s), Some(t), Some(w), Some(n)))
}

fn techreq(depth: u32) -> BoxedStrategy<TechReq> {
    let children = if depth == 0 {
        Just(Vec::new()).boxed()
    } else {
        vec(techreq(depth - 1), 0..3).boxed()
    };
    (
        ident(),
        proptest::option::of(text()),
        techreq_fields(),
        any::<bool>(),
        vec(ident(), 0..3),
        children,
        vec(adaptation(), 0..3),
    )
        .prop_map(|(id, description, fields, keep, satisfies, children, adaptations)| {
            // Grouping nodes may leave the monitoring fields out.
            let (metric, scope, threshold, window, min_samples) =
                if children.is_empty() || keep { fields } else { (None, None, None, None, None) };
            TechReq {
                id,
                description,
                metric,
                scope,
                threshold,
                window,
                min_samples,
                satisfies,
                children,
                adaptations,
            }
        })
        .boxed()
}

fn component() -> impl Strategy<Value = Declaration> {
    (
        ident(),
        prop_oneof![Just(ComponentKind::Ml), Just(ComponentKind::Traditional)],
        proptest::option::of(text()),
        vec(ident(), 0..4),
    )
        .prop_map(|(id, kind, description, implements)| {
            Declaration::Component(Component {
                id,
                kind,
                description,
                implements,
            })
        })
}

fn connector() -> impl Strategy<Value = Declaration> {
    (ident(), ident(), ident(), proptest::option::of(text())).prop_map(|(id, from, to, description)| {
        Declaration::Connector(Connector {
            id,
            from,
            to,
            description,
        })
    })
}

fn param_value() -> impl Strategy<Value = ParamValue> {
    prop_oneof![
        number().prop_map(ParamValue::Num),
        text().prop_map(ParamValue::Str),
        field().prop_map(ParamValue::Ident),
    ]
}

fn params() -> impl Strategy<Value = Vec<Param>> {
    vec((field(), param_value()), 0..4).prop_map(|ps| {
        ps.into_iter()
            .enumerate()
            .map(|(i, (name, value))| Param {
                name: format!("{name}_{i}"),
                value,
            })
            .collect()
    })
}

fn design() -> impl Strategy<Value = Declaration> {
    (ident(), ident(), proptest::option::of(text()), text(), text(), params(), params()).prop_map(
        |(id, target, description, algorithm, framework, hyperparams, mut train_metrics)| {
            // Parameter names are unique across both lists.
            for p in &mut train_metrics {
                p.name.push_str("_m");
            }
            Declaration::Design(DesignSpec {
                id,
                target,
                description,
                algorithm,
                framework,
                hyperparams,
                train_metrics,
            })
        },
    )
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (
        ident(),
        text(),
        prop_oneof![Just(DatasetRole::Training), Just(DatasetRole::Production)],
        proptest::option::of("[a-z_/]{1,12}\\.jsonl"),
    )
        .prop_map(|(name, source, role, baseline)| Dataset {
            name,
            source,
            role,
            baseline,
        })
}

fn context() -> impl Strategy<Value = Declaration> {
    (
        ident(),
        ident(),
        proptest::option::of(text()),
        proptest::option::of(text()),
        vec(field(), 0..3),
        vec(dataset(), 0..3),
    )
        .prop_map(|(id, target, description, deployment, sensitive_attributes, mut datasets)| {
            // At most one training baseline per context.
            let mut seen = false;
            for d in &mut datasets {
                if d.role == DatasetRole::Training && d.baseline.is_some() {
                    if seen {
                        d.baseline = None;
                    }
                    seen = true;
                }
            }
            Declaration::Context(ContextSpec {
                id,
                target,
                description,
                deployment,
                sensitive_attributes,
                datasets,
            })
        })
}

/// Appends a running number to every declared id so ids are unique.
fn uniquify(model: &mut SourceModel) {
    let mut n = 0;
    let mut next = |id: &mut String| {
        n += 1;
        id.push_str(&format!("_{n}"));
    };
    fn reqs(r: &mut Requirement, next: &mut dyn FnMut(&mut String)) {
        next(&mut r.id);
        for c in &mut r.children {
            reqs(c, next);
        }
    }
    fn techs(t: &mut TechReq, next: &mut dyn FnMut(&mut String)) {
        next(&mut t.id);
        for a in &mut t.adaptations {
            next(&mut a.id);
        }
        for c in &mut t.children {
            techs(c, next);
        }
    }
    for d in &mut model.declarations {
        match d {
            Declaration::Requirement(r) => reqs(r, &mut next),
            Declaration::TechReq(t) => techs(t, &mut next),
            Declaration::Component(c) => next(&mut c.id),
            Declaration::Connector(c) => next(&mut c.id),
            Declaration::Design(ds) => next(&mut ds.id),
            Declaration::Context(c) => {
                next(&mut c.id);
                for ds in &mut c.datasets {
                    next(&mut ds.name);
                }
            }
        }
    }
}

pub fn model_of(kind: ModelKind) -> BoxedStrategy<SourceModel> {
    let decls: BoxedStrategy<Vec<Declaration>> = match kind {
        ModelKind::Hcr => vec(requirement(2).prop_map(Declaration::Requirement), 0..4).boxed(),
        ModelKind::Tech => vec(techreq(2).prop_map(Declaration::TechReq), 0..4).boxed(),
        ModelKind::Arch => vec(prop_oneof![component(), connector()], 0..5).boxed(),
        ModelKind::Design => vec(design(), 0..4).boxed(),
        ModelKind::Context => vec(context(), 0..4).boxed(),
    };
    (ident(), decls)
        .prop_map(move |(name, declarations)| {
            let mut m = SourceModel::new(kind, name);
            m.declarations = declarations;
            uniquify(&mut m);
            m
        })
        .boxed()
}

pub fn any_kind() -> impl Strategy<Value = ModelKind> {
    prop_oneof![
        Just(ModelKind::Hcr),
        Just(ModelKind::Tech),
        Just(ModelKind::Arch),
        Just(ModelKind::Design),
        Just(ModelKind::Context),
    ]
}

pub fn any_model() -> impl Strategy<Value = SourceModel> {
    any_kind().prop_flat_map(model_of)
}

/// Shape of a random, fully linked five-model system.
#[derive(Debug, Clone)]
pub struct SystemShape {
    /// Number of children of each top-level requirement.
    pub requirements: Vec<usize>,
    pub techreqs: Vec<TechShape>,
    /// Component kind (true for ml) and the techreqs it implements.
    pub components: Vec<(bool, Vec<prop::sample::Index>)>,
    pub qualified: bool,
}

#[derive(Debug, Clone)]
pub struct TechShape {
    pub metric: MetricRef,
    pub threshold: Threshold,
    pub scope: prop::sample::Index,
    pub satisfies: Vec<prop::sample::Index>,
    pub window: u64,
    pub adaptation: Option<Action>,
}

fn small_metric() -> impl Strategy<Value = MetricRef> {
    prop_oneof![
        Just(MetricRef::DemographicParity),
        Just(MetricRef::DisparateImpact),
        Just(MetricRef::KsDrift { field: "x".into() }),
        Just(MetricRef::Accuracy),
        Just(MetricRef::FlagRate { field: "flag".into() }),
        Just(MetricRef::RangeRate { field: "x".into(), low: 0.0, high: 1.0 }),
    ]
}

pub fn system_shape() -> impl Strategy<Value = SystemShape> {
    let tech = (
        small_metric(),
        (comparator(), (0u32..=10).prop_map(|b| f64::from(b) / 10.0)).prop_map(|(c, b)| Threshold::new(c, b)),
        any::<prop::sample::Index>(),
        vec(any::<prop::sample::Index>(), 0..3),
        1u64..500,
        proptest::option::of(prop_oneof![
            Just(Action::Notify),
            Just(Action::Obfuscate { field: "flag".into() }),
        ]),
    )
        .prop_map(|(metric, threshold, scope, satisfies, window, adaptation)| TechShape {
            metric,
            threshold,
            scope,
            satisfies,
            window,
            adaptation,
        });
    (
        vec(0usize..3, 1..4),
        vec(tech, 1..8),
        vec((any::<bool>(), vec(any::<prop::sample::Index>(), 0..4)), 1..4),
        any::<bool>(),
    )
        .prop_map(|(requirements, techreqs, components, qualified)| SystemShape {
            requirements,
            techreqs,
            components,
            qualified,
        })
}

impl SystemShape {
    pub fn requirement_ids(&self) -> Vec<String> {
        let mut ids = Vec::new();
        for (i, &children) in self.requirements.iter().enumerate() {
            ids.push(format!("R{i}"));
            ids.extend((0..children).map(|j| format!("R{i}x{j}")));
        }
        ids
    }

    /// The five model texts in hcr, tech, arch, design, context order.
    pub fn texts(&self) -> [String; 5] {
        let reqs = self.requirement_ids();
        let mut hcr = String::from("model hcr H;\n");
        for (i, &children) in self.requirements.iter().enumerate() {
            hcr.push_str(&format!("requirement R{i} {{ category: values; severity: low;\n"));
            for j in 0..children {
                hcr.push_str(&format!(
                    "  requirement R{i}x{j} {{ category: fairness; severity: {}; }}\n",
                    ["medium", "high", "critical"][j % 3]
                ));
            }
            hcr.push_str("}\n");
        }
        let q = |model: &str, id: &str| if self.qualified { format!("{model}.{id}") } else { id.to_string() };
        let n_comp = self.components.len();
        let mut tech = String::from("model tech T;\n");
        for (i, t) in self.techreqs.iter().enumerate() {
            let mut sat: Vec<String> = t.satisfies.iter().map(|s| q("H", &reqs[s.index(reqs.len())])).collect();
            sat.dedup();
            tech.push_str(&format!(
                "techreq T{i} {{\n  metric: {}; scope: {}; threshold: {}; window: {}ev; min_samples: 1;\n",
                t.metric,
                q("A", &format!("C{}", t.scope.index(n_comp))),
                t.threshold,
                t.window
            ));
            if !sat.is_empty() {
                tech.push_str(&format!("  satisfies: {};\n", sat.join(", ")));
            }
            if let Some(a) = &t.adaptation {
                tech.push_str(&format!("  adaptation Fix{i} {{ action: {a}; }}\n"));
            }
            tech.push_str("}\n");
        }
        let n_tech = self.techreqs.len();
        let mut arch = String::from("model arch A;\n");
        let mut design = String::from("model design D;\n");
        let mut context = String::from("model context X;\n");
        for (i, (ml, implements)) in self.components.iter().enumerate() {
            let mut imp: Vec<String> = implements.iter().map(|t| q("T", &format!("T{}", t.index(n_tech)))).collect();
            imp.sort();
            imp.dedup();
            arch.push_str(&format!("component C{i} {{ kind: {};", if *ml { "ml" } else { "traditional" }));
            if !imp.is_empty() {
                arch.push_str(&format!(" implements: {};", imp.join(", ")));
            }
            arch.push_str(" }\n");
            if *ml {
                design.push_str(&format!(
                    "design D{i} {{ for: {}; algorithm: \"a\"; framework: \"f\"; }}\n",
                    q("A", &format!("C{i}"))
                ));
            }
            context.push_str(&format!(
                "context X{i} {{ for: C{i}; sensitive_attributes: group;\n  dataset S{i} {{ source: \"s\"; role: training; baseline: \"b{i}.jsonl\"; }}\n}}\n"
            ));
        }
        [hcr, tech, arch, design, context]
    }

    pub fn models(&self) -> Vec<SourceModel> {
        self.texts()
            .iter()
            .map(|t| parse_model(t, None).unwrap_or_else(|e| panic!("{e:?}\n{t}")))
            .collect()
    }
}
