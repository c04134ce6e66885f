//! Deterministic event generation with mutations and runtime controls.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::scenario::{ComponentSpec, Effect, Mutation, ScenarioConfig};
use super::HarnessError;
use crate::adaptation::SystemHandle;
use crate::dsml::Action;
use crate::engine::{EventKind, FieldValue, ObservationEvent};
use crate::metrics::MetricFamily;

/// Boolean signal set when a component stored an image it should not have.
pub const LEAK_SIGNAL: &str = "image_stored";

/// One mutation's active interval, in event indices, both ends inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthInterval {
    pub mutation: String,
    pub effect: String,
    pub family: MetricFamily,
    pub onset: u64,
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: String,
    pub seed: u64,
    pub n_events: u64,
    pub intervals: Vec<TruthInterval>,
}

impl GroundTruth {
    pub fn new(config: &ScenarioConfig, mutations: &[Mutation]) -> Self {
        let last = config.n_events.saturating_sub(1);
        Self {
            scenario: config.name.clone(),
            seed: config.seed,
            n_events: config.n_events,
            intervals: mutations
                .iter()
                .map(|m| TruthInterval {
                    mutation: m.name.clone(),
                    effect: m.effect.to_string(),
                    family: m.effect.family(),
                    onset: m.onset,
                    end: m
                        .duration
                        .map_or(last, |d| (m.onset + d.max(1) - 1).min(last)),
                })
                .collect(),
        }
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for i in &self.intervals {
            out.push_str(&serde_json::to_string(i).expect("truth serializes"));
            out.push('\n');
        }
        out
    }
}

/// Checks a configuration and its mutations before generation.
pub fn check_setup(config: &ScenarioConfig, mutations: &[Mutation]) -> Result<(), HarnessError> {
    let invalid = |m: String| Err(HarnessError::Invalid(m));
    let unit = |p: f64| (0.0..=1.0).contains(&p);
    if config.interval_ms < 0 {
        return invalid("interval must be non-negative".into());
    }
    let mut seen = BTreeSet::new();
    for c in &config.components {
        if !seen.insert(c.id.as_str()) {
            return invalid(format!("duplicate component `{}`", c.id));
        }
        let mut probs = vec![("rate", c.rate), ("accuracy", c.accuracy)];
        probs.extend(c.leak_probability.map(|p| ("leak_probability", p)));
        probs.extend(c.groups.iter().flat_map(|g| [("proportion", g.proportion), ("positive_rate", g.positive_rate)]));
        probs.extend(c.classes.iter().map(|k| ("proportion", k.proportion)));
        if let Some((name, p)) = probs.into_iter().find(|(_, p)| !unit(*p)) {
            return invalid(format!("{name} {p} of `{}` is not in [0, 1]", c.id));
        }
        for (what, total, present) in [
            ("group", c.groups.iter().map(|g| g.proportion).sum::<f64>(), !c.groups.is_empty()),
            ("class", c.classes.iter().map(|k| k.proportion).sum::<f64>(), !c.classes.is_empty()),
        ] {
            if present && (total - 1.0).abs() > 1e-9 {
                return invalid(format!("{what} proportions of `{}` sum to {total}, not 1", c.id));
            }
        }
        if c.features.iter().any(|(_, n)| n.sd < 0.0) || c.confidence.is_some_and(|n| n.sd < 0.0) {
            return invalid(format!("negative standard deviation in `{}`", c.id));
        }
    }
    for m in mutations {
        if m.onset >= config.n_events {
            return invalid(format!("mutation `{}` starts at {} beyond the {} events", m.name, m.onset, config.n_events));
        }
        let comps = &config.components;
        let applies = match &m.effect {
            Effect::BiasInjection { group, rate } => {
                unit(*rate) && comps.iter().any(|c| c.groups.iter().any(|g| &g.name == group))
            }
            Effect::PrivacyLeak { rate } => unit(*rate) && comps.iter().any(|c| c.leak_probability.is_some()),
            Effect::SpeedSurge { .. } => comps.iter().any(|c| c.features.iter().any(|(f, _)| f == "speed")),
            Effect::CovariateDrift { field, .. } => comps.iter().any(|c| c.features.iter().any(|(f, _)| f == field)),
            Effect::PredictionShift { class, delta } => {
                unit(*delta) && comps.iter().any(|c| c.classes.iter().any(|k| &k.name == class))
            }
        };
        if !applies {
            return invalid(format!("mutation `{}` ({}) affects no component", m.name, m.effect));
        }
    }
    Ok(())
}

/// The uniform and normal draws one component makes on every tick.
///
/// They are drawn whether or not the component emits, and whatever the
/// mutations or controls, so two runs with the same seed see the same
/// randomness up to the point where their parameters differ.
struct Draws {
    emit: f64,
    group: f64,
    positive: f64,
    class: f64,
    shift: f64,
    correct: f64,
    wrong: f64,
    leak: f64,
    confidence: f64,
    features: Vec<f64>,
}

struct Pending {
    due_tick: u64,
    event: ObservationEvent,
}

struct ComponentState {
    spec: ComponentSpec,
    rng: ChaCha8Rng,
    rate_factor: f64,
    shutdown: bool,
    obfuscated: BTreeSet<String>,
    seq: u64,
}

impl ComponentState {
    fn rate(&self) -> f64 {
        if self.shutdown {
            0.0
        } else {
            (self.spec.rate * self.rate_factor).clamp(0.0, 1.0)
        }
    }

    fn draw(&mut self) -> Draws {
        let mut u = || self.rng.gen::<f64>();
        let (emit, group, positive, class, shift, correct, wrong, leak) = (u(), u(), u(), u(), u(), u(), u(), u());
        let confidence = self.rng.sample(StandardNormal);
        let features = (0..self.spec.features.len())
            .map(|_| self.rng.sample(StandardNormal))
            .collect();
        Draws {
            emit,
            group,
            positive,
            class,
            shift,
            correct,
            wrong,
            leak,
            confidence,
            features,
        }
    }
}

/// Picks the entry whose cumulative proportion first exceeds `u`.
fn pick<'a, T>(items: &'a [T], weight: impl Fn(&T) -> f64, u: f64) -> &'a T {
    let mut acc = 0.0;
    for item in items {
        acc += weight(item);
        if u < acc {
            return item;
        }
    }
    items.last().expect("non-empty")
}

/// A simulated system that emits events one at a time and accepts
/// adaptation actions between them.
pub struct Simulator {
    config: ScenarioConfig,
    mutations: Vec<Mutation>,
    components: Vec<ComponentState>,
    tick: u64,
    emitted: u64,
    queue: VecDeque<ObservationEvent>,
    feedback: VecDeque<Pending>,
}

impl Simulator {
    pub fn new(config: &ScenarioConfig, mutations: &[Mutation]) -> Result<Self, HarnessError> {
        check_setup(config, mutations)?;
        let components = config
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(i as u64);
                ComponentState {
                    spec: c.clone(),
                    rng,
                    rate_factor: 1.0,
                    shutdown: false,
                    obfuscated: BTreeSet::new(),
                    seq: 0,
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            mutations: mutations.to_vec(),
            components,
            tick: 0,
            emitted: 0,
            queue: VecDeque::new(),
            feedback: VecDeque::new(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Events emitted so far; also the index of the next event.
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    pub fn truth(&self) -> GroundTruth {
        GroundTruth::new(&self.config, &self.mutations)
    }

    /// Effective emission probability per tick of `component`.
    pub fn rate_of(&self, component: &str) -> Option<f64> {
        self.components.iter().find(|c| c.spec.id == component).map(ComponentState::rate)
    }

    pub fn next_event(&mut self) -> Option<ObservationEvent> {
        if self.emitted >= self.config.n_events {
            return None;
        }
        while self.queue.is_empty() {
            let live = self.components.iter().any(|c| c.rate() > 0.0);
            if !live && self.feedback.is_empty() {
                return None;
            }
            self.step_tick();
        }
        let ev = self.queue.pop_front()?;
        self.emitted += 1;
        Some(ev)
    }

    /// Index the next queued event will get.
    fn next_index(&self) -> u64 {
        self.emitted + self.queue.len() as u64
    }

    fn active(&self, index: u64) -> impl Iterator<Item = &Effect> {
        self.mutations.iter().filter(move |m| m.is_active(index)).map(|m| &m.effect)
    }

    fn step_tick(&mut self) {
        let tick = self.tick;
        self.tick += 1;
        let ts = self.config.start_ts + tick as i64 * self.config.interval_ms;
        while self.feedback.front().is_some_and(|p| p.due_tick <= tick) {
            let mut p = self.feedback.pop_front().expect("checked");
            p.event.ts = ts;
            self.queue.push_back(p.event);
        }
        for i in 0..self.components.len() {
            let draws = self.components[i].draw();
            let c = &self.components[i];
            if draws.emit >= c.rate() {
                continue;
            }
            let index = self.next_index();
            let effects: Vec<Effect> = self.active(index).cloned().collect();
            let (ev, fb) = self.build(i, &draws, &effects, ts, tick);
            self.queue.push_back(ev);
            if let Some(p) = fb {
                self.feedback.push_back(p);
            }
        }
    }

    fn build(
        &mut self,
        i: usize,
        d: &Draws,
        effects: &[Effect],
        ts: i64,
        tick: u64,
    ) -> (ObservationEvent, Option<Pending>) {
        let c = &mut self.components[i];
        let spec = &c.spec;
        let kind = if spec.emits_predictions() { EventKind::Prediction } else { EventKind::Signal };
        let mut ev = ObservationEvent::new(ts, spec.id.clone(), kind);
        let mut feedback = None;

        let mut numeric = Vec::with_capacity(spec.features.len());
        for ((name, n), z) in spec.features.iter().zip(&d.features) {
            let mut x = n.mean + n.sd * z;
            for e in effects {
                match e {
                    Effect::SpeedSurge { shift } if name == "speed" => x += shift,
                    Effect::CovariateDrift { field, shift } if field == name => x += shift,
                    _ => {}
                }
            }
            numeric.push((name.clone(), FieldValue::Num(x)));
        }

        if !spec.groups.is_empty() {
            let g = pick(&spec.groups, |g| g.proportion, d.group);
            let mut p = g.positive_rate;
            for e in effects {
                if let Effect::BiasInjection { group, rate } = e {
                    if *group == g.name {
                        p = *rate;
                    }
                }
            }
            ev.features.insert(spec.attribute.clone(), FieldValue::Text(g.name.clone()));
            ev.prediction = Some(FieldValue::Bool(d.positive < p));
        } else if !spec.classes.is_empty() {
            let mut truth = pick(&spec.classes, |k| k.proportion, d.class).name.clone();
            for e in effects {
                if let Effect::PredictionShift { class, delta } = e {
                    if d.shift < *delta {
                        truth = class.clone();
                    }
                }
            }
            let predicted = if d.correct < spec.accuracy || spec.classes.len() == 1 {
                truth.clone()
            } else {
                let others: Vec<&str> = spec.classes.iter().map(|k| k.name.as_str()).filter(|k| *k != truth).collect();
                let j = ((d.wrong * others.len() as f64) as usize).min(others.len() - 1);
                others[j].to_string()
            };
            c.seq += 1;
            let ref_id = format!("{}-{}", spec.id, c.seq);
            ev.prediction = Some(FieldValue::Text(predicted));
            ev.ref_id = Some(ref_id.clone());
            if spec.feedback_delay > 0 {
                let mut fb = ObservationEvent::new(ts, spec.id.clone(), EventKind::Feedback);
                fb.ref_id = Some(ref_id);
                fb.label = Some(FieldValue::Text(truth));
                feedback = Some(Pending {
                    due_tick: tick + spec.feedback_delay,
                    event: fb,
                });
            }
        }
        if let Some(n) = spec.confidence {
            ev.confidence = Some((n.mean + n.sd * d.confidence).clamp(0.0, 1.0));
        }
        let target = if kind == EventKind::Signal { &mut ev.signals } else { &mut ev.features };
        target.extend(numeric);

        if let Some(base) = spec.leak_probability {
            let mut p = base;
            for e in effects {
                if let Effect::PrivacyLeak { rate } = e {
                    p = *rate;
                }
            }
            let leaked = d.leak < p && !c.obfuscated.contains(LEAK_SIGNAL);
            ev.signals.insert(LEAK_SIGNAL.into(), FieldValue::Bool(leaked));
        }
        (ev, feedback)
    }

    fn component_mut(&mut self, id: &str) -> Result<&mut ComponentState, String> {
        self.components
            .iter_mut()
            .find(|c| c.spec.id == id)
            .ok_or_else(|| format!("unknown component `{id}`"))
    }
}

impl Iterator for Simulator {
    type Item = ObservationEvent;

    fn next(&mut self) -> Option<ObservationEvent> {
        self.next_event()
    }
}

impl SystemHandle for Simulator {
    fn apply(&mut self, action: &Action, target: &str, _ts: i64) -> Result<(), String> {
        match action {
            Action::Notify => Ok(()),
            Action::Obfuscate { field } => {
                let c = self.component_mut(target)?;
                if field != LEAK_SIGNAL || c.spec.leak_probability.is_none() {
                    return Err(format!("component `{target}` has no boolean field `{field}`"));
                }
                c.obfuscated.insert(field.clone());
                Ok(())
            }
            Action::Shutdown { .. } => {
                self.component_mut(target)?.shutdown = true;
                self.feedback.retain(|p| p.event.component != target);
                Ok(())
            }
            Action::Throttle { factor, .. } => {
                if !(*factor >= 0.0) {
                    return Err(format!("invalid throttle factor {factor}"));
                }
                self.component_mut(target)?.rate_factor *= factor;
                Ok(())
            }
            Action::SwitchThreshold { name, value, .. } => {
                let c = self.component_mut(target)?;
                if !(0.0..=1.0).contains(value) {
                    return Err(format!("value {value} for `{name}` is not in [0, 1]"));
                }
                match name.as_str() {
                    "rate" => c.spec.rate = *value,
                    "accuracy" => c.spec.accuracy = *value,
                    "leak_probability" if c.spec.leak_probability.is_some() => c.spec.leak_probability = Some(*value),
                    other => return Err(format!("component `{target}` has no parameter `{other}`")),
                }
                Ok(())
            }
        }
    }
}

/// Generates the whole stream without adaptation.
pub fn generate(
    config: &ScenarioConfig,
    mutations: &[Mutation],
) -> Result<(Vec<ObservationEvent>, GroundTruth), HarnessError> {
    let sim = Simulator::new(config, mutations)?;
    let truth = sim.truth();
    Ok((sim.collect(), truth))
}
