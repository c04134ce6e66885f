//! Stream processing: engine plus adaptation loop, writing to sinks.

use std::io::{self, BufRead, Write};
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use super::{Counters, Monitor, ObservationEvent, StepOutput, ViolationRecord};
use crate::adaptation::{AlertRecord, Mape, SystemHandle};
use crate::metrics::MetricResult;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub events: u64,
    pub results: u64,
    pub violations: u64,
    pub adaptations: u64,
    pub alerts: u64,
    pub counters: Counters,
}

/// Everything one event produced after the adaptation loop ran.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Step {
    pub results: Vec<MetricResult>,
    pub violations: Vec<ViolationRecord>,
    pub alerts: Vec<AlertRecord>,
    /// `ts action target outcome` lines.
    pub audit: Vec<String>,
}

/// Destinations for run output, one record per line.
pub struct Sinks<'a> {
    pub violations: &'a mut dyn Write,
    pub alerts: &'a mut dyn Write,
    pub audit: &'a mut dyn Write,
    pub results: Option<&'a mut dyn Write>,
}

impl Sinks<'_> {
    pub fn write(&mut self, step: &Step) -> io::Result<()> {
        if let Some(w) = self.results.as_mut() {
            for r in &step.results {
                serde_json::to_writer(&mut **w, r)?;
                w.write_all(b"\n")?;
            }
        }
        for v in &step.violations {
            self.violations.write_all(v.to_line().as_bytes())?;
            self.violations.write_all(b"\n")?;
        }
        for a in &step.alerts {
            serde_json::to_writer(&mut *self.alerts, a)?;
            self.alerts.write_all(b"\n")?;
        }
        for line in &step.audit {
            self.audit.write_all(line.as_bytes())?;
            self.audit.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.violations.flush()?;
        self.alerts.flush()?;
        self.audit.flush()?;
        if let Some(w) = self.results.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}

/// A monitor with its MAPE-K loop.
pub struct Pipeline {
    pub monitor: Monitor,
    pub mape: Mape,
    summary: RunSummary,
}

impl Pipeline {
    pub fn new(monitor: Monitor) -> Self {
        let mape = Mape::new(monitor.spec().clone());
        Self {
            monitor,
            mape,
            summary: RunSummary::default(),
        }
    }

    pub fn feed_line(&mut self, line: &str, handle: &mut dyn SystemHandle) -> Step {
        let out = self.monitor.process_line(line);
        self.react(out, handle)
    }

    pub fn feed(&mut self, event: &ObservationEvent, handle: &mut dyn SystemHandle) -> Step {
        let out = self.monitor.process(event);
        self.react(out, handle)
    }

    fn react(&mut self, out: StepOutput, handle: &mut dyn SystemHandle) -> Step {
        let mut step = Step {
            results: out.results,
            violations: out.violations,
            ..Step::default()
        };
        for v in &mut step.violations {
            let reaction = self.mape.react(v, handle);
            if let Some(outcome) = &reaction.outcome {
                step.audit.push(outcome.audit_line());
                self.summary.adaptations += 1;
            }
            if let Some(alert) = reaction.alert {
                step.alerts.push(alert);
            }
            if let Some(component) = reaction.shutdown {
                self.monitor.shutdown_component(&component);
            }
        }
        self.summary.results += step.results.len() as u64;
        self.summary.violations += step.violations.len() as u64;
        self.summary.alerts += step.alerts.len() as u64;
        step
    }

    pub fn summary(&self) -> RunSummary {
        let counters = self.monitor.counters();
        RunSummary {
            events: counters.ingested,
            counters,
            ..self.summary
        }
    }
}

/// Processes newline-delimited events until end of input or until `stop`
/// is raised, writing each step to `sinks`. Blank lines are skipped. Only
/// read and write failures are errors; bad events are counted and dropped.
pub fn run_stream<R: BufRead>(
    pipeline: &mut Pipeline,
    source: R,
    handle: &mut dyn SystemHandle,
    sinks: &mut Sinks<'_>,
    stop: Option<&AtomicBool>,
) -> io::Result<RunSummary> {
    for line in source.lines() {
        if stop.is_some_and(|s| s.load(Ordering::Relaxed)) {
            break;
        }
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let step = pipeline.feed_line(&line, handle);
        sinks.write(&step)?;
    }
    sinks.flush()?;
    Ok(pipeline.summary())
}
