//! Cyclic executor: latch inputs, evolve the situation until stable, drive
//! outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::chart::{validate_chart, ActionKind, Chart, SignalKind, Trigger, ValidationReport};
use crate::evolution::{fire_set_detailed, fireable_transitions, EvalError, FireError, Marking};
use crate::io::{IoError, IoImage};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("chart is invalid:\n{0}")]
    InvalidChart(ValidationReport),
    #[error("scan {scan_index}: no stable situation after {cap} firing rounds")]
    Unstable { scan_index: u64, cap: usize },
    #[error("scan {scan_index}: output `{output}` is both set and reset")]
    StoredActionConflict { scan_index: u64, output: String },
    #[error("scan {scan_index}: {source}")]
    Input { scan_index: u64, source: IoError },
    #[error("scan {scan_index}: {source}")]
    Eval { scan_index: u64, source: EvalError },
    #[error("scan {scan_index}: {source}")]
    Fire { scan_index: u64, source: FireError },
    #[error("scan period must be positive")]
    NonPositiveDt,
}

impl EngineError {
    /// Index of the scan that failed, when the error came from a scan.
    pub fn scan_index(&self) -> Option<u64> {
        match self {
            EngineError::Unstable { scan_index, .. }
            | EngineError::StoredActionConflict { scan_index, .. }
            | EngineError::Input { scan_index, .. }
            | EngineError::Eval { scan_index, .. }
            | EngineError::Fire { scan_index, .. } => Some(*scan_index),
            EngineError::InvalidChart(_) | EngineError::NonPositiveDt => None,
        }
    }
}

/// Observable record of what one scan did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanEvents {
    /// Transitions fired in each firing round, in declaration order.
    pub fired: Vec<Vec<String>>,
    /// Steps that received an activation during the scan (transient ones
    /// included), in declaration order.
    pub activated: Vec<String>,
    pub deactivated: Vec<String>,
    pub stabilized: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    chart: Arc<Chart>,
    marking: Marking,
    prev_inputs: IoImage,
    stored_outputs: BTreeMap<String, bool>,
    clock: SimTime,
    scan_index: u64,
    /// Initial steps whose activation-triggered stored actions run on the
    /// first scan.
    pending_activation: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub state: EngineState,
    pub outputs: IoImage,
    pub events: ScanEvents,
}

/// Puts a chart in its initial situation at clock `t0`.
pub fn engine_reset(chart: Arc<Chart>, t0: SimTime) -> Result<EngineState, EngineError> {
    let report = validate_chart(&chart);
    if !report.is_empty() {
        return Err(EngineError::InvalidChart(report));
    }
    let stored_outputs = chart.signals_of(SignalKind::BoolOutput).map(|s| (s.name.clone(), false)).collect();
    Ok(EngineState {
        marking: Marking::initial(&chart, t0),
        prev_inputs: IoImage::zero_inputs(&chart),
        pending_activation: chart.initial_steps().map(|s| s.id.clone()).collect(),
        chart,
        stored_outputs,
        clock: t0,
        scan_index: 0,
    })
}

impl EngineState {
    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn marking(&self) -> &Marking {
        &self.marking
    }

    pub fn prev_inputs(&self) -> &IoImage {
        &self.prev_inputs
    }

    pub fn stored_outputs(&self) -> &BTreeMap<String, bool> {
        &self.stored_outputs
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn scan_index(&self) -> u64 {
        self.scan_index
    }

    /// Iteration cap for the firing loop within one scan.
    pub fn iteration_cap(&self) -> usize {
        self.chart.transitions.len() + 1
    }

    /// Runs one scan of period `dt` against latched `inputs`. On error the
    /// state is left untouched.
    pub fn scan(&self, inputs: &IoImage, dt: SimTime) -> Result<ScanOutcome, EngineError> {
        if dt.is_zero() {
            return Err(EngineError::NonPositiveDt);
        }
        let scan_index = self.scan_index + 1;
        let chart = &*self.chart;
        inputs.check_inputs(chart).map_err(|source| EngineError::Input { scan_index, source })?;

        let clock = self.clock + dt;
        let cap = self.iteration_cap();
        let mut marking = self.marking.clone();
        let mut events = ScanEvents::default();
        // (step, trigger) in processing order
        let mut triggers: Vec<(String, Trigger)> =
            self.pending_activation.iter().map(|s| (s.clone(), Trigger::OnActivation)).collect();

        loop {
            // edges exist only against the previous scan's image
            let prev = if events.iterations == 0 { &self.prev_inputs } else { inputs };
            let fireable = fireable_transitions(chart, &marking, inputs, prev, clock)
                .map_err(|source| EngineError::Eval { scan_index, source })?;
            if fireable.is_empty() {
                break;
            }
            if events.iterations == cap {
                return Err(EngineError::Unstable { scan_index, cap });
            }
            let outcome = fire_set_detailed(&marking, fireable.iter().map(String::as_str), chart, clock)
                .map_err(|source| EngineError::Fire { scan_index, source })?;
            triggers.extend(outcome.deactivated.iter().map(|s| (s.clone(), Trigger::OnDeactivation)));
            triggers.extend(outcome.activated.iter().map(|s| (s.clone(), Trigger::OnActivation)));
            events.activated.extend(outcome.activated);
            events.deactivated.extend(outcome.deactivated);
            events.fired.push(fireable);
            events.iterations += 1;
            marking = outcome.marking;
        }
        events.stabilized = true;
        events.activated = dedup_in_order(chart, &events.activated);
        events.deactivated = dedup_in_order(chart, &events.deactivated);

        let stored_outputs = self.apply_stored(&triggers, scan_index)?;

        let mut outputs = IoImage::new();
        for (name, stored) in &stored_outputs {
            let driven = chart.steps.iter().any(|s| {
                marking.is_active(&s.id)
                    && s.actions.iter().any(|a| a.kind == ActionKind::Continuous && &a.target == name)
            });
            outputs.set_bool(name, *stored || driven);
        }

        let state = EngineState {
            chart: Arc::clone(&self.chart),
            marking,
            prev_inputs: inputs.clone(),
            stored_outputs,
            clock,
            scan_index,
            pending_activation: Vec::new(),
        };
        Ok(ScanOutcome { state, outputs, events })
    }

    fn apply_stored(
        &self,
        triggers: &[(String, Trigger)],
        scan_index: u64,
    ) -> Result<BTreeMap<String, bool>, EngineError> {
        let mut stored = self.stored_outputs.clone();
        let mut touched: BTreeMap<&str, ActionKind> = BTreeMap::new();
        for (step_id, trigger) in triggers {
            let Some(step) = self.chart.step(step_id) else { continue };
            for a in &step.actions {
                if a.kind == ActionKind::Continuous || a.trigger != *trigger {
                    continue;
                }
                if let Some(prev) = touched.insert(&a.target, a.kind) {
                    if prev != a.kind {
                        return Err(EngineError::StoredActionConflict { scan_index, output: a.target.clone() });
                    }
                }
                stored.insert(a.target.clone(), a.kind == ActionKind::StoredSet);
            }
        }
        Ok(stored)
    }
}

fn dedup_in_order(chart: &Chart, ids: &[String]) -> Vec<String> {
    let set: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    chart.steps.iter().filter(|s| set.contains(s.id.as_str())).map(|s| s.id.clone()).collect()
}

/// One row of an open-loop trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub clock: SimTime,
    pub outputs: IoImage,
    pub marking: Marking,
    pub events: ScanEvents,
}

/// Runs the chart from its initial situation over a sequence of input
/// images, one scan per image.
pub fn run_trace(chart: Arc<Chart>, inputs: &[IoImage], dt: SimTime) -> Result<Vec<TraceEntry>, EngineError> {
    let mut state = engine_reset(chart, SimTime::ZERO)?;
    let mut out = Vec::with_capacity(inputs.len());
    for image in inputs {
        let ScanOutcome { state: next, outputs, events } = state.scan(image, dt)?;
        state = next;
        out.push(TraceEntry { clock: state.clock, outputs, marking: state.marking.clone(), events });
    }
    Ok(out)
}
