//! Offline closed-loop runs: scenario files in, traces and metrics out.

mod export;
mod metrics;
mod scenario;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

pub use export::{metrics_json, trace_csv, write_trace_csv};
pub use metrics::{compute_metrics, MetricsError, MetricsReport};
pub use scenario::{ConfigError, Controller, ScenarioConfig, MAX_TICKS};

use crate::alternation::{build_alternation_chart, build_baseline_chart, ClosedLoop, LoopError, SignalBinding};
use crate::chart::Chart;
use crate::dsl::{parse_chart, ParseDiagnostic, SourceText};
use crate::engine::EngineError;
use crate::io::IoImage;
use crate::plant::apply_fault_script;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot read {}: {message}", .path.display())]
    Io { path: PathBuf, message: String },
    #[error("chart {} failed to parse ({} diagnostics)", .path.display(), .diagnostics.len())]
    ChartParse { path: PathBuf, diagnostics: Vec<ParseDiagnostic> },
    #[error(transparent)]
    Setup(#[from] LoopError),
    #[error("tick {tick}: {source}")]
    Engine { tick: u64, source: EngineError },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// One simulation tick as recorded in a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub scan_index: u64,
    /// Clock after the tick's scan.
    pub clock: SimTime,
    pub demand: f64,
    /// Active steps after the scan, in declaration order.
    pub marking: Vec<String>,
    pub inputs: IoImage,
    pub outputs: IoImage,
    /// Plant pressure at the end of the tick.
    pub pressure: f64,
    pub faulted: [bool; 2],
    pub pump_cmd: [bool; 2],
    pub running: [bool; 2],
    /// Transitions fired during the scan, in firing order.
    pub fired: Vec<String>,
}

/// A completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub chart: Arc<Chart>,
    pub trace: Vec<TraceRecord>,
    pub metrics: MetricsReport,
}

/// Reads and parses a scenario file; relative paths inside it resolve
/// against the file's directory.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.to_owned(), message: e.to_string() })?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(ScenarioConfig::parse(&text, base)?)
}

/// Reads and parses a `.gft` chart file.
pub fn load_chart_file(path: &Path) -> Result<Chart, ScenarioError> {
    let bytes = std::fs::read(path).map_err(|e| ScenarioError::Io { path: path.to_owned(), message: e.to_string() })?;
    let src = SourceText::from_bytes(&bytes)
        .map_err(|e| ScenarioError::Io { path: path.to_owned(), message: e.to_string() })?;
    parse_chart(&src)
        .map(|p| p.chart)
        .map_err(|diagnostics| ScenarioError::ChartParse { path: path.to_owned(), diagnostics })
}

/// The chart the scenario's controller runs.
pub fn controller_chart(cfg: &ScenarioConfig) -> Result<Chart, ScenarioError> {
    match (cfg.controller, &cfg.chart) {
        (Controller::BaselineHysteresis, _) => Ok(build_baseline_chart()),
        (Controller::Grafcet, Some(path)) => load_chart_file(path),
        (Controller::Grafcet, None) => build_alternation_chart(&cfg.alternation)
            .map_err(|e| ScenarioError::Config(ConfigError { line: None, message: e.to_string() })),
    }
}

/// Runs a scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun, ScenarioError> {
    cfg.validate()?;
    let chart = Arc::new(controller_chart(cfg)?);
    run_with_chart(cfg, chart)
}

/// Runs a scenario against an already loaded chart, ignoring the
/// scenario's own chart selection.
pub fn run_with_chart(cfg: &ScenarioConfig, chart: Arc<Chart>) -> Result<ScenarioRun, ScenarioError> {
    cfg.validate()?;
    let mut lp = ClosedLoop::new(Arc::clone(&chart), cfg.plant.clone(), SignalBinding::default(), cfg.seed)?;
    let ticks = cfg.ticks();
    let mut trace = Vec::with_capacity(ticks as usize);
    for tick in 0..ticks {
        let at = lp.clock() + cfg.dt;
        lp.plant = apply_fault_script(&lp.plant, &cfg.faults, at);
        let demand = cfg.demand.at(at);
        let t = lp.tick(demand, cfg.dt, None).map_err(|source| ScenarioError::Engine { tick, source })?;
        trace.push(TraceRecord {
            scan_index: lp.engine.scan_index(),
            clock: lp.clock(),
            demand,
            marking: lp.engine.marking().active_in_order(&chart).into_iter().map(str::to_owned).collect(),
            inputs: t.inputs,
            outputs: t.outputs,
            pressure: lp.plant.pressure,
            faulted: [t.sensors.fault_a, t.sensors.fault_b],
            pump_cmd: t.pump_cmd,
            running: t.running,
            fired: t.events.fired.into_iter().flatten().collect(),
        });
    }
    let metrics = compute_metrics(&trace, cfg)?;
    Ok(ScenarioRun { chart, trace, metrics })
}
