//! Indicators computed from a closed-loop trace.
//!
//! Every figure is a direct functional of the trace rows:
//!
//! * downtime: `dt` summed over rows after the warmup window whose pressure
//!   is below `p_crit`; the fraction divides by the scenario duration
//! * switchover: a change of the driven pump A to B or B to A, where the
//!   driven pump is the one commanded alone and is held through rows with
//!   zero or two commands
//! * runtime balance: `|tA - tB| / (tA + tB)`, zero when neither pump ran
//! * energy proxy: `pump_power * (tA + tB) / 3600`
//! * a fault is injected when a pump's fault flag rises; it is recovered
//!   once, while still faulted, the other pump is commanded and healthy,
//!   and the response is the number of scans between the two rows

use serde::Serialize;
use thiserror::Error;

use super::{ScenarioConfig, TraceRecord};
use crate::plant::Pump;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("cannot compute metrics of an empty trace")]
    EmptyTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub controller: String,
    pub definitions: String,
    pub duration_seconds: f64,
    pub dt_seconds: f64,
    pub warmup_seconds: f64,
    pub ticks: usize,
    pub downtime_seconds: f64,
    pub downtime_fraction: f64,
    /// Complement of the downtime fraction.
    pub availability: f64,
    pub switchover_count: u64,
    pub run_seconds_a: f64,
    pub run_seconds_b: f64,
    pub runtime_balance: f64,
    pub energy_proxy_kwh: f64,
    pub faults_injected: u64,
    pub faults_recovered: u64,
    /// `None` when no fault was recovered.
    pub mean_fault_response_scans: Option<f64>,
}

pub fn compute_metrics(trace: &[TraceRecord], cfg: &ScenarioConfig) -> Result<MetricsReport, MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let dt = cfg.dt;

    let down_rows = trace.iter().filter(|r| r.clock > cfg.warmup && r.pressure < cfg.plant.p_crit).count();
    let downtime = dt.checked_mul(down_rows as u64).unwrap_or(SimTime::from_nanos(u64::MAX)).as_secs();
    let duration = cfg.duration.as_secs();
    let downtime_fraction = (downtime / duration).clamp(0.0, 1.0);

    let run = |p: Pump| {
        let rows = trace.iter().filter(|r| r.running[p.index()]).count() as u64;
        dt.checked_mul(rows).unwrap_or(SimTime::from_nanos(u64::MAX)).as_secs()
    };
    let (ta, tb) = (run(Pump::A), run(Pump::B));
    let runtime_balance = if ta + tb > 0.0 { (ta - tb).abs() / (ta + tb) } else { 0.0 };

    let (faults_injected, responses) = fault_responses(trace);
    let faults_recovered = responses.len() as u64;
    let mean_fault_response_scans =
        (!responses.is_empty()).then(|| responses.iter().sum::<u64>() as f64 / responses.len() as f64);

    Ok(MetricsReport {
        controller: cfg.controller.to_string(),
        definitions: "as-defined-here".into(),
        duration_seconds: duration,
        dt_seconds: dt.as_secs(),
        warmup_seconds: cfg.warmup.as_secs(),
        ticks: trace.len(),
        downtime_seconds: downtime,
        downtime_fraction,
        availability: 1.0 - downtime_fraction,
        switchover_count: switchovers(trace),
        run_seconds_a: ta,
        run_seconds_b: tb,
        runtime_balance,
        energy_proxy_kwh: cfg.plant.pump_power * (ta + tb) / 3600.0,
        faults_injected,
        faults_recovered,
        mean_fault_response_scans,
    })
}

fn driven(cmd: [bool; 2]) -> Option<Pump> {
    match cmd {
        [true, false] => Some(Pump::A),
        [false, true] => Some(Pump::B),
        _ => None,
    }
}

pub(crate) fn switchovers(trace: &[TraceRecord]) -> u64 {
    let mut last: Option<Pump> = None;
    let mut count = 0;
    for r in trace {
        if let Some(p) = driven(r.pump_cmd) {
            if last.is_some_and(|l| l != p) {
                count += 1;
            }
            last = Some(p);
        }
    }
    count
}

/// Number of fault raises and, for each recovered one, its response in
/// scans.
fn fault_responses(trace: &[TraceRecord]) -> (u64, Vec<u64>) {
    let mut injected = 0;
    let mut responses = Vec::new();
    for p in Pump::ALL {
        let (i, o) = (p.index(), p.other().index());
        for (start, r) in trace.iter().enumerate() {
            let raised = r.faulted[i] && (start == 0 || !trace[start - 1].faulted[i]);
            if !raised {
                continue;
            }
            injected += 1;
            let covered =
                trace[start..].iter().take_while(|r| r.faulted[i]).position(|r| r.pump_cmd[o] && !r.faulted[o]);
            if let Some(k) = covered {
                responses.push(k as u64);
            }
        }
    }
    (injected, responses)
}
