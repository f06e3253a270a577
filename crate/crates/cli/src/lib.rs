//! Command-line front end and live control service.

pub mod commands;
pub mod output;
pub mod serve;

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Result};
use grafcet_core::harness::{controller_chart, load_scenario, ScenarioConfig};
use grafcet_core::session::{Session, SessionConfig};
use grafcet_core::SimTime;

/// Builds a live session from an optional scenario file. Scenario demand
/// and fault schedules are not replayed live; only the initial demand is
/// taken.
pub fn session_from(scenario: Option<&Path>, dt: Option<f64>) -> Result<Session> {
    let cfg = match scenario {
        Some(path) => load_scenario(path)?,
        None => ScenarioConfig::default(),
    };
    let dt = match dt {
        None => cfg.dt,
        Some(secs) => match SimTime::from_secs(secs).filter(|t| !t.is_zero()) {
            Some(t) => t,
            None => bail!("dt must be a positive number of seconds"),
        },
    };
    let chart = Arc::new(controller_chart(&cfg)?);
    Ok(Session::new(SessionConfig {
        chart,
        plant: cfg.plant,
        dt,
        demand: cfg.demand.at(SimTime::ZERO),
        seed: cfg.seed,
    })?)
}
