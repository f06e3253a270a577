//! Two-pump pressure system: linear first-order dynamics, hysteresis
//! pressure switches, run-time accounting and scripted faults.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pump {
    A,
    B,
}

impl Pump {
    pub const ALL: [Pump; 2] = [Pump::A, Pump::B];

    pub fn index(self) -> usize {
        match self {
            Pump::A => 0,
            Pump::B => 1,
        }
    }

    pub fn other(self) -> Pump {
        match self {
            Pump::A => Pump::B,
            Pump::B => Pump::A,
        }
    }
}

impl fmt::Display for Pump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pump::A => "A",
            Pump::B => "B",
        })
    }
}

impl FromStr for Pump {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Pump::A),
            "B" | "b" => Ok(Pump::B),
            other => Err(format!("unknown pump `{other}` (expected A or B)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid plant parameters: {0}")]
pub struct PlantParamsError(pub String);

/// Plant constants. Pressures in bar, rates in bar/s, power in kW.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantParams {
    pub p_max: f64,
    /// Pressure rise per second per running pump.
    pub k_pump: f64,
    /// Pressure drop per second per unit of demand.
    pub k_demand: f64,
    pub p_set_low: f64,
    pub p_set_high: f64,
    /// Below this pressure the process counts as down.
    pub p_crit: f64,
    pub pump_power: f64,
    /// Dead band of the pressure switches.
    pub hysteresis: f64,
    /// Amplitude of uniform noise on the analog pressure reading.
    pub noise: f64,
    pub initial_pressure: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            p_max: 6.0,
            k_pump: 0.5,
            k_demand: 0.4,
            p_set_low: 2.5,
            p_set_high: 4.0,
            p_crit: 1.5,
            pump_power: 7.5,
            hysteresis: 0.2,
            noise: 0.0,
            initial_pressure: 3.0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantParamsError> {
        let all = [
            self.p_max,
            self.k_pump,
            self.k_demand,
            self.p_set_low,
            self.p_set_high,
            self.p_crit,
            self.pump_power,
            self.hysteresis,
            self.noise,
            self.initial_pressure,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(PlantParamsError("all parameters must be finite".into()));
        }
        let err = |m: &str| Err(PlantParamsError(m.into()));
        if self.k_pump <= 0.0 {
            return err("k_pump must be positive");
        }
        if self.k_demand < 0.0 {
            return err("k_demand must be non-negative");
        }
        if self.pump_power <= 0.0 {
            return err("pump_power must be positive");
        }
        if !(0.0 < self.p_crit
            && self.p_crit <= self.p_set_low
            && self.p_set_low < self.p_set_high
            && self.p_set_high <= self.p_max)
        {
            return err("thresholds must satisfy 0 < p_crit <= p_set_low < p_set_high <= p_max");
        }
        if self.hysteresis < 0.0 || self.noise < 0.0 {
            return err("hysteresis and noise must be non-negative");
        }
        if self.p_set_low + 2.0 * self.hysteresis > self.p_set_high {
            return err("switch dead bands overlap: need p_set_low + 2 * hysteresis <= p_set_high");
        }
        if !(0.0..=self.p_max).contains(&self.initial_pressure) {
            return err("initial_pressure must lie within [0, p_max]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantState {
    pub pressure: f64,
    /// Accumulated effective run time per pump, indexed by [`Pump::index`].
    pub run_time: [SimTime; 2],
    pub faulted: [bool; 2],
    /// Number of fault-script events already applied.
    pub script_cursor: usize,
}

impl PlantState {
    pub fn new(pressure: f64) -> Self {
        PlantState { pressure, run_time: [SimTime::ZERO; 2], faulted: [false; 2], script_cursor: 0 }
    }

    pub fn initial(params: &PlantParams) -> Self {
        Self::new(params.initial_pressure)
    }

    pub fn run_seconds(&self, pump: Pump) -> f64 {
        self.run_time[pump.index()].as_secs()
    }

    pub fn is_faulted(&self, pump: Pump) -> bool {
        self.faulted[pump.index()]
    }
}

/// Which pumps actually deliver flow given commands and faults.
pub fn running_pumps(state: &PlantState, pump_cmd: [bool; 2]) -> [bool; 2] {
    [pump_cmd[0] && !state.faulted[0], pump_cmd[1] && !state.faulted[1]]
}

/// Advances the plant by `dt` under the given pump commands and demand.
pub fn plant_step(
    state: &PlantState,
    params: &PlantParams,
    pump_cmd: [bool; 2],
    demand: f64,
    dt: SimTime,
) -> PlantState {
    let running = running_pumps(state, pump_cmd);
    let n = running.iter().filter(|r| **r).count() as f64;
    let rate = params.k_pump * n - params.k_demand * demand;
    let pressure = (state.pressure + dt.as_secs() * rate).clamp(0.0, params.p_max);
    let mut run_time = state.run_time;
    for (acc, on) in run_time.iter_mut().zip(running) {
        if on {
            *acc += dt;
        }
    }
    PlantState { pressure, run_time, ..state.clone() }
}

/// Sensor readings as seen by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensorImage {
    pub pressure: f64,
    pub p_low: bool,
    pub p_high: bool,
    pub fault_a: bool,
    pub fault_b: bool,
}

impl Default for SensorImage {
    fn default() -> Self {
        SensorImage { pressure: 0.0, p_low: false, p_high: false, fault_a: false, fault_b: false }
    }
}

fn switches(pressure: f64, params: &PlantParams, prev: &SensorImage) -> (bool, bool) {
    let p_low = if pressure <= params.p_set_low {
        true
    } else if pressure >= params.p_set_low + params.hysteresis {
        false
    } else {
        prev.p_low
    };
    let p_high = if pressure >= params.p_set_high {
        true
    } else if pressure <= params.p_set_high - params.hysteresis {
        false
    } else {
        prev.p_high
    };
    (p_low, p_high)
}

/// Noise-free sensor read. Switches hold their previous value inside their
/// dead band.
pub fn sensor_read(state: &PlantState, params: &PlantParams, prev: &SensorImage) -> SensorImage {
    let (p_low, p_high) = switches(state.pressure, params, prev);
    SensorImage { pressure: state.pressure, p_low, p_high, fault_a: state.faulted[0], fault_b: state.faulted[1] }
}

/// Sensor read with uniform noise of amplitude `params.noise` on the
/// pressure channel; the switches see the noisy value.
pub fn sensor_read_noisy(
    state: &PlantState,
    params: &PlantParams,
    prev: &SensorImage,
    rng: &mut impl Rng,
) -> SensorImage {
    if params.noise == 0.0 {
        return sensor_read(state, params, prev);
    }
    let measured = state.pressure + rng.random_range(-params.noise..=params.noise);
    let (p_low, p_high) = switches(measured, params, prev);
    SensorImage { pressure: measured, p_low, p_high, fault_a: state.faulted[0], fault_b: state.faulted[1] }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultAction {
    Fail,
    Repair,
}

impl FromStr for FaultAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fail" => Ok(FaultAction::Fail),
            "repair" => Ok(FaultAction::Repair),
            other => Err(format!("unknown fault action `{other}` (expected fail or repair)")),
        }
    }
}

impl fmt::Display for FaultAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultAction::Fail => "fail",
            FaultAction::Repair => "repair",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaultEvent {
    pub time: SimTime,
    pub pump: Pump,
    pub action: FaultAction,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("fault script events must be in non-decreasing time order (event {0})")]
pub struct UnsortedScript(pub usize);

/// Time-ordered fault events.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FaultScript {
    events: Vec<FaultEvent>,
}

impl FaultScript {
    pub fn new(events: Vec<FaultEvent>) -> Result<Self, UnsortedScript> {
        if let Some(i) = events.windows(2).position(|w| w[1].time < w[0].time) {
            return Err(UnsortedScript(i + 1));
        }
        Ok(FaultScript { events })
    }

    pub fn events(&self) -> &[FaultEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Applies every not-yet-applied event with `time <= now`.
pub fn apply_fault_script(state: &PlantState, script: &FaultScript, now: SimTime) -> PlantState {
    let mut next = state.clone();
    while let Some(ev) = script.events.get(next.script_cursor) {
        if ev.time > now {
            break;
        }
        next.faulted[ev.pump.index()] = ev.action == FaultAction::Fail;
        next.script_cursor += 1;
    }
    next
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemandError {
    #[error("demand profile is empty")]
    Empty,
    #[error("demand profile must start at t = 0")]
    NotFromZero,
    #[error("demand profile times must be strictly increasing (entry {0})")]
    NotIncreasing(usize),
    #[error("demand values must be finite and non-negative (entry {0})")]
    BadValue(usize),
}

/// Piecewise-constant demand schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandProfile {
    steps: Vec<(SimTime, f64)>,
}

impl DemandProfile {
    pub fn new(steps: Vec<(SimTime, f64)>) -> Result<Self, DemandError> {
        match steps.first() {
            None => return Err(DemandError::Empty),
            Some((t, _)) if !t.is_zero() => return Err(DemandError::NotFromZero),
            _ => {}
        }
        if let Some(i) = steps.windows(2).position(|w| w[1].0 <= w[0].0) {
            return Err(DemandError::NotIncreasing(i + 1));
        }
        if let Some(i) = steps.iter().position(|(_, d)| !d.is_finite() || *d < 0.0) {
            return Err(DemandError::BadValue(i));
        }
        Ok(DemandProfile { steps })
    }

    pub fn constant(demand: f64) -> Self {
        DemandProfile::new(vec![(SimTime::ZERO, demand)]).expect("valid constant demand")
    }

    pub fn at(&self, t: SimTime) -> f64 {
        let i = self.steps.partition_point(|(from, _)| *from <= t);
        self.steps[i.saturating_sub(1)].1
    }

    pub fn steps(&self) -> &[(SimTime, f64)] {
        &self.steps
    }
}
