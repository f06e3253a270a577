//! Five-stage duty/standby pump alternation chart and its coupling to the
//! plant model.
//!
//! Stages:
//!
//! | step | role                                   | drives  |
//! |------|----------------------------------------|---------|
//! | S1   | start-up dwell and condition check     | nothing |
//! | S2   | pump A running                         | `cmd_A` |
//! | S3   | pressure monitoring, A was lead        | nothing |
//! | S4   | pump B running (alternation target)    | `cmd_B` |
//! | S5   | pressure monitoring, then back to S1   | nothing |
//!
//! Each demand cycle alternates the lead pump. A running pump hands over
//! to the other one as soon as it faults or has run `t_alt` seconds in a
//! row. Every step's outgoing receptivities are mutually exclusive, so the
//! situation is always a single step and at most one pump is commanded.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::chart::{validate_chart, Action, Chart, CmpOp, Receptivity, SignalDecl, SignalKind, Step, Transition};
use crate::engine::{engine_reset, EngineError, EngineState, ScanEvents};
use crate::io::IoImage;
use crate::plant::{
    plant_step, running_pumps, sensor_read, sensor_read_noisy, PlantParams, PlantState, Pump, SensorImage,
};
use crate::time::SimTime;

pub const PRESSURE: &str = "pressure";
pub const P_LOW: &str = "p_low";
pub const P_HIGH: &str = "p_high";
pub const FAULT_A: &str = "fault_A";
pub const FAULT_B: &str = "fault_B";
pub const CMD_A: &str = "cmd_A";
pub const CMD_B: &str = "cmd_B";

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid alternation parameters: {0}")]
pub struct AlternationParamsError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlternationParams {
    /// Longest uninterrupted run of one pump before handing over, seconds.
    pub t_alt: f64,
    /// Dwell in the start-up step, seconds.
    pub start_delay: f64,
}

impl Default for AlternationParams {
    fn default() -> Self {
        AlternationParams { t_alt: 60.0, start_delay: 2.0 }
    }
}

impl AlternationParams {
    pub fn validate(&self) -> Result<(), AlternationParamsError> {
        let ok = self.t_alt.is_finite()
            && self.start_delay.is_finite()
            && self.start_delay >= 0.0
            && self.t_alt > self.start_delay
            && SimTime::from_secs(self.t_alt).is_some();
        if ok {
            Ok(())
        } else {
            Err(AlternationParamsError(format!(
                "need t_alt > start_delay >= 0 (got t_alt = {}, start_delay = {})",
                self.t_alt, self.start_delay
            )))
        }
    }
}

fn standard_signals() -> Vec<SignalDecl> {
    vec![
        SignalDecl::analog_input(PRESSURE, Some("bar")),
        SignalDecl::bool_input(P_LOW),
        SignalDecl::bool_input(P_HIGH),
        SignalDecl::bool_input(FAULT_A),
        SignalDecl::bool_input(FAULT_B),
        SignalDecl::bool_output(CMD_A),
        SignalDecl::bool_output(CMD_B),
    ]
}

fn sig(name: &str) -> Receptivity {
    Receptivity::signal(name)
}

/// Builds the alternation chart for the given parameters.
pub fn build_alternation_chart(params: &AlternationParams) -> Result<Chart, AlternationParamsError> {
    params.validate()?;
    let t_alt = params.t_alt;
    let ready = || {
        Receptivity::timer("S1", params.start_delay)
            .and(sig(P_LOW))
            // transmitter plausibility: a broken loop reads negative
            .and(Receptivity::compare(PRESSURE, CmpOp::Ge, 0.0))
    };
    let handover = |step: &str, own_fault: &str, other_fault: &str| {
        Receptivity::timer(step, t_alt).or(sig(own_fault)).and(sig(other_fault).not())
    };
    let satisfied =
        |step: &str, own_fault: &str| sig(P_HIGH).and(sig(own_fault).not()).and(Receptivity::timer(step, t_alt).not());

    let chart = Chart {
        name: "pump_alternation".into(),
        signals: standard_signals(),
        steps: vec![
            Step::initial("S1"),
            Step::new("S2").with_action(Action::continuous(CMD_A)),
            Step::new("S3"),
            Step::new("S4").with_action(Action::continuous(CMD_B)),
            Step::new("S5"),
        ],
        transitions: vec![
            Transition::new("T1", &["S1"], &["S2"], ready().and(sig(FAULT_A).not())),
            Transition::new("T2", &["S1"], &["S4"], ready().and(sig(FAULT_A)).and(sig(FAULT_B).not())),
            Transition::new("T3", &["S2"], &["S4"], handover("S2", FAULT_A, FAULT_B)),
            Transition::new("T4", &["S2"], &["S3"], satisfied("S2", FAULT_A)),
            Transition::new("T5", &["S3"], &["S4"], sig(P_LOW).and(sig(FAULT_B).not())),
            Transition::new("T6", &["S3"], &["S2"], sig(P_LOW).and(sig(FAULT_B)).and(sig(FAULT_A).not())),
            Transition::new("T7", &["S4"], &["S2"], handover("S4", FAULT_B, FAULT_A)),
            Transition::new("T8", &["S4"], &["S5"], satisfied("S4", FAULT_B)),
            Transition::new("T9", &["S5"], &["S1"], sig(P_HIGH).not()),
        ],
    };
    debug_assert!(validate_chart(&chart).is_empty());
    Ok(chart)
}

/// Plain two-threshold control of pump A alone: on at low pressure, off at
/// high pressure. No alternation, no failover. Used as the comparison
/// controller in scenario runs.
pub fn build_baseline_chart() -> Chart {
    Chart {
        name: "baseline_hysteresis".into(),
        signals: standard_signals(),
        steps: vec![Step::initial("S1"), Step::new("S2").with_action(Action::continuous(CMD_A))],
        transitions: vec![
            Transition::new("T1", &["S1"], &["S2"], sig(P_LOW)),
            Transition::new("T2", &["S2"], &["S1"], sig(P_HIGH)),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorChannel {
    Pressure,
    PLow,
    PHigh,
    FaultA,
    FaultB,
}

impl SensorChannel {
    fn kind(self) -> SignalKind {
        match self {
            SensorChannel::Pressure => SignalKind::AnalogInput,
            _ => SignalKind::BoolInput,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindingError {
    #[error("chart input `{0}` is not bound to any sensor channel")]
    UnboundInput(String),
    #[error("bound signal `{0}` is not declared by the chart")]
    UndeclaredSignal(String),
    #[error("bound signal `{0}` has the wrong kind for its channel")]
    KindMismatch(String),
    #[error("`{0}` is bound more than once")]
    DuplicateBinding(String),
}

/// Wiring between chart signals and plant channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBinding {
    pub inputs: Vec<(String, SensorChannel)>,
    pub outputs: Vec<(String, Pump)>,
}

impl Default for SignalBinding {
    fn default() -> Self {
        SignalBinding {
            inputs: vec![
                (PRESSURE.into(), SensorChannel::Pressure),
                (P_LOW.into(), SensorChannel::PLow),
                (P_HIGH.into(), SensorChannel::PHigh),
                (FAULT_A.into(), SensorChannel::FaultA),
                (FAULT_B.into(), SensorChannel::FaultB),
            ],
            outputs: vec![(CMD_A.into(), Pump::A), (CMD_B.into(), Pump::B)],
        }
    }
}

impl SignalBinding {
    /// Every chart input must be bound, every bound name declared with a
    /// matching kind, and no name or channel used twice.
    pub fn check(&self, chart: &Chart) -> Result<(), BindingError> {
        let mut names = std::collections::HashSet::new();
        let mut channels = std::collections::HashSet::new();
        for (name, channel) in &self.inputs {
            if !names.insert(name.as_str()) {
                return Err(BindingError::DuplicateBinding(name.clone()));
            }
            if !channels.insert(format!("{channel:?}")) {
                return Err(BindingError::DuplicateBinding(format!("{channel:?}")));
            }
            match chart.signal(name) {
                None => return Err(BindingError::UndeclaredSignal(name.clone())),
                Some(s) if s.kind != channel.kind() => return Err(BindingError::KindMismatch(name.clone())),
                Some(_) => {}
            }
        }
        for (name, pump) in &self.outputs {
            if !names.insert(name.as_str()) {
                return Err(BindingError::DuplicateBinding(name.clone()));
            }
            if !channels.insert(format!("pump {pump}")) {
                return Err(BindingError::DuplicateBinding(format!("pump {pump}")));
            }
            match chart.signal(name) {
                None => return Err(BindingError::UndeclaredSignal(name.clone())),
                Some(s) if s.kind != SignalKind::BoolOutput => return Err(BindingError::KindMismatch(name.clone())),
                Some(_) => {}
            }
        }
        if let Some(unbound) = chart.signals.iter().find(|s| s.kind.is_input() && !names.contains(s.name.as_str())) {
            return Err(BindingError::UnboundInput(unbound.name.clone()));
        }
        Ok(())
    }

    pub fn input_image(&self, sensors: &SensorImage) -> IoImage {
        let mut image = IoImage::new();
        for (name, channel) in &self.inputs {
            match channel {
                SensorChannel::Pressure => {
                    // plant pressure is clamped, hence finite
                    image.set_analog(name, sensors.pressure).expect("finite pressure");
                }
                SensorChannel::PLow => image.set_bool(name, sensors.p_low),
                SensorChannel::PHigh => image.set_bool(name, sensors.p_high),
                SensorChannel::FaultA => image.set_bool(name, sensors.fault_a),
                SensorChannel::FaultB => image.set_bool(name, sensors.fault_b),
            }
        }
        image
    }

    pub fn pump_commands(&self, outputs: &IoImage) -> [bool; 2] {
        let mut cmd = [false; 2];
        for (name, pump) in &self.outputs {
            cmd[pump.index()] |= outputs.bool(name).unwrap_or(false);
        }
        cmd
    }
}

/// Result of one coupled sensor → control → actuator tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    pub sensors: SensorImage,
    pub inputs: IoImage,
    /// Chart outputs as computed by the scan.
    pub outputs: IoImage,
    /// Commands actually sent to the pumps (after any override).
    pub pump_cmd: [bool; 2],
    /// Pumps that delivered flow during the tick.
    pub running: [bool; 2],
    pub events: ScanEvents,
}

/// One coupled tick without sensor noise: the plant is sampled first, the
/// chart scans on the bound inputs, then the plant integrates under the
/// bound pump commands.
#[allow(clippy::too_many_arguments)]
pub fn closed_loop_step(
    engine: &EngineState,
    plant: &PlantState,
    prev_sensors: &SensorImage,
    binding: &SignalBinding,
    params: &PlantParams,
    demand: f64,
    dt: SimTime,
) -> Result<(EngineState, PlantState, Tick), EngineError> {
    let sensors = sensor_read(plant, params, prev_sensors);
    actuate(engine, plant, sensors, binding, params, demand, dt, None)
}

#[allow(clippy::too_many_arguments)]
fn actuate(
    engine: &EngineState,
    plant: &PlantState,
    sensors: SensorImage,
    binding: &SignalBinding,
    params: &PlantParams,
    demand: f64,
    dt: SimTime,
    pump_override: Option<[bool; 2]>,
) -> Result<(EngineState, PlantState, Tick), EngineError> {
    let inputs = binding.input_image(&sensors);
    let scan = engine.scan(&inputs, dt)?;
    let pump_cmd = pump_override.unwrap_or_else(|| binding.pump_commands(&scan.outputs));
    let running = running_pumps(plant, pump_cmd);
    let next_plant = plant_step(plant, params, pump_cmd, demand, dt);
    let tick = Tick { sensors, inputs, outputs: scan.outputs, pump_cmd, running, events: scan.events };
    Ok((scan.state, next_plant, tick))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoopError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Binding(#[from] BindingError),
    #[error(transparent)]
    Plant(#[from] crate::plant::PlantParamsError),
}

/// Owned closed-loop simulation: engine, plant, switch memory and the
/// noise generator.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub engine: EngineState,
    pub plant: PlantState,
    pub sensors: SensorImage,
    binding: SignalBinding,
    params: PlantParams,
    rng: ChaCha8Rng,
}

impl ClosedLoop {
    pub fn new(chart: Arc<Chart>, params: PlantParams, binding: SignalBinding, seed: u64) -> Result<Self, LoopError> {
        params.validate()?;
        binding.check(&chart)?;
        let engine = engine_reset(chart, SimTime::ZERO)?;
        Ok(ClosedLoop {
            engine,
            plant: PlantState::initial(&params),
            sensors: SensorImage::default(),
            binding,
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn binding(&self) -> &SignalBinding {
        &self.binding
    }

    pub fn clock(&self) -> SimTime {
        self.engine.clock()
    }

    /// Advances one tick. `pump_override` replaces the chart's pump
    /// commands (manual operation); the chart still scans. On error
    /// nothing changes.
    pub fn tick(&mut self, demand: f64, dt: SimTime, pump_override: Option<[bool; 2]>) -> Result<Tick, EngineError> {
        let mut rng = self.rng.clone();
        let sensors = sensor_read_noisy(&self.plant, &self.params, &self.sensors, &mut rng);
        let (engine, plant, tick) =
            actuate(&self.engine, &self.plant, sensors, &self.binding, &self.params, demand, dt, pump_override)?;
        self.engine = engine;
        self.plant = plant;
        self.sensors = sensors;
        self.rng = rng;
        Ok(tick)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_chart, print_chart};

    #[test]
    fn five_steps_and_valid() {
        let chart = build_alternation_chart(&AlternationParams::default()).unwrap();
        assert_eq!(chart.steps.len(), 5);
        assert!(chart.transitions.len() >= 5);
        assert!(validate_chart(&chart).is_empty());
        assert_eq!(chart.initial_steps().map(|s| s.id.as_str()).collect::<Vec<_>>(), vec!["S1"]);
    }

    #[test]
    fn alternation_timer_is_parameterized() {
        let chart = build_alternation_chart(&AlternationParams { t_alt: 3600.0, start_delay: 2.0 }).unwrap();
        let t3 = chart.transitions.iter().find(|t| t.upstream == ["S2"] && t.downstream == ["S4"]).unwrap();
        let mut found = false;
        t3.receptivity.visit_preorder(&mut |_, n| {
            found |= *n == Receptivity::timer("S2", 3600.0);
        });
        assert!(found);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(build_alternation_chart(&AlternationParams { t_alt: 1.0, start_delay: 2.0 }).is_err());
        assert!(build_alternation_chart(&AlternationParams { t_alt: 10.0, start_delay: -1.0 }).is_err());
        assert!(build_alternation_chart(&AlternationParams { t_alt: f64::NAN, start_delay: 0.0 }).is_err());
    }

    #[test]
    fn round_trips_through_text() {
        let chart = build_alternation_chart(&AlternationParams::default()).unwrap();
        let parsed = parse_chart(&print_chart(&chart)).unwrap();
        assert_eq!(parsed.chart, chart);
        assert!(parsed.warnings.is_empty(), "{:?}", parsed.warnings);
    }

    #[test]
    fn binding_checks() {
        let chart = build_alternation_chart(&AlternationParams::default()).unwrap();
        assert!(SignalBinding::default().check(&chart).is_ok());
        assert!(SignalBinding::default().check(&build_baseline_chart()).is_ok());

        let mut missing = SignalBinding::default();
        missing.inputs.pop();
        assert_eq!(missing.check(&chart), Err(BindingError::UnboundInput(FAULT_B.into())));

        let mut twice = SignalBinding::default();
        twice.inputs[4].1 = SensorChannel::FaultA;
        assert!(matches!(twice.check(&chart), Err(BindingError::DuplicateBinding(_))));

        let mut wrong = SignalBinding::default();
        wrong.inputs[0].1 = SensorChannel::PLow;
        wrong.inputs[1].1 = SensorChannel::Pressure;
        assert_eq!(wrong.check(&chart), Err(BindingError::KindMismatch(PRESSURE.into())));
    }

    fn run_until(lp: &mut ClosedLoop, demand: f64, max_ticks: usize, pred: impl Fn(&Tick) -> bool) -> Option<usize> {
        let dt = SimTime::from_millis(100);
        (0..max_ticks).find(|_| pred(&lp.tick(demand, dt, None).unwrap()))
    }

    #[test]
    fn low_pressure_starts_pump_a_after_dwell() {
        let chart = Arc::new(build_alternation_chart(&AlternationParams::default()).unwrap());
        let params = PlantParams { initial_pressure: 2.0, ..PlantParams::default() };
        let mut lp = ClosedLoop::new(chart, params, SignalBinding::default(), 0).unwrap();
        // dwell is 2 s = 20 ticks; cmd_A appears on the tick whose clock is 2.0
        let tick = run_until(&mut lp, 0.8, 100, |t| t.pump_cmd == [true, false]).unwrap();
        assert_eq!(tick, 19);
        assert_eq!(lp.clock(), SimTime::from_whole_secs(2));
    }

    #[test]
    fn fault_on_running_pump_fails_over_in_the_same_tick() {
        let chart = Arc::new(build_alternation_chart(&AlternationParams::default()).unwrap());
        let params = PlantParams { initial_pressure: 2.0, ..PlantParams::default() };
        let mut lp = ClosedLoop::new(chart, params, SignalBinding::default(), 0).unwrap();
        run_until(&mut lp, 0.8, 100, |t| t.pump_cmd[0]).unwrap();
        lp.plant.faulted[0] = true;
        let t = lp.tick(0.8, SimTime::from_millis(100), None).unwrap();
        assert!(t.sensors.fault_a);
        assert_eq!(t.pump_cmd, [false, true]);
        assert_eq!(lp.engine.marking().active().collect::<Vec<_>>(), vec!["S4"]);
        for _ in 0..50 {
            let t = lp.tick(0.8, SimTime::from_millis(100), None).unwrap();
            assert!(!t.pump_cmd[0]);
        }
    }

    #[test]
    fn satisfied_monitoring_is_stable() {
        let chart = Arc::new(build_alternation_chart(&AlternationParams::default()).unwrap());
        let params = PlantParams { initial_pressure: 2.0, ..PlantParams::default() };
        let mut lp = ClosedLoop::new(chart, params, SignalBinding::default(), 0).unwrap();
        run_until(&mut lp, 0.8, 500, |_| false);
        let in_s3 = run_until(&mut lp, 0.8, 500, |t| t.events.activated == ["S3"]);
        assert!(in_s3.is_some());
        for _ in 0..200 {
            let t = lp.tick(0.0, SimTime::from_millis(100), None).unwrap();
            assert!(t.events.fired.is_empty());
            assert_eq!(t.pump_cmd, [false, false]);
        }
        assert_eq!(lp.engine.marking().active().collect::<Vec<_>>(), vec!["S3"]);
    }

    #[test]
    fn free_function_matches_owned_loop() {
        let chart = Arc::new(build_alternation_chart(&AlternationParams::default()).unwrap());
        let params = PlantParams::default();
        let binding = SignalBinding::default();
        let mut lp = ClosedLoop::new(chart.clone(), params.clone(), binding.clone(), 3).unwrap();
        let mut engine = engine_reset(chart, SimTime::ZERO).unwrap();
        let mut plant = PlantState::initial(&params);
        let mut sensors = SensorImage::default();
        for _ in 0..500 {
            let (e, p, t) =
                closed_loop_step(&engine, &plant, &sensors, &binding, &params, 0.8, SimTime::from_millis(100)).unwrap();
            let owned = lp.tick(0.8, SimTime::from_millis(100), None).unwrap();
            assert_eq!(owned, t);
            engine = e;
            plant = p;
            sensors = t.sensors;
        }
        assert_eq!(plant, lp.plant);
    }
}
