//! Live closed-loop session driven by operator commands.
//!
//! The session is a plain value owned by one loop. Commands are validated
//! when they arrive; run control (`start`, `pause`, `set_speed`, `reset`)
//! takes effect immediately, while anything that touches the process
//! (`set_demand`, `inject_fault`, `set_mode`, `manual_pump`) is held until
//! the next scan and applied just before it. Acknowledgements name that
//! scan, so a snapshot shows a command's effect exactly from the acked
//! scan index on.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alternation::{ClosedLoop, LoopError, SignalBinding, Tick};
use crate::chart::{Chart, SignalKind};
use crate::engine::EngineError;
use crate::io::IoImage;
use crate::plant::{FaultAction, PlantParams, Pump};
use crate::time::SimTime;

pub const PROTOCOL_VERSION: u32 = 1;
pub const MIN_SPEED: f64 = 0.1;
pub const MAX_SPEED: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Auto,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum SessionCommand {
    Start,
    Pause,
    Reset,
    SetSpeed { multiplier: f64 },
    SetDemand { demand: f64 },
    InjectFault { pump: Pump, action: FaultAction },
    SetMode { mode: Mode },
    ManualPump { pump: Pump, state: Switch },
}

impl SessionCommand {
    pub fn name(&self) -> &'static str {
        match self {
            SessionCommand::Start => "start",
            SessionCommand::Pause => "pause",
            SessionCommand::Reset => "reset",
            SessionCommand::SetSpeed { .. } => "set_speed",
            SessionCommand::SetDemand { .. } => "set_demand",
            SessionCommand::InjectFault { .. } => "inject_fault",
            SessionCommand::SetMode { .. } => "set_mode",
            SessionCommand::ManualPump { .. } => "manual_pump",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    ModeViolation,
    BadMultiplier,
    BadDemand,
    Malformed,
    /// The session loop is gone.
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message}")]
pub struct Rejection {
    pub reason: RejectReason,
    pub message: String,
}

/// Accepted command: its effects are visible from `effective_scan` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub effective_scan: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{source}")]
pub struct ScanFailure {
    pub scan_index: u64,
    pub source: EngineError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub chart: Arc<Chart>,
    pub plant: PlantParams,
    pub dt: SimTime,
    pub demand: f64,
    pub seed: u64,
}

/// Value attached to a signal in a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SignalValue {
    Bool(bool),
    Real(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerPump<T> {
    #[serde(rename = "A")]
    pub a: T,
    #[serde(rename = "B")]
    pub b: T,
}

impl<T: Copy> From<[T; 2]> for PerPump<T> {
    fn from(v: [T; 2]) -> Self {
        PerPump { a: v[0], b: v[1] }
    }
}

/// Immutable picture of the session after a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub v: u32,
    pub t: &'static str,
    /// Incremented by every reset.
    pub epoch: u64,
    pub clock: f64,
    pub scan_index: u64,
    pub running: bool,
    pub mode: Mode,
    pub speed: f64,
    pub demand: f64,
    pub marking: Vec<String>,
    pub inputs: BTreeMap<String, SignalValue>,
    pub outputs: BTreeMap<String, SignalValue>,
    pub pressure: f64,
    pub pump_cmd: PerPump<bool>,
    pub pumps_running: PerPump<bool>,
    pub run_seconds: PerPump<f64>,
    pub faults: PerPump<bool>,
    /// Transitions fired by the last scan, one list per firing round.
    pub fired: Vec<Vec<String>>,
}

/// Process-side state changes waiting for the next scan.
#[derive(Debug, Clone, Default, PartialEq)]
struct Pending {
    demand: Option<f64>,
    faults: Vec<(Pump, FaultAction)>,
    mode: Option<Mode>,
    manual: Vec<(Pump, bool)>,
}

#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    lp: ClosedLoop,
    epoch: u64,
    running: bool,
    speed: f64,
    demand: f64,
    mode: Mode,
    manual: [bool; 2],
    pending: Pending,
    last: Option<Tick>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, LoopError> {
        let lp =
            ClosedLoop::new(Arc::clone(&config.chart), config.plant.clone(), SignalBinding::default(), config.seed)?;
        Ok(Session {
            demand: config.demand,
            config,
            lp,
            epoch: 0,
            running: false,
            speed: 1.0,
            mode: Mode::Auto,
            manual: [false; 2],
            pending: Pending::default(),
            last: None,
        })
    }

    pub fn dt(&self) -> SimTime {
        self.config.dt
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    pub fn scan_index(&self) -> u64 {
        self.lp.engine.scan_index()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    fn pending_mode(&self) -> Mode {
        self.pending.mode.unwrap_or(self.mode)
    }

    /// Validates and accepts a command. Must be called between scans.
    pub fn apply_command(&mut self, cmd: SessionCommand) -> Result<Ack, Rejection> {
        let reject = |reason, message: &str| Err(Rejection { reason, message: message.to_owned() });
        match cmd {
            SessionCommand::Start => self.running = true,
            SessionCommand::Pause => self.running = false,
            SessionCommand::Reset => self.reset(),
            SessionCommand::SetSpeed { multiplier } => {
                if !(MIN_SPEED..=MAX_SPEED).contains(&multiplier) {
                    return reject(RejectReason::BadMultiplier, "speed multiplier must lie within [0.1, 1000]");
                }
                self.speed = multiplier;
            }
            SessionCommand::SetDemand { demand } => {
                if !demand.is_finite() || demand < 0.0 {
                    return reject(RejectReason::BadDemand, "demand must be a finite non-negative number");
                }
                self.pending.demand = Some(demand);
            }
            SessionCommand::InjectFault { pump, action } => self.pending.faults.push((pump, action)),
            SessionCommand::SetMode { mode } => self.pending.mode = Some(mode),
            SessionCommand::ManualPump { pump, state } => {
                if self.pending_mode() != Mode::Manual {
                    return reject(RejectReason::ModeViolation, "manual_pump is only accepted in manual mode");
                }
                self.pending.manual.push((pump, state == Switch::On));
            }
        }
        Ok(Ack { effective_scan: self.scan_index() + 1 })
    }

    fn reset(&mut self) {
        let lp = ClosedLoop::new(
            Arc::clone(&self.config.chart),
            self.config.plant.clone(),
            SignalBinding::default(),
            self.config.seed,
        )
        .expect("configuration was accepted at construction");
        self.lp = lp;
        self.epoch += 1;
        self.running = false;
        self.demand = self.config.demand;
        self.mode = Mode::Auto;
        self.manual = [false; 2];
        self.pending = Pending::default();
        self.last = None;
    }

    /// Applies held commands and runs one scan, whether or not the session
    /// is running. A failed scan pauses the session and leaves the process
    /// state as it was before the scan.
    pub fn step(&mut self) -> Result<&Tick, ScanFailure> {
        let pending = std::mem::take(&mut self.pending);
        if let Some(d) = pending.demand {
            self.demand = d;
        }
        for (pump, action) in pending.faults {
            self.lp.plant.faulted[pump.index()] = action == FaultAction::Fail;
        }
        if let Some(m) = pending.mode {
            if m != self.mode {
                self.manual = [false; 2];
            }
            self.mode = m;
        }
        for (pump, on) in pending.manual {
            self.manual[pump.index()] = on;
        }

        let pump_override = (self.mode == Mode::Manual).then_some(self.manual);
        match self.lp.tick(self.demand, self.config.dt, pump_override) {
            Ok(tick) => Ok(self.last.insert(tick)),
            Err(source) => {
                self.running = false;
                Err(ScanFailure { scan_index: self.scan_index() + 1, source })
            }
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let chart = &self.config.chart;
        let engine = &self.lp.engine;
        let (inputs, outputs, pump_cmd, running, fired) = match &self.last {
            Some(t) => (t.inputs.clone(), t.outputs.clone(), t.pump_cmd, t.running, t.events.fired.clone()),
            None => {
                let outputs = IoImage::new();
                (engine.prev_inputs().clone(), outputs, [false; 2], [false; 2], Vec::new())
            }
        };
        let plant = &self.lp.plant;
        let value_map = |image: &IoImage, pick: &dyn Fn(SignalKind) -> bool| {
            chart
                .signals
                .iter()
                .filter(|s| pick(s.kind))
                .map(|s| {
                    let v = match s.kind {
                        SignalKind::AnalogInput => SignalValue::Real(image.analog(&s.name).unwrap_or(0.0)),
                        _ => SignalValue::Bool(image.bool(&s.name).unwrap_or(false)),
                    };
                    (s.name.clone(), v)
                })
                .collect()
        };
        Snapshot {
            v: PROTOCOL_VERSION,
            t: "snapshot",
            epoch: self.epoch,
            clock: engine.clock().as_secs(),
            scan_index: engine.scan_index(),
            running: self.running,
            mode: self.mode,
            speed: self.speed,
            demand: self.demand,
            marking: engine.marking().active_in_order(chart).into_iter().map(str::to_owned).collect(),
            inputs: value_map(&inputs, &|k| k.is_input()),
            outputs: value_map(&outputs, &|k| k == SignalKind::BoolOutput),
            pressure: plant.pressure,
            pump_cmd: pump_cmd.into(),
            pumps_running: running.into(),
            run_seconds: [plant.run_seconds(Pump::A), plant.run_seconds(Pump::B)].into(),
            faults: plant.faulted.into(),
            fired,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alternation::{build_alternation_chart, AlternationParams, CMD_A, CMD_B};
    use crate::harness::{run_with_chart, ScenarioConfig};
    use crate::plant::{DemandProfile, FaultEvent, FaultScript};

    fn session() -> Session {
        let chart = Arc::new(build_alternation_chart(&AlternationParams::default()).unwrap());
        Session::new(SessionConfig {
            chart,
            plant: PlantParams::default(),
            dt: SimTime::from_millis(100),
            demand: 0.8,
            seed: 0,
        })
        .unwrap()
    }

    #[test]
    fn initial_snapshot() {
        let s = session().snapshot();
        assert_eq!((s.v, s.t, s.scan_index), (1, "snapshot", 0));
        assert_eq!(s.marking, vec!["S1"]);
        assert_eq!(s.outputs.get(CMD_A), Some(&SignalValue::Bool(false)));
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["faults"]["A"], false);
        assert_eq!(json["mode"], "auto");
    }

    #[test]
    fn command_parsing() {
        let c: SessionCommand = serde_json::from_str(r#"{"cmd":"manual_pump","pump":"A","state":"on"}"#).unwrap();
        assert_eq!(c, SessionCommand::ManualPump { pump: Pump::A, state: Switch::On });
        let c: SessionCommand = serde_json::from_str(r#"{"cmd":"inject_fault","pump":"B","action":"fail"}"#).unwrap();
        assert_eq!(c.name(), "inject_fault");
        assert!(serde_json::from_str::<SessionCommand>(r#"{"cmd":"warp"}"#).is_err());
    }

    #[test]
    fn rejections() {
        let mut s = session();
        let e = s.apply_command(SessionCommand::ManualPump { pump: Pump::A, state: Switch::On }).unwrap_err();
        assert_eq!(e.reason, RejectReason::ModeViolation);
        for m in [0.0, 0.09, 1000.5, f64::NAN] {
            let e = s.apply_command(SessionCommand::SetSpeed { multiplier: m }).unwrap_err();
            assert_eq!(e.reason, RejectReason::BadMultiplier);
        }
        assert!(s.apply_command(SessionCommand::SetSpeed { multiplier: 1000.0 }).is_ok());
        let e = s.apply_command(SessionCommand::SetDemand { demand: -1.0 }).unwrap_err();
        assert_eq!(e.reason, RejectReason::BadDemand);
    }

    #[test]
    fn manual_pump_follows_a_pending_mode_change() {
        let mut s = session();
        s.apply_command(SessionCommand::SetMode { mode: Mode::Manual }).unwrap();
        assert!(s.apply_command(SessionCommand::ManualPump { pump: Pump::B, state: Switch::On }).is_ok());
        s.step().unwrap();
        let snap = s.snapshot();
        assert_eq!(snap.pump_cmd, PerPump { a: false, b: true });
        assert_eq!(snap.mode, Mode::Manual);
    }

    #[test]
    fn effects_appear_exactly_from_the_acked_scan() {
        let mut s = session();
        for _ in 0..3 {
            s.step().unwrap();
        }
        let ack = s.apply_command(SessionCommand::InjectFault { pump: Pump::A, action: FaultAction::Fail }).unwrap();
        assert_eq!(ack.effective_scan, 4);
        assert!(!s.snapshot().faults.a);
        s.step().unwrap();
        let snap = s.snapshot();
        assert_eq!(snap.scan_index, 4);
        assert!(snap.faults.a);
        assert_eq!(snap.inputs.get("fault_A"), Some(&SignalValue::Bool(true)));
    }

    #[test]
    fn manual_mode_keeps_the_chart_evolving() {
        let mut s = session();
        s.apply_command(SessionCommand::SetMode { mode: Mode::Manual }).unwrap();
        s.apply_command(SessionCommand::SetDemand { demand: 1.0 }).unwrap();
        let mut saw_chart_output = false;
        for _ in 0..200 {
            let t = s.step().unwrap();
            assert_eq!(t.pump_cmd, [false, false]);
            saw_chart_output |= t.outputs.bool(CMD_A) == Some(true) || t.outputs.bool(CMD_B) == Some(true);
        }
        assert!(saw_chart_output);
        s.apply_command(SessionCommand::SetMode { mode: Mode::Auto }).unwrap();
        let t = s.step().unwrap();
        assert_eq!(t.pump_cmd, [t.outputs.bool(CMD_A).unwrap(), t.outputs.bool(CMD_B).unwrap()]);
    }

    #[test]
    fn reset_restores_the_initial_state() {
        let mut s = session();
        s.apply_command(SessionCommand::Start).unwrap();
        for _ in 0..50 {
            s.step().unwrap();
        }
        s.apply_command(SessionCommand::Reset).unwrap();
        let snap = s.snapshot();
        assert_eq!((snap.scan_index, snap.epoch, snap.running), (0, 1, false));
        assert_eq!(snap.marking, vec!["S1"]);
    }

    #[test]
    fn matches_the_offline_run_for_the_same_script() {
        let mut s = session();
        let dt = s.dt();
        // commands issued after scan k take effect at scan k + 1
        let script: BTreeMap<u64, Vec<SessionCommand>> = BTreeMap::from([
            (100, vec![SessionCommand::SetDemand { demand: 1.1 }]),
            (250, vec![SessionCommand::InjectFault { pump: Pump::A, action: FaultAction::Fail }]),
            (400, vec![SessionCommand::InjectFault { pump: Pump::A, action: FaultAction::Repair }]),
        ]);
        let mut live = Vec::new();
        for k in 0..600u64 {
            for c in script.get(&k).into_iter().flatten() {
                assert_eq!(s.apply_command(c.clone()).unwrap().effective_scan, k + 1);
            }
            let t = s.step().unwrap().clone();
            live.push((s.scan_index(), s.snapshot().marking, t.outputs));
        }

        let at = |k: u64| dt.checked_mul(k + 1).unwrap();
        let cfg = ScenarioConfig {
            demand: DemandProfile::new(vec![(SimTime::ZERO, 0.8), (at(100), 1.1)]).unwrap(),
            faults: FaultScript::new(vec![
                FaultEvent { time: at(250), pump: Pump::A, action: FaultAction::Fail },
                FaultEvent { time: at(400), pump: Pump::A, action: FaultAction::Repair },
            ])
            .unwrap(),
            duration: dt.checked_mul(600).unwrap(),
            dt,
            ..ScenarioConfig::default()
        };
        let run = run_with_chart(&cfg, Arc::clone(&s.config.chart)).unwrap();
        let offline: Vec<_> = run.trace.into_iter().map(|r| (r.scan_index, r.marking, r.outputs)).collect();
        assert_eq!(live, offline);
    }

    #[test]
    fn unstable_scan_pauses_and_reports() {
        let text = "signal pressure : analog_in\nsignal p_low : bool_in\nsignal p_high : bool_in\n\
                    signal fault_A : bool_in\nsignal fault_B : bool_in\nsignal cmd_A : bool_out\n\
                    signal cmd_B : bool_out\nstep S1 initial\nstep S2\n\
                    trans T1 : S1 -> S2 when fault_A;\ntrans T2 : S2 -> S1 when fault_A;\n\
                    trans T3 : S1 -> S1 when p_low & p_high & fault_B & pressure < 0.0;\n";
        let chart = Arc::new(crate::dsl::parse_str(text).unwrap().chart);
        let mut s = Session::new(SessionConfig {
            chart,
            plant: PlantParams::default(),
            dt: SimTime::from_millis(100),
            demand: 0.5,
            seed: 0,
        })
        .unwrap();
        s.apply_command(SessionCommand::Start).unwrap();
        s.step().unwrap();
        s.apply_command(SessionCommand::InjectFault { pump: Pump::A, action: FaultAction::Fail }).unwrap();
        let err = s.step().unwrap_err();
        assert_eq!(err.scan_index, 2);
        assert!(matches!(err.source, EngineError::Unstable { .. }));
        assert!(!s.is_running());
        assert_eq!(s.scan_index(), 1);
    }
}
