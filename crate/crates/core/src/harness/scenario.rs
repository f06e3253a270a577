//! Scenario files: a sectioned key/value text format.
//!
//! ```text
//! [run]
//! chart = ../assets/alternation.gft
//! controller = grafcet
//! duration = 300
//! dt = 0.1
//! seed = 7
//! warmup = 5
//!
//! [plant]
//! k_demand = 0.4
//!
//! [alternation]
//! t_alt = 60
//!
//! [demand]
//! at = 0 0.8
//! at = 120 1.1
//!
//! [faults]
//! at = 30 A fail
//! at = 45 A repair
//! ```
//!
//! `#` and `;` start comments. Keys are unique within a section except
//! `at`, which appends one schedule entry per line.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::alternation::AlternationParams;
use crate::plant::{DemandProfile, FaultAction, FaultEvent, FaultScript, PlantParams, Pump};
use crate::time::SimTime;

/// Largest number of ticks a single scenario may request.
pub const MAX_TICKS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Controller {
    /// The chart named by the scenario, or the generated alternation chart.
    #[default]
    Grafcet,
    /// Two-threshold control of pump A alone.
    BaselineHysteresis,
}

impl Controller {
    pub fn as_str(self) -> &'static str {
        match self {
            Controller::Grafcet => "grafcet",
            Controller::BaselineHysteresis => "baseline-hysteresis",
        }
    }
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Controller {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grafcet" => Ok(Controller::Grafcet),
            "baseline-hysteresis" => Ok(Controller::BaselineHysteresis),
            other => Err(format!("unknown controller `{other}` (expected grafcet or baseline-hysteresis)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Chart file for the grafcet controller. When absent the alternation
    /// chart is generated from `alternation`.
    pub chart: Option<PathBuf>,
    pub controller: Controller,
    pub plant: PlantParams,
    pub alternation: AlternationParams,
    pub demand: DemandProfile,
    pub faults: FaultScript,
    pub duration: SimTime,
    pub dt: SimTime,
    /// Leading window excluded from downtime.
    pub warmup: SimTime,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            chart: None,
            controller: Controller::Grafcet,
            plant: PlantParams::default(),
            alternation: AlternationParams::default(),
            demand: DemandProfile::constant(0.8),
            faults: FaultScript::default(),
            duration: SimTime::from_whole_secs(300),
            dt: SimTime::from_millis(100),
            warmup: SimTime::from_whole_secs(5),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}{message}", .line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError { line: Some(line), message: message.into() }
    }

    fn global(message: impl Into<String>) -> Self {
        ConfigError { line: None, message: message.into() }
    }
}

impl ScenarioConfig {
    /// Number of ticks in a run: `ceil(duration / dt)`.
    pub fn ticks(&self) -> u64 {
        self.duration.as_nanos().div_ceil(self.dt.as_nanos().max(1))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.duration.is_zero() {
            return Err(ConfigError::global("duration must be positive"));
        }
        if self.dt.is_zero() {
            return Err(ConfigError::global("dt must be positive"));
        }
        if self.ticks() > MAX_TICKS {
            return Err(ConfigError::global(format!("duration / dt exceeds {MAX_TICKS} ticks")));
        }
        self.plant.validate().map_err(|e| ConfigError::global(e.to_string()))?;
        self.alternation.validate().map_err(|e| ConfigError::global(e.to_string()))?;
        Ok(())
    }

    /// Parses scenario text. Relative chart paths are resolved against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let mut demand: Vec<(SimTime, f64)> = Vec::new();
        let mut faults: Vec<FaultEvent> = Vec::new();
        let mut demand_line = None;
        let mut faults_line = None;
        let mut section: Option<String> = None;
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        let mut sections: BTreeSet<String> = BTreeSet::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line_no, "section header is missing `]`"))?
                    .trim();
                if !matches!(name, "run" | "plant" | "alternation" | "demand" | "faults") {
                    return Err(ConfigError::at(line_no, format!("unknown section [{name}]")));
                }
                if !sections.insert(name.to_owned()) {
                    return Err(ConfigError::at(line_no, format!("section [{name}] appears twice")));
                }
                section = Some(name.to_owned());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| ConfigError::at(line_no, "expected `key = value`"))?;
            let Some(sec) = section.as_deref() else {
                return Err(ConfigError::at(line_no, "key outside of any section"));
            };
            if key != "at" && !seen.insert((sec.to_owned(), key.to_owned())) {
                return Err(ConfigError::at(line_no, format!("duplicate key `{key}` in [{sec}]")));
            }
            let err = |m: String| ConfigError::at(line_no, m);
            match (sec, key) {
                ("run", "chart") => cfg.chart = Some(base_dir.join(value)),
                ("run", "controller") => cfg.controller = value.parse().map_err(err)?,
                ("run", "duration") => cfg.duration = seconds(value).map_err(err)?,
                ("run", "dt") => cfg.dt = seconds(value).map_err(err)?,
                ("run", "warmup") => cfg.warmup = seconds(value).map_err(err)?,
                ("run", "seed") => cfg.seed = value.parse().map_err(|_| err(format!("invalid seed `{value}`")))?,
                ("plant", k) => {
                    *plant_field(&mut cfg.plant, k).ok_or_else(|| unknown(line_no, sec, k))? =
                        real(value).map_err(err)?
                }
                ("alternation", "t_alt") => cfg.alternation.t_alt = real(value).map_err(err)?,
                ("alternation", "start_delay") => cfg.alternation.start_delay = real(value).map_err(err)?,
                ("demand", "at") => {
                    demand_line.get_or_insert(line_no);
                    let [t, d] = fields(value).map_err(err)?;
                    demand.push((seconds(t).map_err(err)?, real(d).map_err(err)?));
                }
                ("faults", "at") => {
                    faults_line.get_or_insert(line_no);
                    let [t, pump, action] = fields(value).map_err(err)?;
                    faults.push(FaultEvent {
                        time: seconds(t).map_err(err)?,
                        pump: pump.parse::<Pump>().map_err(err)?,
                        action: action.parse::<FaultAction>().map_err(err)?,
                    });
                }
                (sec, key) => return Err(unknown(line_no, sec, key)),
            }
        }

        if cfg.chart.is_some() && sections.contains("alternation") {
            return Err(ConfigError::global(
                "[alternation] only applies to the generated chart; remove it or the chart key",
            ));
        }
        if !demand.is_empty() {
            cfg.demand =
                DemandProfile::new(demand).map_err(|e| ConfigError { line: demand_line, message: e.to_string() })?;
        }
        cfg.faults = FaultScript::new(faults).map_err(|e| ConfigError { line: faults_line, message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn unknown(line: usize, section: &str, key: &str) -> ConfigError {
    ConfigError::at(line, format!("unknown key `{key}` in [{section}]"))
}

fn real(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("invalid number `{s}`")),
    }
}

fn seconds(s: &str) -> Result<SimTime, String> {
    real(s).ok().and_then(SimTime::from_secs).ok_or_else(|| format!("invalid duration `{s}`"))
}

fn fields<const N: usize>(s: &str) -> Result<[&str; N], String> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    parts.try_into().map_err(|p: Vec<&str>| format!("expected {N} fields, found {}", p.len()))
}

fn plant_field<'a>(p: &'a mut PlantParams, key: &str) -> Option<&'a mut f64> {
    Some(match key {
        "p_max" => &mut p.p_max,
        "k_pump" => &mut p.k_pump,
        "k_demand" => &mut p.k_demand,
        "p_set_low" => &mut p.p_set_low,
        "p_set_high" => &mut p.p_set_high,
        "p_crit" => &mut p.p_crit,
        "pump_power" => &mut p.pump_power,
        "hysteresis" => &mut p.hysteresis,
        "noise" => &mut p.noise,
        "initial_pressure" => &mut p.initial_pressure,
        _ => return None,
    })
}
