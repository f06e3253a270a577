//! GRAFCET sequential-control engine.
//!
//! * [`chart`]: chart model and structural validation
//! * [`evolution`]: situation, receptivity evaluation, enabling and firing
//! * [`dsl`]: the `.gft` text format (parser with diagnostics, canonical printer)
//! * [`engine`]: deterministic scan-cycle executor
//! * [`plant`]: two-pump hydraulic model with hysteresis switches and faults
//! * [`alternation`]: the duty/standby alternation chart and closed-loop coupling
//! * [`harness`]: scenario files, closed-loop runs, trace export and metrics
//! * [`session`]: live, command-driven closed-loop session

pub mod alternation;
pub mod chart;
pub mod dsl;
pub mod engine;
pub mod evolution;
pub mod harness;
pub mod io;
pub mod plant;
pub mod session;
pub mod time;

pub use chart::{validate_chart, Chart, Receptivity, SignalDecl, SignalKind, Step, Transition};
pub use engine::{engine_reset, run_trace, EngineError, EngineState, ScanEvents, ScanOutcome};
pub use evolution::{eval_receptivity, fire_set, fireable_transitions, Marking};
pub use io::IoImage;
pub use plant::{PlantParams, PlantState, Pump};
pub use time::SimTime;
