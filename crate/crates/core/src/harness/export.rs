//! Trace CSV and metrics JSON. Both are byte-stable for a given run.

use std::io::Write;

use csv::{Terminator, WriterBuilder};

use super::{MetricsReport, ScenarioRun};
use crate::chart::SignalKind;
use crate::time::SimTime;

fn clock(t: SimTime) -> String {
    let n = t.as_nanos();
    format!("{}.{:06}", n / 1_000_000_000, (n % 1_000_000_000) / 1_000)
}

fn real(v: f64) -> String {
    format!("{v:.6}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Writes the trace with a header row. Chart signals appear as columns in
/// declaration order; booleans are `0`/`1`, reals carry six decimals.
pub fn write_trace_csv<W: Write>(run: &ScenarioRun, out: W) -> csv::Result<()> {
    let mut w = WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(out);
    let chart = &run.chart;
    let inputs: Vec<_> = chart.signals.iter().filter(|s| s.kind.is_input()).collect();
    let outputs: Vec<_> = chart.signals_of(SignalKind::BoolOutput).collect();

    let mut header = vec!["scan".to_owned(), "clock".into(), "demand".into(), "marking".into()];
    header.extend(inputs.iter().map(|s| s.name.clone()));
    header.extend(outputs.iter().map(|s| s.name.clone()));
    header.extend(
        ["plant_pressure", "pump_A_cmd", "pump_B_cmd", "pump_A_running", "pump_B_running", "fired"].map(String::from),
    );
    w.write_record(&header)?;

    for r in &run.trace {
        let mut rec = vec![r.scan_index.to_string(), clock(r.clock), real(r.demand), r.marking.join(" ")];
        for s in &inputs {
            rec.push(match s.kind {
                SignalKind::AnalogInput => real(r.inputs.analog(&s.name).unwrap_or(f64::NAN)),
                _ => flag(r.inputs.bool(&s.name).unwrap_or(false)).into(),
            });
        }
        for s in &outputs {
            rec.push(flag(r.outputs.bool(&s.name).unwrap_or(false)).into());
        }
        rec.push(real(r.pressure));
        rec.extend([r.pump_cmd[0], r.pump_cmd[1], r.running[0], r.running[1]].map(|b| flag(b).to_owned()));
        rec.push(r.fired.join(" "));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_csv(run: &ScenarioRun) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace_csv(run, &mut buf).expect("writing to memory cannot fail");
    buf
}

/// Pretty-printed JSON, keys in declaration order, newline-terminated.
pub fn metrics_json(report: &MetricsReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("metrics serialize");
    s.push('\n');
    s
}
