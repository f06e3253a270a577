use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use grafcet_core::alternation::{build_alternation_chart, AlternationParams};
use grafcet_core::dsl::{parse_chart, print_chart, ParseDiagnostic, SourceText};
use grafcet_core::harness::{load_scenario, metrics_json, run_scenario, trace_csv, Controller, ScenarioError};

use crate::output::{write_atomic, Staged};

/// Whether a command succeeded or found a domain-level problem it already
/// reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
}

fn read_source(path: &Path) -> Result<(Vec<u8>, SourceText)> {
    let raw = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let src = SourceText::from_bytes(&raw).with_context(|| format!("{} is not valid UTF-8", path.display()))?;
    Ok((raw, src))
}

fn print_diagnostics(path: &Path, diags: &[ParseDiagnostic]) {
    for d in diags {
        println!("{}:{d}", path.display());
    }
}

fn error_count(diags: &[ParseDiagnostic]) -> usize {
    diags.iter().filter(|d| d.severity == grafcet_core::dsl::Severity::Error).count()
}

pub fn validate(path: &Path) -> Result<Status> {
    let (_, src) = read_source(path)?;
    match parse_chart(&src) {
        Ok(parsed) => {
            print_diagnostics(path, &parsed.warnings);
            let c = &parsed.chart;
            println!(
                "{}: ok ({} signals, {} steps, {} transitions)",
                path.display(),
                c.signals.len(),
                c.steps.len(),
                c.transitions.len()
            );
            Ok(Status::Ok)
        }
        Err(diags) => {
            print_diagnostics(path, &diags);
            eprintln!("error: {}: {} error(s)", path.display(), error_count(&diags));
            Ok(Status::Failed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmtMode {
    Print,
    Check,
    Write,
}

pub fn fmt(path: &Path, mode: FmtMode) -> Result<Status> {
    let (raw, src) = read_source(path)?;
    let parsed = match parse_chart(&src) {
        Ok(p) => p,
        Err(diags) => {
            print_diagnostics(path, &diags);
            eprintln!("error: {}: cannot format a chart with errors", path.display());
            return Ok(Status::Failed);
        }
    };
    let canonical = print_chart(&parsed.chart).into_string();
    match mode {
        FmtMode::Print => print!("{canonical}"),
        FmtMode::Check => {
            if raw != canonical.as_bytes() {
                eprintln!("error: {}: not in canonical form", path.display());
                return Ok(Status::Failed);
            }
        }
        FmtMode::Write => {
            if raw != canonical.as_bytes() {
                write_atomic(path, canonical.as_bytes())?;
            }
        }
    }
    Ok(Status::Ok)
}

pub struct RunArgs {
    pub scenario: PathBuf,
    pub out: PathBuf,
    pub trace: bool,
    pub controller: Option<Controller>,
}

pub fn run(args: &RunArgs) -> Result<Status> {
    let mut cfg = load_scenario(&args.scenario)?;
    if let Some(c) = args.controller {
        cfg.controller = c;
    }
    let run = match run_scenario(&cfg) {
        Ok(run) => run,
        Err(ScenarioError::ChartParse { path, diagnostics }) => {
            print_diagnostics(&path, &diagnostics);
            eprintln!("error: {}: chart failed to parse", path.display());
            return Ok(Status::Failed);
        }
        Err(e) => return Err(e.into()),
    };

    std::fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let metrics = metrics_json(&run.metrics);
    let mut staged = Staged::new();
    if args.trace {
        staged.add(&args.out.join("trace.csv"), &trace_csv(&run))?;
    }
    staged.add(&args.out.join("metrics.json"), metrics.as_bytes())?;
    for path in staged.commit()? {
        eprintln!("wrote {}", path.display());
    }
    print!("{metrics}");
    Ok(Status::Ok)
}

pub fn gen_chart(params: &AlternationParams, output: Option<&Path>) -> Result<Status> {
    let chart = build_alternation_chart(params)?;
    let text = print_chart(&chart);
    match output {
        Some(path) => write_atomic(path, text.as_str().as_bytes())?,
        None => print!("{text}"),
    }
    Ok(Status::Ok)
}
