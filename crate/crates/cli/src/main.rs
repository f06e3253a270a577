use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser, Subcommand};
use grafcet_cli::commands::{self, FmtMode, RunArgs, Status};
use grafcet_cli::serve::{serve, DEFAULT_PORT};
use grafcet_cli::session_from;
use grafcet_core::alternation::AlternationParams;
use grafcet_core::harness::Controller;
use grafcet_core::session::SessionCommand;

#[derive(Parser)]
#[command(name = "grafcet", version, about = "GRAFCET pump-alternation engine, simulator and control service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a chart file and print its diagnostics.
    Validate { chart: PathBuf },
    /// Print a chart in canonical form.
    Fmt {
        chart: PathBuf,
        /// Exit with status 1 if the file is not canonical.
        #[arg(long, conflicts_with = "write")]
        check: bool,
        /// Rewrite the file in place.
        #[arg(long)]
        write: bool,
    },
    /// Run a scenario and write its trace and metrics.
    Run {
        scenario: PathBuf,
        /// Output directory for trace.csv and metrics.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Write the trace CSV (default).
        #[arg(long, overrides_with = "no_trace")]
        trace: bool,
        /// Skip the trace CSV.
        #[arg(long)]
        no_trace: bool,
        /// Override the scenario's controller (grafcet or baseline-hysteresis).
        #[arg(long)]
        controller: Option<Controller>,
    },
    /// Print the duty/standby alternation chart.
    GenChart {
        /// Alternation period in seconds.
        #[arg(long, default_value_t = 60.0)]
        t_alt: f64,
        /// Dwell in the idle step before a pump starts, in seconds.
        #[arg(long, default_value_t = 2.0)]
        start_delay: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a live session and serve it over WebSocket at /ws.
    Serve {
        /// Scenario providing chart, plant parameters, initial demand and seed.
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        /// Scan period in simulated seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Simulated seconds per wall second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Wait for a start command instead of running immediately.
        #[arg(long)]
        paused: bool,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_target(false).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<Status> {
    match command {
        Command::Validate { chart } => commands::validate(&chart),
        Command::Fmt { chart, check, write } => {
            let mode = match (check, write) {
                (true, _) => FmtMode::Check,
                (_, true) => FmtMode::Write,
                _ => FmtMode::Print,
            };
            commands::fmt(&chart, mode)
        }
        Command::Run { scenario, out, trace: _, no_trace, controller } => {
            commands::run(&RunArgs { scenario, out, trace: !no_trace, controller })
        }
        Command::GenChart { t_alt, start_delay, output } => {
            commands::gen_chart(&AlternationParams { t_alt, start_delay }, output.as_deref())
        }
        Command::Serve { scenario, port, host, dt, speed, paused } => {
            let mut session = session_from(scenario.as_deref(), dt)?;
            if let Err(r) = session.apply_command(SessionCommand::SetSpeed { multiplier: speed }) {
                Cli::command().error(clap::error::ErrorKind::ValueValidation, format!("--speed: {r}")).exit();
            }
            if !paused {
                session.apply_command(SessionCommand::Start).expect("start is always accepted");
            }
            let addr = SocketAddr::new(host, port);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener =
                    tokio::net::TcpListener::bind(addr).await.with_context(|| format!("cannot bind {addr}"))?;
                tracing::info!("serving on ws://{}/ws", listener.local_addr()?);
                serve(listener, session).await?;
                Ok(Status::Ok)
            })
        }
    }
}
