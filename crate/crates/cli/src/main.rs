use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use ps2f_cli::commands::{self, LogFormat, RunOptions, Variant};
use ps2f_cli::configs;
use ps2f_cli::service::{self, ServiceOptions};
use ps2f_core::cases::CASE3_KS;
use ps2f_core::schedule::ModeSchedule;

#[derive(Parser)]
#[command(name = "ps2f", version, about = "Predictive safety-stability filter runs and live telemetry service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; the reference configuration is embedded.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Closed-loop steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Lattice resolution for boundary files (0 disables them).
    #[arg(long)]
    grid: Option<usize>,
    /// Abort and exit nonzero when a runtime check fails.
    #[arg(long = "assert", value_enum, default_value = "on")]
    assertions: Switch,
    #[arg(long, value_enum, default_value = "csv")]
    format: LogFormat,
    /// Record solve times in the log (makes logs differ between runs).
    #[arg(long)]
    timings: bool,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            config: self.config.clone(),
            out: self.out.clone(),
            steps: self.steps,
            grid: self.grid,
            assertions: self.assertions == Switch::On,
            format: self.format,
            timings: self.timings,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Double integrator tracking a reference signal through the filter.
    Case1(Common),
    /// Input-set sweeps over a, M, the state weight and N.
    Case2(Common),
    /// Unicycle go-and-return task.
    Case3 {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "ps2f")]
        variant: Variant,
        /// Step at which the goal controller hands over to the return controller.
        #[arg(long)]
        ks: Option<usize>,
    },
    /// Riccati solution, LQR gain and terminal level of a linear configuration.
    Dare {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for dare.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Live session over a WebSocket with the client as the external controller.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// JSON configuration; defaults to the unicycle.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Step at which a drops from the exploration value to the configured one.
        #[arg(long, default_value_t = CASE3_KS)]
        ks: usize,
        /// Performance weight before `ks`.
        #[arg(long, default_value_t = 100.0)]
        a_explore: f64,
        /// Tick period in milliseconds; defaults to the model sample time.
        #[arg(long)]
        tick_ms: Option<u64>,
        /// Stop after this many steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Lattice resolution of the per-frame boundary (0 disables it).
        #[arg(long, default_value_t = 11)]
        grid: usize,
        /// Outbound frame queue length.
        #[arg(long, default_value_t = 64)]
        queue: usize,
        /// Initial state, comma separated; defaults to the origin.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Directory for the session log written on exit.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: LogFormat,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn exit_for(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Case1(common) => {
            let summary = commands::case1(&common.options())?;
            print_json(&summary)?;
            Ok(exit_for(summary.passed))
        }
        Command::Case2(common) => {
            let summary = commands::case2(&common.options())?;
            print_json(&summary)?;
            Ok(exit_for(summary.passed))
        }
        Command::Case3 { common, variant, ks } => {
            let summary = commands::case3(&common.options(), variant, ks)?;
            print_json(&summary)?;
            Ok(exit_for(summary.passed))
        }
        Command::Dare { config, out } => {
            let report = commands::dare(config.as_deref(), out.as_deref())?;
            print!("{}", report.render());
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { port, host, config, ks, a_explore, tick_ms, steps, grid, queue, x0, out, format } => {
            let cfg = configs::load(config.as_deref(), configs::CASE3_JSON)?;
            let schedule = ModeSchedule::two_phase(a_explore, cfg.a, ks, cfg.m);
            let x0 = x0.map(DVector::from_vec).unwrap_or_else(|| DVector::zeros(cfg.state_dim()));
            let tick = match tick_ms {
                Some(ms) => Duration::from_millis(ms),
                None => Duration::from_secs_f64(configs::sample_time(&cfg).unwrap_or(0.2)),
            };
            let listener = TcpListener::bind((host.as_str(), port)).with_context(|| format!("binding {host}:{port}"))?;
            let opts = ServiceOptions { tick, queue_capacity: queue, boundary_resolution: grid, max_ticks: steps, assertions: false };
            let handle = service::start(listener, cfg, schedule, x0, opts)?;
            eprintln!("serving on ws://{}", handle.local_addr());
            let log = handle.join();
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                match format {
                    LogFormat::Csv => std::fs::write(dir.join("log.csv"), log.to_csv()?)?,
                    LogFormat::Jsonl => std::fs::write(dir.join("log.jsonl"), log.to_jsonl())?,
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
