//! `memmarket`: config-driven experiments on binary markets with memory.
//!
//! Exit codes: 0 success, 1 a convergence band failed, 2 configuration
//! error, 3 precondition not met, 4 numerical regime error (for example a
//! non-positive price factor), 5 I/O error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use memmarket::processes::EngineChoice;

use crate::commands::Outcome;
use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "memmarket", version, about = "Binary market models with Volterra memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate l, z and y over a grid.
    KernelTable(Common),
    /// Write simulated W, Y and S paths.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Path engine: auto, fast or direct.
        #[arg(long, value_parser = parse_engine)]
        engine: Option<EngineChoice>,
    },
    /// Certify absence of arbitrage and estimate the arbitrage probability.
    Arbitrage {
        #[command(flatten)]
        common: Common,
        /// Require T·C < 1 so the sufficient condition applies.
        #[arg(long)]
        require_sufficient_condition: bool,
    },
    /// Run the configured convergence diagnostics.
    Convergence(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

type Handler = fn(&RunConfig) -> Result<Outcome, CliError>;

fn parse_engine(s: &str) -> Result<EngineChoice, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown engine {s:?}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common, overrides, run): (&str, &Common, Overrides, Handler) = match &cli.command {
        Command::KernelTable(c) => ("kernel-table", c, Overrides::default(), commands::kernel_table),
        Command::Simulate { common, engine } => {
            ("simulate", common, Overrides { engine: *engine, ..Default::default() }, commands::simulate)
        }
        Command::Arbitrage { common, require_sufficient_condition } => (
            "arbitrage",
            common,
            Overrides { require_sufficient_condition: *require_sufficient_condition, ..Default::default() },
            commands::arbitrage,
        ),
        Command::Convergence(c) => ("convergence", c, Overrides::default(), commands::convergence),
    };
    let overrides = Overrides { seed: common.seed, trials: common.trials, out: common.out.clone(), ..overrides };

    let started = Instant::now();
    let result = RunConfig::load(&common.config, &overrides).and_then(|config| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(common.workers)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", common.workers)))?;
        let outcome = pool.install(|| run(&config))?;
        write_log(&config, name, started);
        Ok(outcome)
    });
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::BandFailure) => {
            eprintln!("{name}: at least one convergence band failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Timing sidecar; kept apart from the reproducible outputs.
fn write_log(config: &RunConfig, name: &str, started: Instant) {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let line = format!("{name} finished_unix={stamp} elapsed_ms={}\n", started.elapsed().as_millis());
    let _ = std::fs::write(config.output.dir.join("run.log"), line);
}
