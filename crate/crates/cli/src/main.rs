//! `pulsenet simulate|verify|sweep`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pulsenet_core::analysis::DEFAULT_MIN_RECURRENCES;
use pulsenet_core::sweep::Axis;
use pulsenet_core::{Execution, Stop};

use commands::{exit_code, CliError};

#[derive(Debug, Parser)]
#[command(name = "pulsenet", version, about = "Simulate pulse-coupled networks and check their synchronization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run trials and write events.csv (and samples.csv) per trial.
    Simulate(RunArgs),
    /// Run trials and write report.csv with one verdict row per trial.
    Verify(RunArgs),
    /// Run trials on every cell of a parameter grid and write sweep.csv.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `m=10..25`, `delta=0.2,0.3`, `theta=1,2` or `spread=0,0.05`.
        #[arg(long = "axis", value_name = "NAME=VALUES", required = true)]
        axes: Vec<String>,
    },
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("horizon").required(true).args(["max_time", "max_events"])))]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "T")]
    pub max_time: Option<f64>,
    #[arg(long, value_name = "K")]
    pub max_events: Option<usize>,
    /// Record satisfactions every DT time units.
    #[arg(long, value_name = "DT")]
    pub sample: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_RECURRENCES)]
    pub min_recurrences: usize,
    /// Run trials on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

impl RunArgs {
    pub fn stop(&self) -> Stop {
        match (self.max_time, self.max_events) {
            (Some(t), _) => Stop::MaxTime(t),
            (None, Some(k)) => Stop::MaxEvents(k),
            (None, None) => unreachable!("clap requires a horizon"),
        }
    }

    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn dispatch(cli: Cli) -> Result<commands::Outcome, CliError> {
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Verify(args) => commands::verify(&args),
        Command::Sweep { run, axes } => {
            let axes = axes
                .iter()
                .map(|a| a.parse::<Axis>())
                .collect::<Result<Vec<_>, _>>()?;
            commands::sweep(&run, axes)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = dispatch(cli);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&result))
}
