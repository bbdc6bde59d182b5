//! `pentagram`: batch front end for the spin-1 pentagram tests.
//!
//! Exit codes: 0 success or feasible, 1 internal failure or a failed
//! reproduction criterion, 2 malformed input, 3 infeasible, 4 indeterminate.

mod commands;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] pentagram_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(pentagram_core::Error::Solver(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Io(_) | CliError::Internal(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Float,
}

#[derive(Debug, Parser)]
#[command(name = "pentagram", version, about = "Spin-1 pentagram contextuality tests")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Output file (written atomically); stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Directory for `<command>.<format>` when --output is absent.
    #[arg(long, global = true, env = "PENTAGRAM_OUTPUT_DIR", hide_env_values = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Exact (rational) or float decision for `certify`.
    #[arg(long, global = true, value_enum, default_value = "exact")]
    pub mode: ModeArg,
    /// Float-mode indeterminacy band; rounding radius in exact mode.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Seed for stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Rescale non-unit vectors and states instead of rejecting them.
    #[arg(long, global = true)]
    pub normalize: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// K and the equivalent forms for a state on a pentagram.
    Eval {
        /// JSON with "state" and optional "pentagram" (default regular about z).
        #[arg(long)]
        input: String,
    },
    /// Hidden-variable decision for a marginal model, a state on a
    /// pentagram, or a joint distribution.
    Certify {
        #[arg(long)]
        input: String,
        /// Structure for witness inputs that do not carry their contexts.
        #[arg(long)]
        structure: Option<String>,
    },
    /// Extremal rays of the cone of nonnegative functions on a structure.
    Cone {
        /// pentagram5, chsh, pair or cycleN.
        #[arg(long, conflicts_with = "input")]
        structure: Option<String>,
        /// Custom structure {"n", "contexts"}.
        #[arg(long)]
        input: Option<String>,
    },
    /// Validates a ray function, optionally evaluating it on a model.
    Ray {
        /// A ray, or {"ray": ..., "model": ...}.
        #[arg(long)]
        input: String,
    },
    /// Optimizes a pentagram for a state, or scans concurrence values.
    Search {
        /// JSON with "state" and optional "config".
        #[arg(long, conflicts_with_all = ["concurrence", "grid"])]
        input: Option<String>,
        /// Canonical state with this concurrence.
        #[arg(long, conflicts_with = "grid")]
        concurrence: Option<f64>,
        /// Comma-separated concurrence values to scan.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Biphoton coincidence planning and simulation.
    Biphoton {
        #[command(subcommand)]
        action: Biphoton,
    },
    /// Runs the reproduction criteria and prints a pass/fail table.
    Repro {
        /// Run only these criteria (1 to 11).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=11))]
        criterion: Vec<u8>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Biphoton {
    /// Trials needed to put the estimate on the right side of a threshold.
    Plan {
        #[arg(long, default_value_t = 0.44721)]
        rate: f64,
        #[arg(long, default_value_t = 0.4)]
        threshold: f64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
    },
    /// Simulated coincidence counts with an exact interval.
    Simulate {
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
    },
    /// Predicted and simulated rates over analyzer tilt angles.
    Sweep {
        /// Stokes direction of the biphoton state.
        #[arg(long, default_value = "0,0,1")]
        axis: String,
        /// Comma-separated tilt angles in radians.
        #[arg(long)]
        angles: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long, default_value_t = 1.0)]
        visibility: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
