//! Command line front end for the switched-system simulator: strict JSON
//! configs, deterministic seeding, machine-readable outputs, and a worker
//! pool whose size never changes a single output byte.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub mod batch;
pub mod commands;
pub mod config;
pub mod defaults;
pub mod output;

/// Exit codes: 0 success, 1 contract/agreement failure, 2 usage/validation.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Contract(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Contract(_) => 1,
        }
    }

    pub fn usage(msg: impl std::fmt::Display) -> Self {
        AppError::Usage(msg.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pdmp",
    version,
    about = "Simulator and growth-rate analyzer for planar two-mode switched systems"
)]
pub struct Cli {
    /// JSON run configuration (required by every subcommand).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Root seed; overrides the seed in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Which data files to emit next to the summary.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Both)]
    pub format: OutputFormat,

    /// Worker threads for trajectory-parallel experiments. Outputs are
    /// bit-identical for any worker count.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// Suppress the stdout summary line.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: CommandName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandName {
    /// Spectral condition, proportionality and equilibria diagnostics.
    Check,
    /// Growth rate by Monte Carlo and quadrature, with agreement verdict.
    Lyapunov,
    /// Stationary angular densities by quadrature.
    Density,
    /// One switched trajectory with grid samples and jump records.
    Simulate,
    /// Exit times from a ball around the common equilibrium.
    ExitTimes,
    /// Running density extrema along switched runs.
    Oscillation,
    /// The x + y + 1/x + 1/y diagnostic (conjecture evidence).
    Transience,
    /// Growth-rate or exit-statistics sweeps over a parameter list.
    Sweep,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Check => "check",
            CommandName::Lyapunov => "lyapunov",
            CommandName::Density => "density",
            CommandName::Simulate => "simulate",
            CommandName::ExitTimes => "exit-times",
            CommandName::Oscillation => "oscillation",
            CommandName::Transience => "transience",
            CommandName::Sweep => "sweep",
        }
    }
}

/// Loads the config, dispatches the subcommand, writes outputs under
/// `cli.out`. Every subcommand is a pure function of (config, seed) to
/// output bytes.
pub fn run(cli: &Cli) -> Result<(), AppError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| AppError::usage("--config <PATH> is required"))?;
    let mut run_config = config::load(path)?;
    run_config.resolve(cli.seed, cli.command)?;
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| AppError::usage(format!("cannot create output directory: {e}")))?;
    let ctx = commands::Context {
        config: run_config,
        command: cli.command,
        out_dir: cli.out.clone(),
        format: cli.format,
        workers: cli.workers.max(1),
        quiet: cli.quiet,
    };
    commands::dispatch(&ctx)
}
