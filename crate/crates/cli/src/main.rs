//! `polyphase` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polyphase::Execution;

use config::{BaselineConfig, CanRunConfig, DesignConfig, EvalConfig, EvalMode, SimulateConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(version, about = "Orthogonal polyphase code and mismatched filter design")]
struct Cli {
    /// Worker threads; 0 uses all cores, 1 runs sequentially.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Jointly optimize codes and mismatched filters.
    Design(Common),
    /// Correlation cuts or ambiguity surfaces of a code/filter set.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Set file written by `design` or `baseline`.
        #[arg(long)]
        set: PathBuf,
        /// Overrides the configured mode.
        #[arg(long, value_enum)]
        mode: Option<EvalMode>,
    },
    /// Two-trip weather echo simulation and phase-jitter study.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        set: PathBuf,
    },
    /// CAN or WeCAN matched-filter code sets.
    BaselineCan(Common),
    /// Hadamard, Chu or chirp reference sets.
    Baseline(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    Execution::configure_threads(cli.threads).map_err(|e| CliError::Runtime(e.to_string()))?;
    let execution = Execution::for_threads(cli.threads);
    match cli.command {
        Command::Design(c) => {
            let mut cfg: DesignConfig = config::load(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            commands::design(&cfg, &c.out_dir, execution)
        }
        Command::Eval { common: c, set, mode } => {
            let mut cfg: EvalConfig = config::load(c.config.as_deref())?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            commands::eval(&set, &cfg, &c.out_dir, execution)
        }
        Command::Simulate { common: c, set } => {
            let mut cfg: SimulateConfig = config::load(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            commands::simulate(&set, &cfg, &c.out_dir, execution)
        }
        Command::BaselineCan(c) => {
            let mut cfg: CanRunConfig = config::load(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            commands::baseline_can(&cfg, &c.out_dir)
        }
        Command::Baseline(c) => {
            let cfg: BaselineConfig = config::load(c.config.as_deref())?;
            commands::baseline(&cfg, &c.out_dir)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polyphase: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
