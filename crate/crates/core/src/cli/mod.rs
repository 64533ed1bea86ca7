//! `nnsubspace train|analyze|compare|adversarial|attribute --config <path>`.
//!
//! Exit codes: 0 success, 1 numerical or workflow failure, 2 configuration or
//! I/O error.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::{AdversarialConfig, AttributionConfig, DatasetConfig, IdxPaths, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{stage}: {message}")]
    Workflow { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Workflow { .. } => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nnsubspace",
    version,
    about = "Active-subspace uncertainty propagation for feed-forward networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network and write its weight file.
    Train(CommonArgs),
    /// Estimate the active subspace, fit the surface and propagate noise.
    Analyze(CommonArgs),
    /// Run the surface workflow and direct Monte Carlo side by side.
    Compare(CommonArgs),
    /// Perturb the center along the leading active direction.
    Adversarial(CommonArgs),
    /// Per-feature activity scores.
    Attribute(CommonArgs),
}

type Action = fn(&RunConfig, &std::path::Path) -> Result<(), CliError>;

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (common, action): (&CommonArgs, Action) = match &cli.command {
        Command::Train(a) => (a, commands::train),
        Command::Analyze(a) => (a, commands::analyze),
        Command::Compare(a) => (a, commands::compare),
        Command::Adversarial(a) => (a, commands::adversarial),
        Command::Attribute(a) => (a, commands::attribute),
    };
    init_logging(common.verbose);
    let result = RunConfig::load(&common.config).and_then(|cfg| {
        let out = common
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        action(&cfg, &out)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}
