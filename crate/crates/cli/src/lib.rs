//! Config-driven pipeline around the `geoaffinity` library: validation,
//! full analysis with JSON/GeoJSON/SVG outputs, and synthetic datasets.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod render;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, EXIT_DATA, EXIT_IO, EXIT_NUMERICAL, EXIT_OK};
use pipeline::{Context, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "geoaffinity", version, about = "Chronic-condition affinity, spatial clustering and robust regression for census tracts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Join the inputs and print the join/drop summary.
    Validate(CommonArgs),
    /// Run the full pipeline and write report.json, results.geojson and maps.
    Analyze(CommonArgs),
    /// Write a synthetic dataset (prevalence.csv, indicators.csv, tracts.geojson).
    Synth(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed; overrides `[inference] seed`.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Suppress progress messages on stderr.
    #[arg(long)]
    pub quiet: bool,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (Command::Validate(args) | Command::Analyze(args) | Command::Synth(args)) = &cli.command;
    let result = with_threads(args.threads, || dispatch(&cli.command, args));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn with_threads(threads: Option<usize>, f: impl FnOnce() -> Result<(), CliError> + Send) -> Result<(), CliError> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::data("--threads must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::io(format!("cannot start thread pool: {e}")))?
            .install(f),
    }
}

fn dispatch(command: &Command, args: &CommonArgs) -> Result<(), CliError> {
    let loaded = config::load(&args.config)?;
    let opts = RunOptions { out: args.out.clone(), seed: args.seed, quiet: args.quiet };
    let ctx = Context::new(loaded, &opts)?;
    match command {
        Command::Validate(_) => pipeline::cmd_validate(&ctx).map(|_| ()),
        Command::Analyze(_) => pipeline::cmd_analyze(&ctx).map(|_| ()),
        Command::Synth(_) => pipeline::cmd_synth(&ctx).map(|_| ()),
    }
}
