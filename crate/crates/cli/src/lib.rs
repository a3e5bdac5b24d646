//! The `echosim` pipeline: ingest, simulate, report, embed.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "echosim", version, about = "Echo-chamber simulation pipeline")]
pub struct Cli {
    /// `key = value` settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run only this seed (overrides `seeds`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the initial network from JSON Lines post records.
    Ingest {
        input: PathBuf,
        /// Optional `follower,followee` side-file.
        #[arg(long)]
        follows: Option<PathBuf>,
    },
    /// Run every seed on a graph file and write event logs and metric series.
    Simulate { graph: PathBuf },
    /// Aggregate metric series across seeds.
    Report {
        #[arg(required = true)]
        series: Vec<PathBuf>,
    },
    /// Cluster real and simulated embeddings and compare their statistics.
    Embed {
        real: PathBuf,
        simulated: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input or configuration; nothing useful was produced.
    #[error("{0}")]
    Invalid(String),
    /// Some work failed; whatever finished was written.
    #[error("{0}")]
    Partial(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Partial(_) => 1,
            CliError::Invalid(_) => 2,
        }
    }
}

/// Loads the manifest (defaults, then `--config`, then `--seed`).
pub fn manifest(cli: &Cli) -> Result<RunManifest, CliError> {
    let mut manifest = match &cli.config {
        Some(path) => RunManifest::load(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?,
        None => RunManifest::default(),
    };
    if let Some(seed) = cli.seed {
        manifest.seeds = vec![seed];
    }
    Ok(manifest)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let manifest = manifest(cli)?;
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Invalid(format!("cannot create {}: {e}", cli.out.display())))?;
    match &cli.command {
        Command::Ingest { input, follows } => commands::ingest::run(input, follows.as_deref(), &manifest, &cli.out),
        Command::Simulate { graph } => commands::simulate::run(graph, &manifest, &cli.out),
        Command::Report { series } => commands::report::run(series, &cli.out),
        Command::Embed { real, simulated, k } => {
            let mut manifest = manifest;
            if let Some(k) = k {
                manifest.k = *k;
            }
            commands::embed::run(real, simulated, &manifest, &cli.out)
        }
    }
}
