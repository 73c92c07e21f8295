//! `patchmosaic`: extract patches, cluster them, recompose targets and render frame sequences.
//!
//! Settings come from flags first, then the `--config` file, then defaults.
//! Exit codes: 0 success, 2 usage or validation, 3 bad data, 4 I/O.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ConfigFile;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "patchmosaic",
    version,
    about = "Recompose images from clustered patches of other images"
)]
struct Cli {
    /// Worker threads for the parallel loops; output does not depend on it
    #[arg(long, global = true, env = "PATCHMOSAIC_WORKERS")]
    workers: Option<usize>,
    /// key=value settings file; flags take precedence over it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cut every manifest image into n x n patches and write a patch library
    Extract(commands::ExtractArgs),
    /// Run k-means on the mean-centered patches of a library
    Cluster(commands::ClusterArgs),
    /// Rebuild a target image from random members of its matched clusters
    Reconstruct(commands::ReconstructArgs),
    /// Render a numbered frame sequence of one target
    Animate(commands::AnimateArgs),
    /// Montage of PCA components, DCT basis functions or centroids
    Analyze(commands::AnalyzeArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let threads = match cli.workers {
        Some(0) => return Err(CliError::usage("--workers must be at least 1")),
        Some(w) => w,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start workers: {e}")))?;
    pool.install(|| match cli.command {
        Command::Extract(a) => commands::extract(a, file),
        Command::Cluster(a) => commands::cluster(a, file),
        Command::Reconstruct(a) => commands::reconstruct_cmd(a, file),
        Command::Animate(a) => commands::animate(a, file),
        Command::Analyze(a) => commands::analyze(a, file),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
