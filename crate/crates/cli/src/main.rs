//! Command-line front end: argument parsing, config resolution, exit codes.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or IO error, 3 numerical
//! failure during training.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wigcn::{Error, PropagationVariant};

use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "wigcn",
    version,
    about = "Graph-convolutional collaborative filtering on implicit feedback"
)]
struct Cli {
    /// JSON run configuration (required by every subcommand).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Override the propagation variant: wigcn, ngcf_like or lightgcn_like.
    #[arg(long, global = true, value_name = "NAME")]
    variant: Option<PropagationVariant>,

    /// Override the ranking cutoff.
    #[arg(long, global = true, value_name = "N")]
    k: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print statistics of the filtered and split dataset as JSON.
    Stats,
    /// Train a model; writes history.jsonl and model.ckpt to the output dir.
    Train,
    /// Compute ranking metrics for a trained checkpoint.
    Evaluate {
        /// Trained model file produced by `train`.
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Print the top-ranked unseen items for one user.
    Recommend {
        /// Trained model file produced by `train`.
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// External user id as it appears in the dataset file.
        #[arg(long, value_name = "ID")]
        user: u64,
    },
    /// Write the final embedding table with external ids to a binary file.
    ExportEmbeddings {
        /// Trained model file produced by `train`.
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Destination path for the embedding file.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::NonFinite { .. } | Error::Diverged { .. } => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let config_path = cli.config.as_deref().ok_or_else(|| {
        Error::InvalidArgument("--config <PATH> is required; see --help".into())
    })?;
    let mut config = RunConfig::load(config_path)?;
    config.apply_overrides(cli.seed, cli.variant, cli.k);

    match &cli.command {
        Command::Stats => commands::cmd_stats(&config),
        Command::Train => commands::cmd_train(&config),
        Command::Evaluate { checkpoint } => commands::cmd_evaluate(&config, checkpoint),
        Command::Recommend { checkpoint, user } => {
            commands::cmd_recommend(&config, checkpoint, *user)
        }
        Command::ExportEmbeddings { checkpoint, out } => {
            commands::cmd_export_embeddings(&config, checkpoint, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests land here too; only real parse
            // failures are usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    // A missing --config is a usage error, not a data error.
    let missing_config = cli.config.is_none();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if missing_config {
                ExitCode::from(1)
            } else {
                ExitCode::from(exit_code_for(&e))
            }
        }
    }
}
