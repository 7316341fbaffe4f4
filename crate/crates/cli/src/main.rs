use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use collurank::Error;

mod config;
mod stages;

use config::{Overrides, PipelineConfig};

/// Detects coordinated review campaigns in review logs.
#[derive(Parser, Debug)]
#[command(name = "collurank", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a labeled synthetic dataset with planted campaigns.
    Synth {
        /// Campaign spec file, key = value text.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for dataset.csv and labels.csv.
        #[arg(long)]
        out: PathBuf,
        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
        /// Override the seed in the spec file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the signed user network and the agreement histogram.
    Network {
        #[command(flatten)]
        overrides: Overrides,
        /// Also dump per-pair proximities to pair_features.csv.
        #[arg(long)]
        dump_features: bool,
    },
    /// Sample walks and train both embedding matrices.
    Train {
        #[command(flatten)]
        overrides: Overrides,
        /// Also dump the walk corpus to walks.txt.
        #[arg(long)]
        dump_walks: bool,
    },
    /// Rank users by spamicity score.
    Score {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate the ranking against labels.
    Eval {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Summarize workdir artifacts and any evaluation results.
    Report {
        #[command(flatten)]
        overrides: Overrides,
    },
}

// exit codes: 0 success, 2 usage (from clap), 3 bad input or configuration,
// 4 training divergence, 1 anything else
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. }
        | Error::Validation { .. }
        | Error::EmptyDataset { .. }
        | Error::Config(_)
        | Error::DegenerateNetwork(_)
        | Error::EmptySamplingTable
        | Error::NoOverlap(_, _)
        | Error::UndefinedConfidence(_)
        | Error::SelfPair(_)
        | Error::UndefinedScore
        | Error::UndefinedMetric(_) => 3,
        Error::Divergence { .. } => 4,
        Error::Io(_) | Error::NotFound(_) => 1,
    }
}

fn run(cli: Cli) -> collurank::Result<()> {
    match &cli.command {
        Cmd::Synth {
            spec,
            out,
            force,
            seed,
        } => stages::cmd_synth(spec, out, *force, *seed),
        Cmd::Network {
            overrides,
            dump_features,
        } => stages::cmd_network(&PipelineConfig::resolve(overrides)?, *dump_features),
        Cmd::Train {
            overrides,
            dump_walks,
        } => stages::cmd_train(&PipelineConfig::resolve(overrides)?, *dump_walks),
        Cmd::Score { overrides } => stages::cmd_score(&PipelineConfig::resolve(overrides)?),
        Cmd::Eval { overrides } => stages::cmd_eval(&PipelineConfig::resolve(overrides)?),
        Cmd::Report { overrides } => stages::cmd_report(&PipelineConfig::resolve(overrides)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
