//! Command-line front end for `lungcnn`.
//!
//! ```text
//! lungcnn train --config <file> [--seed N] [--epochs N] [--batch-size N] [--data-dir PATH] [--out DIR]
//! lungcnn evaluate --checkpoint <file> --config <file> --split {train|val|test}
//! lungcnn report <runlog...> [--extern <csv>] [--csv <out>]
//! lungcnn plot --runlog <file> --metric {accuracy|auc|recall|loss} --out <svg>
//! ```
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric or
//! integrity error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod report;
pub mod runlog;

use commands::SplitName;
use config::Overrides;
use error::exit;
use plot::Metric;

#[derive(Debug, Parser)]
#[command(name = "lungcnn", version, about = "Train and evaluate a CNN on chest CT images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train from a config file; writes run log, checkpoints and the resolved config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute metrics of a checkpoint on one split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        split: SplitName,
    },
    /// Training, validation and testing tables from run logs.
    Report {
        #[arg(required = true)]
        runlogs: Vec<PathBuf>,
        /// External rows: model,split,accuracy,auc,recall,loss.
        #[arg(long = "extern")]
        external: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// SVG curve of one metric for the training and validation splits.
    Plot {
        #[arg(long)]
        runlog: PathBuf,
        #[arg(long, value_enum)]
        metric: Metric,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let result = match cli.command {
        Command::Train {
            config,
            seed,
            epochs,
            batch_size,
            data_dir,
            out,
        } => commands::train(
            &config,
            &Overrides {
                seed,
                epochs,
                batch_size,
                data_dir,
                out,
            },
        ),
        Command::Evaluate {
            checkpoint,
            config,
            split,
        } => commands::evaluate_cmd(&checkpoint, &config, split),
        Command::Report {
            runlogs,
            external,
            csv,
        } => commands::report_cmd(&runlogs, external.as_deref(), csv.as_deref()),
        Command::Plot { runlog, metric, out } => commands::plot_cmd(&runlog, metric, &out),
    };
    match result {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
