//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage errors (bad flags, bad config file),
//! 1 for runtime errors. With `--error-json` failures are also reported as a
//! single JSON object on stderr.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::dataio::SynthKind;
use crate::partitioning::PartitionMethod;

pub use config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "stpn", version, about = "Spatiotemporal pattern networks over symbolic time series")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// RNG seed for generators and Monte Carlo prediction.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel phases (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// TOML file with default parameters; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files (created if missing).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Report failures as a JSON object on stderr.
    #[arg(long, global = true)]
    pub error_json: bool,
}

/// Model parameters shared by the fitting subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub alphabet: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// uniform, max_entropy or mbd.
    #[arg(long)]
    pub method: Option<PartitionMethod>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (CSV plus metadata sidecar).
    Synth(SynthArgs),
    /// Fit partition schemes and write the symbol streams.
    Partition(PartitionArgs),
    /// Pairwise MI table over lags and the pattern network.
    Mi(MiArgs),
    /// Fit a cross model and predict one stream from another.
    Predict(PredictArgs),
    /// Project component predictions onto the aggregate.
    Disagg(DisaggArgs),
    /// Compare a predicted column against an actual column.
    Eval(EvalArgs),
    /// Synthetic-data reproductions of the qualitative findings.
    Experiments {
        #[command(subcommand)]
        action: ExperimentsAction,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// coupled_chains, spatial_lattice or household.
    #[arg(long)]
    pub kind: SynthKind,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub alphabet: Option<usize>,
    #[arg(long)]
    pub stay_prob: Option<f64>,
    #[arg(long)]
    pub delay: Option<usize>,
    #[arg(long)]
    pub coupling: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub sample_period: Option<f64>,
    #[arg(long)]
    pub upsample_fold: Option<usize>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "synth.csv")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Columns to partition (default: all, or all but the target for mbd).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    /// Output column the mbd method maximizes MI against.
    #[arg(long)]
    pub target: Option<String>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct MiArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    /// Lags of the MI table.
    #[arg(long, value_delimiter = ',')]
    pub lags: Option<Vec<usize>>,
    /// Lag of the network edges.
    #[arg(long)]
    pub lag: Option<usize>,
    #[arg(long)]
    pub prune_threshold: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub source: String,
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub lag: Option<usize>,
    /// Monte Carlo draws per step; exact row lookup when absent.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Load schemes and model from this directory instead of fitting; the
    /// whole input is then predicted.
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct DisaggArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Measured aggregate column.
    #[arg(long)]
    pub aggregate: String,
    /// Columns holding component predictions.
    #[arg(long, value_delimiter = ',', conflicts_with = "predict")]
    pub predictions: Option<Vec<String>>,
    /// Ground-truth columns, one per prediction (or per component).
    #[arg(long, value_delimiter = ',')]
    pub truth: Option<Vec<String>>,
    /// Predict the components from the aggregate before projecting; `--truth`
    /// names the components to train on.
    #[arg(long)]
    pub predict: bool,
    #[arg(long)]
    pub lag: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predicted: PathBuf,
    #[arg(long, default_value = "predicted_value")]
    pub predicted_column: String,
    #[arg(long)]
    pub actual: PathBuf,
    #[arg(long, default_value = "actual")]
    pub actual_column: String,
    /// Alphabet of the scheme used for the confusion matrix.
    #[arg(long)]
    pub alphabet: Option<usize>,
    /// Partition method of that scheme (default uniform).
    #[arg(long)]
    pub method: Option<PartitionMethod>,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentsAction {
    /// Run every experiment, or only the named one.
    Run {
        #[arg(long)]
        only: Option<String>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Runtime(_) => "runtime",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Runtime(e) => e.to_string(),
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn report(err: &CliError, json: bool) {
    if json {
        let obj = serde_json::json!({
            "error": err.message(),
            "kind": err.kind(),
            "exit_code": err.exit_code(),
        });
        eprintln!("{obj}");
    } else {
        eprintln!("error: {}", err.message());
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let error_json = args.iter().any(|a| a == "--error-json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            if error_json {
                report(&CliError::Usage(e.to_string().trim().to_owned()), true);
            } else {
                let _ = e.print();
            }
            return 2;
        }
    };
    match commands::execute(&cli) {
        Ok(()) => 0,
        Err(err) => {
            report(&err, cli.global.error_json);
            err.exit_code()
        }
    }
}

pub fn main_entry() -> i32 {
    run(std::env::args_os())
}
