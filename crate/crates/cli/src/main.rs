//! `hawkes`: fit, simulate and evaluate cascade popularity models.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hawkes_core::Error;

#[derive(Parser, Debug)]
#[command(name = "hawkes", version, about = "Marked Hawkes models for retweet cascades")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Each overrides the matching key of the
/// `--config` file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Observation window in seconds (300, 600 and 3600 are the usual presets).
    #[arg(long)]
    pub horizon_seconds: Option<f64>,
    /// Power-law exponent of the user-influence distribution.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Root seed for every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// hawkes | feature-driven | hybrid (regression) or hawkesc | feature-driven | hybrid (classification).
    #[arg(long)]
    pub method: Option<String>,
    /// Cascade file format: basic | extended. Detected from the header when omitted.
    #[arg(long)]
    pub format: Option<String>,
    /// Output path for the main result (table, cascade, model or dataset directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximum-likelihood fit of each cascade file.
    Fit {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Raw and, with a layer, corrected final-size predictions.
    Predict {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Predictive layer written by `train-layer`.
        #[arg(long)]
        layer: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulates one cascade, or a whole extended-format dataset with `--corpus`.
    Simulate {
        /// Number of cascades for a synthetic dataset written to the `--out` directory.
        #[arg(long)]
        corpus: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Feature vectors of extended-format cascades.
    Features {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Dataset index whose history records feed the past-user-success features.
        #[arg(long)]
        history: Option<PathBuf>,
        /// regression | classification.
        #[arg(long)]
        schema: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Trains the predictive layer on the training split of a dataset.
    TrainLayer {
        index: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Final-size regression experiment on a dataset.
    EvaluateRegression {
        index: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Will-double classification experiment on a dataset.
    EvaluateClassification {
        index: PathBuf,
        /// Events observed before classifying (25 or 50 in the usual protocol).
        #[arg(long)]
        observed_count: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

/// Process exit status with a message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_PARSE: u8 = 2;
pub const EXIT_FIT: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Failure::new(EXIT_CONFIG, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. } | Error::Io(_) | Error::VersionMismatch { .. } | Error::CorruptPayload(_) => {
                EXIT_PARSE
            }
            Error::Config(_) => EXIT_CONFIG,
            Error::FitFailure { .. } | Error::InsufficientEvents { .. } => EXIT_FIT,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit { inputs, common } => commands::fit(&inputs, &common),
        Command::Predict { inputs, layer, common } => commands::predict(&inputs, layer.as_deref(), &common),
        Command::Simulate { corpus, common } => commands::simulate(corpus, &common),
        Command::Features {
            inputs,
            history,
            schema,
            common,
        } => commands::features(&inputs, history.as_deref(), schema.as_deref(), &common),
        Command::TrainLayer { index, common } => commands::train_layer(&index, &common),
        Command::EvaluateRegression { index, common } => commands::evaluate_regression(&index, &common),
        Command::EvaluateClassification {
            index,
            observed_count,
            common,
        } => commands::evaluate_classification(&index, observed_count, &common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
