//! `scatterkit` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or format
//! error (missing files, bad IDX headers, shape mismatches), 3 numerical
//! failure.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scatterkit::ScatterError;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<ScatterError> for Failure {
    fn from(e: ScatterError) -> Self {
        let code = match e {
            ScatterError::InvalidConfig(_) => 1,
            ScatterError::InvalidInput(_)
            | ScatterError::Format { .. }
            | ScatterError::Consistency(_)
            | ScatterError::Io { .. } => 2,
            ScatterError::Numerical(_) => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "scatterkit",
    version,
    about = "Wavelet scattering features and stability experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat `key = value` file; flags override its entries
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Filter-bank geometry.
#[derive(Args, Debug, Clone)]
pub struct BankFlags {
    /// Number of scales J [default: 3]
    #[arg(long = "j", value_name = "J")]
    pub j: Option<usize>,
    /// Orientations (2D) or voices per octave (1D) [default: 8 in 2D, 1 in 1D]
    #[arg(long = "k", value_name = "K")]
    pub k: Option<usize>,
    /// Morlet center frequency
    #[arg(long)]
    pub xi: Option<f64>,
    /// Morlet envelope width
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Envelope elongation across the wave vector (2D)
    #[arg(long)]
    pub slant: Option<f64>,
    /// l1 or l2 scale normalization [default: l1]
    #[arg(long)]
    pub normalization: Option<String>,
}

/// Scattering-tree options.
#[derive(Args, Debug, Clone)]
pub struct TreeFlags {
    /// Maximum path order [default: 2]
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Keep 2^oversampling more output samples per axis [default: 0]
    #[arg(long)]
    pub oversampling: Option<usize>,
    /// modulus, rectifier or sigmoid [default: modulus]
    #[arg(long)]
    pub rho: Option<String>,
    /// Compute every path, not only frequency-decreasing ones
    #[arg(long)]
    pub all_paths: bool,
    /// Subsample intermediate layers dyadically
    #[arg(long)]
    pub intermediate_subsampling: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a Morlet filter bank and write it with a JSON sidecar
    BuildBank(commands::BuildBankArgs),
    /// Windowed Fourier or continuous wavelet transform of a 1D signal
    Timefreq(commands::TimefreqArgs),
    /// Scattering coefficients of one image
    Scatter(commands::ScatterArgs),
    /// Scattering features for an IDX dataset
    Extract(commands::ExtractArgs),
    /// Fit a ridge one-vs-rest classifier on a feature file
    Train(commands::TrainArgs),
    /// Error rate of a trained model on a feature file
    Evaluate(commands::EvaluateArgs),
    /// Lipschitz ratios of feature maps under deformations
    Stability(commands::StabilityArgs),
    /// Relative feature change under growing translations
    Invariance(commands::InvarianceArgs),
    /// Time-frequency spread products against the Gaussian bound
    Uncertainty(commands::UncertaintyArgs),
    /// Seeded digit-classification experiment: scattering vs raw pixels
    Experiment(commands::ExperimentArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::BuildBank(a) => commands::build_bank_cmd(a),
        Command::Timefreq(a) => commands::timefreq(a),
        Command::Scatter(a) => commands::scatter_cmd(a),
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Stability(a) => commands::stability(a),
        Command::Invariance(a) => commands::invariance(a),
        Command::Uncertainty(a) => commands::uncertainty(a),
        Command::Experiment(a) => commands::experiment(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
