//! `acbr`: train, apply, explain and serve case-based insolvency models.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod commands;
mod render;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] acbr::Error),
    #[error("cannot write `{path}`: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_data_error() => 2,
            CliError::Core(
                acbr::Error::InvalidParameter(_)
                | acbr::Error::KTooLarge { .. }
                | acbr::Error::TooManyFeatures { .. }
                | acbr::Error::InvalidSchema(_),
            ) => 1,
            CliError::Output { .. } => 2,
            CliError::Core(_) | CliError::Internal(_) => 3,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "acbr", version, about = "Asymmetric case-based reasoning for insolvency prediction", args_override_self = true)]
pub struct Cli {
    /// Master seed; each component derives its own stream from it.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads for similarity, PSO and Shapley computations.
    #[arg(long, global = true, env = "ACBR_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn weights, exponents, K and probability weights from a labeled CSV.
    Train(TrainArgs),
    /// Label and score every row of a CSV.
    Predict(PredictArgs),
    /// Neighbor table, relevance, Shapley values and what-if trajectory for one case.
    Explain(ExplainArgs),
    /// Train each variant on an 80/20 split and tabulate test metrics.
    Benchmark(BenchmarkArgs),
    /// Serve the HTTP API for a trained model.
    Serve(ServeArgs),
    /// Write a synthetic labeled data set.
    Synth(SynthArgs),
    /// Sample a feature's local similarity function as CSV.
    Curve(CurveArgs),
}

#[derive(Debug, Args)]
pub struct TrainingFlags {
    /// Feature scoring methods to try (gini, entropy, mi, chi2, anova, relieff).
    #[arg(long, value_delimiter = ',', default_value = "gini,entropy,mi,chi2,anova,relieff")]
    pub methods: Vec<String>,
    /// Training objective (accuracy, auc, fmeasure, gmeans, mcc).
    #[arg(long, default_value = "accuracy")]
    pub metric: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 30)]
    pub swarm: usize,
    /// PSO iterations; 0 keeps unit exponents.
    #[arg(long, default_value_t = 100)]
    pub pso_iters: usize,
    /// Candidate neighbor counts (default: odd values 1..=25).
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    /// Keep the class imbalance instead of undersampling the majority class.
    #[arg(long)]
    pub no_undersample: bool,
    /// Use the plain vote share as probability.
    #[arg(long)]
    pub no_probability: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, short, default_value = "model.json")]
    pub out: PathBuf,
    /// Similarity variant to train.
    #[arg(long, default_value = "acbr")]
    pub variant: String,
    /// Also write the training summary as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub training: TrainingFlags,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Skip reference cases whose id equals the query id.
    #[arg(long)]
    pub exclude_self: bool,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV holding the case; the model's reference cases when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Case id.
    #[arg(long)]
    pub case: String,
    /// Shapley mode: exact or mc.
    #[arg(long)]
    pub shapley: Option<String>,
    /// Monte Carlo permutations.
    #[arg(long, default_value_t = acbr::explain::DEFAULT_PERMUTATIONS)]
    pub samples: usize,
    /// Case id whose values are substituted one feature at a time.
    #[arg(long)]
    pub whatif_target: Option<String>,
    /// Substitution order: shapley, relevance or a comma-separated feature list.
    #[arg(long, default_value = "shapley")]
    pub order: String,
    #[arg(long)]
    pub exclude_self: bool,
    /// Write the structured report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ecbr,mcbr,gcbr,ewcbr,epcbr,acbr")]
    pub variants: Vec<String>,
    /// Held-out share of the data.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// F-measure beta.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub training: TrainingFlags,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Directory of static assets served for paths outside the API.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, short)]
    pub out: PathBuf,
    /// Start from the 2,000-case, eight-feature benchmark generator.
    #[arg(long)]
    pub benchmark: bool,
    #[arg(long, default_value_t = 8)]
    pub features: usize,
    #[arg(long)]
    pub solvent: Option<usize>,
    #[arg(long)]
    pub insolvent: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub skew: f64,
    #[arg(long, default_value_t = 0.0)]
    pub missing_rate: f64,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature code, description or 1-based index.
    #[arg(long)]
    pub feature: String,
    #[arg(long, default_value_t = acbr::service::CURVE_POINTS)]
    pub points: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
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
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
