//! `miscale`: synthesize, ingest, estimate, scan, fit and report.
//!
//! Exit codes: 0 on success, 2 on usage or validation errors, 3 when an
//! estimator or the gradient check fails at run time.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "miscale", version, about = "Mutual-information scaling of classical data")]
pub struct Cli {
    /// Flat `key = value` file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for sweeps and per-sample loops.
    #[arg(long, global = true, env = "MISCALE_JOBS")]
    pub jobs: Option<usize>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Sample a synthetic dataset with a known MI oracle.
    #[command(subcommand)]
    Synth(Synth),
    /// Convert an IDX image stack or an embedded text corpus to the native format.
    Ingest(IngestArgs),
    /// Estimate the MI across one cut.
    Estimate(EstimateArgs),
    /// Estimate the MI across a family of cuts and write the curve.
    Scan(ScanArgs),
    /// Fit one scaling model, or rank all candidates, on a curve.
    Fit(FitArgs),
    /// Assemble curves, fits and a verdict into a markdown report.
    Report(ReportArgs),
    /// Run the finite-difference gradient check over every layer type.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Synth {
    /// Random pairs of perfectly correlated sites.
    Randompair(RandomPairArgs),
    /// Zero-mean Gaussian: bivariate, chain or nearest-neighbour grid field.
    Gauss(GaussArgs),
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("pairing").required(true).args(["alpha", "all_to_all"]))]
pub struct RandomPairArgs {
    /// Exponent of the pair-distance law.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Pair sites uniformly at random instead of by distance.
    #[arg(long)]
    pub all_to_all: bool,
    #[arg(long, default_value_t = 512)]
    pub sites: usize,
    #[arg(long, default_value_t = 2)]
    pub alphabet: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset path; the descriptor goes to `<out>.json` and the oracle curve to `<out>.oracle.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GaussArgs {
    /// Correlation of neighbouring coordinates (bivariate and chain).
    #[arg(long, default_value_t = 0.9)]
    pub rho: f64,
    /// Length of an AR(1) chain.
    #[arg(long, conflicts_with = "grid")]
    pub chain: Option<usize>,
    /// `HxW` grid for a nearest-neighbour Gaussian field.
    #[arg(long)]
    pub grid: Option<String>,
    /// Nearest-neighbour coupling of the grid field.
    #[arg(long, default_value_t = 0.2)]
    pub coupling: f64,
    /// Family of the oracle curve written next to the dataset.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["idx", "corpus"]))]
pub struct IngestArgs {
    /// IDX image or label file.
    #[arg(long)]
    pub idx: Option<PathBuf>,
    /// Whitespace-tokenized text corpus.
    #[arg(long, requires = "embeddings")]
    pub corpus: Option<PathBuf>,
    /// `token v1 v2 ...` embedding table.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub seq_len: usize,
    #[arg(long, default_value_t = 64)]
    pub stride: usize,
    /// Keep at most this many samples.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Discretize values into this many bins.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub hi: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Knn,
    Mine,
    Ar,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    Ffnn,
    Cnn,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimatorArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Neighbour rank (knn).
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Jitter half-width (knn).
    #[arg(long, default_value_t = 1e-10)]
    pub noise: f64,
    /// Brute-force neighbour search above this block dimension (knn).
    #[arg(long, default_value_t = 30)]
    pub brute_force_above: usize,
    /// Score network (mine).
    #[arg(long, value_enum, default_value_t = Score::Ffnn)]
    pub score: Score,
    /// Training iterations (mine).
    #[arg(long, default_value_t = 5000)]
    pub iterations: usize,
    /// Trailing iterations averaged into the estimate (mine); defaults to a tenth.
    #[arg(long)]
    pub eval_window: Option<usize>,
    #[arg(long, default_value_t = 0.99)]
    pub ema_rate: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    /// Adam step size; defaults to 1e-4 for mine and 1e-3 for ar.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Categories per coordinate (ar).
    #[arg(long, default_value_t = 8)]
    pub bins: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Comma-separated hidden widths (ar).
    #[arg(long, value_delimiter = ',', default_value = "128")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub holdout_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Partition family: LR, TB or CS.
    #[arg(long, default_value = "LR")]
    pub family: String,
    /// Cut parameter.
    #[arg(long = "L", visible_alias = "l")]
    pub l: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    /// Write the MINE training trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "LR")]
    pub family: String,
    /// Cuts as `start:stop[:step]` (inclusive) or a comma list; every cut when omitted.
    #[arg(long)]
    pub ls: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
    /// Curve CSV path; run metadata goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub curve: PathBuf,
    /// power, log, plateau, all_to_all, area or volume; rank every candidate when omitted.
    #[arg(long)]
    pub model: Option<String>,
    /// Inclusive `lo:hi` fit window; the interior window when omitted.
    #[arg(long)]
    pub window: Option<String>,
    /// Fraction of Lmax trimmed at each end for the default window.
    #[arg(long, default_value_t = 0.1)]
    pub boundary_fraction: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbscissaArg {
    Cut,
    Fraction,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Curve CSV files, comma separated or repeated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub curves: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = AbscissaArg::Fraction)]
    pub abscissa: AbscissaArg,
    #[arg(long, default_value_t = 0.1)]
    pub boundary_fraction: f64,
    /// Markdown path; gnuplot tables are written alongside as `<stem>.<i>.dat`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let args = match config::layer(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().ok();
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Runtime(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
