//! `disentangle`: build balanced subsamples of labeled latent codes, fit
//! attribute directions and measure their entanglement.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "disentangle", version, about = "Balanced sampling and disentangled latent directions")]
pub struct Cli {
    /// Require an explicit --seed on every command that uses randomness.
    #[arg(long, global = true)]
    pub strict: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a synthetic oracle world and sample a labeled dataset from it.
    Synth(SynthArgs),
    /// Drop rows whose confidence is below a threshold on any attribute.
    Filter(FilterArgs),
    /// Joint label counts over all attribute combinations.
    Contingency(ContingencyArgs),
    /// Draw a balanced or uniform subsample.
    Sample(SampleArgs),
    /// Fit one direction per attribute.
    Fit(FitArgs),
    /// Project a direction onto the orthogonal complement of others.
    Project(ProjectArgs),
    /// Move every code of a dataset along a direction.
    Edit(EditArgs),
    /// Re-score directions against an oracle world.
    Eval(EvalArgs),
    /// Effect and entanglement across sample sizes or SVM regularization.
    Sweep(SweepArgs),
    /// Merge CSV tables with identical headers.
    Report(ReportArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SamplingKind {
    Balanced,
    Uniform,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Skip,
    Oversample,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Centroid,
    Svm,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScoreDomain {
    /// Logistic scores in (0, 1).
    Probability,
    /// Raw logits; re-scoring is then exactly linear in the edit.
    Logit,
}

#[derive(Args, Debug)]
pub struct SeedArg {
    /// Random seed (default 0; required with --strict).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output base path: writes BASE.latd, BASE.labels.csv and BASE.world.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of labeled codes.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Latent dimension.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Use mutually orthogonal attribute vectors instead of the correlated pairs.
    #[arg(long)]
    pub orthogonal: bool,
    /// Logistic sharpness of the oracle scores.
    #[arg(long, default_value_t = 1.0)]
    pub sharpness: f64,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    /// Input dataset base path.
    #[arg(long)]
    pub data: PathBuf,
    /// Minimum confidence required on every attribute.
    #[arg(long)]
    pub threshold: f64,
    /// Output dataset base path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ContingencyArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Restrict the counts to the rows of a subsample CSV.
    #[arg(long)]
    pub sample: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = SamplingKind::Balanced)]
    pub sampling: SamplingKind,
    /// Number of draws.
    #[arg(long, default_value_t = 1000)]
    pub n0: usize,
    /// What a balanced draw does when its cell is exhausted.
    #[arg(long, value_enum, default_value_t = Policy::Skip)]
    pub policy: Policy,
    /// Output CSV of selected rows; a JSON summary is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Subsample CSV from `sample`; all rows are used when omitted.
    #[arg(long)]
    pub sample: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Centroid)]
    pub method: Method,
    /// SVM regularization.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// SVM duality-gap tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// SVM epoch limit.
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Directory receiving one `<attribute>.json` per attribute.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    /// Direction to project.
    #[arg(long)]
    pub target: PathBuf,
    /// Directions to remove from the target.
    #[arg(long, num_args = 1.., required = true)]
    pub others: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EditArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub direction: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
    /// Output dataset base path. Labels are copied; confidences are dropped.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Oracle world JSON written by `synth`.
    #[arg(long)]
    pub world: PathBuf,
    /// Direction JSON files, one row each.
    #[arg(long, num_args = 1.., required = true)]
    pub directions: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
    /// Number of evaluation codes.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = ScoreDomain::Probability)]
    pub scores: ScoreDomain,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Rescore table (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional `direction,attribute,effect,entanglement` summary CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub world: PathBuf,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "c_grid", required_unless_present = "c_grid")]
    pub sizes: Vec<usize>,
    /// SVM regularization values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub c_grid: Vec<f64>,
    /// Methods for a sample-size sweep.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Centroid, Method::Svm])]
    pub methods: Vec<Method>,
    /// Samplings for a sample-size sweep.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SamplingKind::Balanced, SamplingKind::Uniform])]
    pub samplings: Vec<SamplingKind>,
    /// Exhaustion policies for balanced sampling, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Policy::Skip])]
    pub policy: Vec<Policy>,
    /// Sample size of a regularization sweep.
    #[arg(long, default_value_t = 1000)]
    pub n0: usize,
    /// SVM regularization of a sample-size sweep.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// CSV tables to concatenate; headers must match.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<disentangle_core::Error> for Failure {
    fn from(e: disentangle_core::Error) -> Self {
        Failure::Data(e.into())
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
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
