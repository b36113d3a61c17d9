mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use loadshare::Error;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug, Serialize)]
#[command(name = "loadshare", version, about = "Fit and analyse piecewise-linear load-sharing models")]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, env = "LOADSHARE_SEED", default_value_t = 20240601)]
    pub seed: u64,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Treat fit warnings (clamped slopes, unordered multipliers) as failures.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Fit a model and write estimates, Q-Q and curve data.
    Fit(FitCmd),
    /// Confidence intervals for the fitted parameters.
    Ci(CiCmd),
    /// Goodness-of-fit statistic with a Monte Carlo p-value.
    Gof(GofCmd),
    /// Quantiles, MTTF, RMT and MRT of a fitted model.
    Reliability(ReliabilityCmd),
    /// Simulation studies and synthetic data.
    Simulate(SimulateCmd),
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::RawComponents)]
    pub format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    RawComponents,
    StageGaps,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct ModelArgs {
    /// Number of hazard pieces per stage.
    #[arg(long, default_value_t = 2)]
    pub pieces: usize,
    /// Quantile window for the likelihood-selected interior knot.
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.8])]
    pub select_knot: Vec<f64>,
    /// Interior knots, stages separated by ';' and knots by ',' (e.g. "207;55").
    #[arg(long)]
    pub knots: Option<String>,
    #[arg(long, value_enum, default_value_t = AnchorArg::Min)]
    pub anchor: AnchorArg,
    /// Which piece takes an observation that sits exactly on a knot.
    #[arg(long, value_enum, default_value_t = BinningArg::Lower)]
    pub binning: BinningArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorArg {
    Min,
    Zero,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinningArg {
    Lower,
    Upper,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Auto,
    Numeric,
    ClosedForm,
}

#[derive(Args, Debug, Serialize)]
pub struct FitCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Points per stage in the curve output.
    #[arg(long, default_value_t = 200)]
    pub curve_points: usize,
    /// Directory for output files; the report goes to stdout either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    Asymptotic,
    BootNormal,
    BootPercentile,
    All,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Parametric,
    Nonparametric,
}

#[derive(Args, Debug, Serialize)]
pub struct CiCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = CiMethod::All)]
    pub interval: CiMethod,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Parametric)]
    pub scheme: SchemeArg,
    /// Clip intervals at the parameter support (gamma >= 1, b >= 0).
    #[arg(long)]
    pub truncate: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KsAnchorArg {
    GridStart,
    Origin,
}

#[derive(Args, Debug, Serialize)]
pub struct GofCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    /// Reuse the original grid and estimates instead of refitting each replicate.
    #[arg(long)]
    pub no_refit: bool,
    /// Where the model CDF starts counting: the first cut point or zero.
    #[arg(long, value_enum, default_value_t = KsAnchorArg::GridStart)]
    pub ks_anchor: KsAnchorArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ReliabilityCmd {
    /// Fitted model JSON (the `fit` report or a bare model file).
    #[arg(long)]
    pub model: PathBuf,
    /// Mission times.
    #[arg(long, value_delimiter = ',', required = true)]
    pub t0: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub reps: usize,
    /// Stage quantile levels to report.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.9])]
    pub quantiles: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateCmd {
    #[command(subcommand)]
    pub study: Study,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// Estimator bias, MSE and interval coverage for a two-stage model.
    Performance(PerformanceArgs),
    /// Integrated error when the data come from a non-PLA parent.
    Robustness(RobustnessArgs),
    /// Draw a stage-gap dataset from a fitted model.
    Data(DataDrawArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyGridArg {
    Select,
    TrueKnots,
}

#[derive(Args, Debug, Serialize)]
pub struct PerformanceArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.1])]
    pub slopes: Vec<f64>,
    #[arg(long, default_value_t = 5.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = StudyGridArg::Select)]
    pub grid: StudyGridArg,
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.8])]
    pub select_knot: Vec<f64>,
    /// Bootstrap replicates per dataset; omit to skip bootstrap intervals.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParentArg {
    Weibull,
    Quadratic,
}

#[derive(Args, Debug, Serialize)]
pub struct RobustnessArgs {
    #[arg(long, value_enum)]
    pub parent: ParentArg,
    /// Weibull shape, scale and post-failure scale inflation.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0, 3.0])]
    pub weibull: Vec<f64>,
    /// Quadratic CHF coefficients k1,k2 before and k1',k2' after the first failure.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.5, 1.0, 1.5])]
    pub quadratic: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.8])]
    pub select_knot: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct DataDrawArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// Output CSV; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit status for a failed run.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidData(_) | Error::Parse(_) | Error::Io(_) | Error::GridDoesNotCover { .. }) => 2,
        Some(
            Error::InvalidGrid(_)
            | Error::InvalidParams(_)
            | Error::InvalidProbability(_)
            | Error::StageOutOfRange { .. }
            | Error::Domain(_),
        ) => 1,
        Some(_) => 3,
        None if err.downcast_ref::<commands::UsageError>().is_some() => 1,
        None if err.downcast_ref::<commands::StrictError>().is_some() => 3,
        None if err.downcast_ref::<std::io::Error>().is_some() => 2,
        None => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
