use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use def_infer::Grid;

#[derive(Parser, Debug)]
#[command(
    name = "def-infer",
    version,
    about = "Score test and confidence regions for the slope of an error-prone covariate",
    after_help = "Every subcommand accepts --config FILE with `key = value` lines. Keys are the \
                  subcommand's long flag names (without the leading dashes); flags given on the \
                  command line win over the file. Unknown keys are errors."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Test H0: beta = beta* on a dataset.
    #[command(args_override_self = true)]
    Test(TestArgs),
    /// Confidence region for beta by inverting the test over a grid.
    #[command(args_override_self = true)]
    Ci(CiArgs),
    /// Estimate the measurement error variance from replicate measurements.
    #[command(name = "sigma-u", args_override_self = true)]
    SigmaU(SigmaUArgs),
    /// Monte Carlo size/power table for registered simulation designs.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Write one simulated dataset in the input file format.
    #[command(args_override_self = true)]
    Export(ExportArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    Ols,
    Lasso,
    Scad,
    Mcp,
    Adaptive,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RateArg {
    /// sqrt(log p / n)
    Sqrt,
    /// log p / n
    Linear,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// CSV with header y, w (or replicates w1..wm), z1..zp.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// CSV of replicate measurements w1..wm used to estimate sigma_u^2.
    #[arg(long, value_name = "FILE")]
    pub replicates: Option<PathBuf>,
    /// Measurement error variance; estimated from replicates when omitted.
    #[arg(long, value_name = "VAR")]
    pub sigma_u2: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

/// Nuisance estimators and their tuning. Unset values take the library
/// defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct EstimatorArgs {
    /// Estimator for both nuisance fits [default: lasso, or the design's own
    /// for simulate/export].
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorKind>,
    /// Estimator for the fit of y - w*beta* on z (overrides --estimator).
    #[arg(long, value_enum)]
    pub gamma_estimator: Option<EstimatorKind>,
    /// Estimator for the fit of w on z (overrides --estimator).
    #[arg(long, value_enum)]
    pub theta_estimator: Option<EstimatorKind>,
    /// Fixed penalty level; otherwise multiplier * sigma_hat * rate.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub lambda_rate: Option<RateArg>,
    /// Scale on the preliminary noise estimate [default: 1].
    #[arg(long)]
    pub lambda_multiplier: Option<f64>,
    /// SCAD shape a [default: 3.7].
    #[arg(long)]
    pub scad_a: Option<f64>,
    /// MCP shape b [default: 3].
    #[arg(long)]
    pub mcp_b: Option<f64>,
    /// Coordinate descent sweep limit [default: 10000].
    #[arg(long)]
    pub cd_max_iters: Option<usize>,
    /// Coordinate descent convergence threshold.
    #[arg(long)]
    pub cd_tol: Option<f64>,
    /// Rescale columns before coordinate descent [default: true].
    #[arg(long)]
    pub standardize: Option<bool>,
    /// Fixed gradient bound of the adaptive program (requires --mu, --rho).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Fixed residual bound of the adaptive program.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Fixed inner-product floor of the adaptive program.
    #[arg(long)]
    pub rho: Option<f64>,
    /// eta = c_eta * log n * sqrt(log p / n) [default: 0.25].
    #[arg(long)]
    pub c_eta: Option<f64>,
    /// mu = c_mu * sqrt(r2 * n) [default: 1.5].
    #[arg(long)]
    pub c_mu: Option<f64>,
    /// rho = c_rho * r2 [default: 0.5].
    #[arg(long)]
    pub c_rho: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hypothesized slope.
    #[arg(long, allow_negative_numbers = true)]
    pub beta_star: f64,
    #[command(flatten)]
    pub est: EstimatorArgs,
    /// key = value settings file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CiArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    /// Explicit grid lo:hi:step; searched automatically when omitted.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Points in the automatic coarse pass [default: 41].
    #[arg(long)]
    pub grid_coarse_points: Option<usize>,
    /// Half width of the automatic coarse pass, in standard errors [default: 10].
    #[arg(long)]
    pub grid_half_width: Option<f64>,
    /// Intervals in the automatic refinement pass [default: 400].
    #[arg(long)]
    pub grid_fine_intervals: Option<usize>,
    /// Write the accepted grid points here.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SigmaUArgs {
    /// CSV with columns w1..wm, one row per subject.
    #[arg(long, value_name = "FILE")]
    pub replicates: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

/// Overrides of a design's default settings.
#[derive(Args, Debug, Clone, Default)]
pub struct DesignArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// AR(1) correlation of the covariates.
    #[arg(long, allow_negative_numbers = true)]
    pub corr: Option<f64>,
    /// Measurement error standard deviation.
    #[arg(long)]
    pub sigma_u: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta_star: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Base seed of the random streams.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub est: EstimatorArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Registered design names, comma separated, or `all`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub design: Vec<String>,
    /// True slopes to simulate, comma separated [default: the design's null].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub beta: Vec<f64>,
    /// Replications per row [default: the design's].
    #[arg(long)]
    pub reps: Option<usize>,
    #[command(flatten)]
    pub design_args: DesignArgs,
    /// Write the table here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub design: String,
    /// Replication index of the draw.
    #[arg(long, default_value_t = 0)]
    pub rep: u64,
    /// True slope [default: the design's null].
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[command(flatten)]
    pub design_args: DesignArgs,
    /// Write the dataset here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(format!("expected lo:hi:step, got {s:?}"));
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Grid::new(num(lo)?, num(hi)?, num(step)?).map_err(|e| e.to_string())
}
