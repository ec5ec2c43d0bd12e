use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug, Serialize)]
#[command(name = "rankhc", version, about = "Rank-based higher criticism for sparse anomaly detection")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Result file (JSON or CSV depending on the command); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run manifest path. Defaults to `<out>.manifest.json`, or to
    /// `rankhc-<command>.manifest.json` when writing to stdout.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Test a CSV panel (subjects in rows, referentials in columns).
    Test(TestArgs),
    /// Tabulate the null law for a panel shape.
    Tabulate(TabulateArgs),
    /// Run a power experiment and write a CSV of power curves.
    Simulate(SimulateArgs),
    /// Emit the detection boundary on a (beta, sigma) grid as CSV.
    Boundary(BoundaryArgs),
    /// Friedman rank-sum test with simulated calibration.
    Friedman(FriedmanArgs),
    /// Distribution-aware higher criticism on subject means.
    DistHc(DistHcArgs),
    /// Higher criticism on raw subject means with permutation calibration.
    PermHc(PermHcArgs),
    /// Check the exact moment and covariance constructions.
    Fixtures(FixturesArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Serialize, Clone)]
#[group(required = true, multiple = false)]
pub struct SeedArgs {
    /// Root seed for every random stream of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Draw the root seed from the OS; it is recorded in the manifest.
    #[arg(long)]
    pub random_seed: bool,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct InputArgs {
    /// CSV file with one row per subject and one column per referential.
    #[arg(long)]
    pub input: PathBuf,
    /// Skip the first line.
    #[arg(long)]
    pub has_header: bool,
    /// Input has referentials in rows and subjects in columns.
    #[arg(long)]
    pub transpose: bool,
    /// Per-column direction list such as `high,low,high`; `low` columns are
    /// negated. A single value applies to every column.
    #[arg(long)]
    pub direction: Option<String>,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct GridArgs {
    #[arg(long, value_enum, default_value_t = GridArg::Extended)]
    pub grid: GridArg,
    /// Grid resolution; defaults to ceil(ln² n).
    #[arg(long)]
    pub k_n: Option<u32>,
}

#[derive(ValueEnum, Debug, Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum GridArg {
    Standard,
    Extended,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct TableArgs {
    /// Null table file to use.
    #[arg(long, conflicts_with = "table_dir")]
    pub table: Option<PathBuf>,
    /// Directory of cached null tables, looked up by shape, grid, counts and seed.
    #[arg(long)]
    pub table_dir: Option<PathBuf>,
    /// Tabulate a missing table (and cache it when --table-dir is set).
    #[arg(long)]
    pub auto_tabulate: bool,
    /// Null panels behind the exceedance probabilities.
    #[arg(long, default_value_t = 100_000)]
    pub mc_pq: usize,
    /// Null panels behind the law of the statistic.
    #[arg(long, default_value_t = 100_000)]
    pub mc_t: usize,
    /// Seed of the null table, kept apart from the data seed so that cached
    /// tables are shared across runs.
    #[arg(long, default_value_t = 1)]
    pub table_seed: u64,
    /// Cap on rank draws when tabulating.
    #[arg(long, default_value_t = 2e11)]
    pub budget: f64,
}

#[derive(ValueEnum, Debug, Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    /// Random tie-breaking with a tabulated null.
    RandomTies,
    /// Midranks with a permutation null.
    MidrankPerm,
    /// Midranks against the tie-free table; approximate under ties.
    MidrankNaive,
}

#[derive(Args, Debug, Serialize)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long, value_enum, default_value_t = TestMethod::RandomTies)]
    pub method: TestMethod,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub table: TableArgs,
    /// Permutations for midrank-perm.
    #[arg(long, default_value_t = 10_000)]
    pub permutations: usize,
    /// Include subject-level p-values.
    #[arg(long)]
    pub subjects: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct TabulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub t: usize,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 100_000)]
    pub mc_pq: usize,
    #[arg(long, default_value_t = 100_000)]
    pub mc_t: usize,
    #[arg(long, default_value_t = 2e11)]
    pub budget: f64,
    /// Write into this cache directory under the canonical file name instead
    /// of --out.
    #[arg(long)]
    pub table_dir: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Power of several methods against tau.
    Power,
    /// Random-ties power for several grid sizes.
    Grid,
    /// Random-ties power for several stream lengths t.
    StreamLength,
}

#[derive(ValueEnum, Debug, Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    RandomTies,
    MidrankPerm,
    MidrankNaive,
    DistHc,
    Friedman,
    PermHc,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Experiment::Power)]
    pub experiment: Experiment,
    /// normal-shift, exponential-rate, uniform-tilt, cauchy-shift,
    /// convolution-normal:<sigma> or convolution-triangular:<sigma>.
    #[arg(long, default_value = "normal-shift")]
    pub setting: String,
    #[arg(long)]
    pub n: usize,
    /// Referentials (power and grid experiments).
    #[arg(long)]
    pub t: Option<usize>,
    /// Stream lengths for the stream-length experiment.
    #[arg(long, value_delimiter = ',')]
    pub t_list: Vec<usize>,
    /// Sparsity exponent; |S| = ceil(n^(1-beta)).
    #[arg(long, conflicts_with = "anomalies")]
    pub beta: Option<f64>,
    /// Number of anomalous subjects; sets beta = 1 - ln|S| / ln n.
    #[arg(long)]
    pub anomalies: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2")]
    pub taus: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "random-ties")]
    pub methods: Vec<MethodArg>,
    /// Grid resolutions for the grid experiment.
    #[arg(long, value_delimiter = ',')]
    pub k_list: Vec<u32>,
    /// Trials per tau; defaults to 1000, or 10000 for the grid experiment.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Permutations per trial for midrank-perm and perm-hc.
    #[arg(long, default_value_t = 199)]
    pub permutations: usize,
    /// Null draws behind the dist-hc and Friedman calibrations.
    #[arg(long, default_value_t = 10_000)]
    pub oracle_mc: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Also write the full curves with metadata as JSON.
    #[arg(long)]
    pub curves_json: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundaryArgs {
    /// Interior beta grid points in (1/2, 1).
    #[arg(long, default_value_t = 99)]
    pub beta_points: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,1,1.5,2")]
    pub sigmas: Vec<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct FriedmanArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long, default_value_t = 10_000)]
    pub mc: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct DistHcArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// normal, uniform, exponential or cauchy.
    #[arg(long, default_value = "normal")]
    pub family: String,
    /// Null mean (median for cauchy).
    #[arg(long, default_value_t = 0.0)]
    pub mu0: f64,
    /// Null standard deviation (scale for cauchy).
    #[arg(long, default_value_t = 1.0)]
    pub sigma0: f64,
    #[arg(long)]
    pub k_n: Option<u32>,
    #[arg(long, default_value_t = 10_000)]
    pub mc: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct PermHcArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long)]
    pub k_n: Option<u32>,
    #[arg(long, default_value_t = 10_000)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(ValueEnum, Debug, Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    ZeroVariance,
    Oscillating,
    Covariance,
    All,
}

#[derive(Args, Debug, Serialize)]
pub struct FixturesArgs {
    #[arg(long, value_enum, default_value_t = Which::All)]
    pub which: Which,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Mixture weight for the zero-variance construction.
    #[arg(long, default_value_t = 0.7)]
    pub p: f64,
    /// n entering sin(n) in the oscillating-variance construction.
    #[arg(long, default_value_t = 5)]
    pub osc_n: usize,
    /// Panel size for the covariance counterexample.
    #[arg(long, default_value_t = 10)]
    pub cov_n: usize,
    /// Anomaly count for the covariance counterexample.
    #[arg(long, default_value_t = 4)]
    pub cov_s: usize,
    #[arg(long, default_value_t = 100_000)]
    pub mc: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ReplayArgs {
    pub manifest_path: PathBuf,
}
