use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Reaction-diffusion solvers, surrogate datasets, training and evaluation.
///
/// Times are given in years at the command line (1 year = 3.1536e7 s) and
/// handled in seconds internally. All randomness derives from `--seed`.
#[derive(Debug, Parser)]
#[command(name = "rdlab", version, args_override_self = true)]
pub struct Cli {
    /// TOML `key = value` file (or an earlier run's `.config.json`) whose
    /// entries act as flags; flags on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Concentration at one point, or over a lattice with `--grid`.
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Generate a labelled dataset.
    #[command(args_override_self = true)]
    Gen(GenArgs),
    /// Train a surrogate network on a dataset.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Score a model (or the exact series, `--model oracle`) per split.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Batch-count, coefficient or Damköhler sweeps.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Series,
    Fd,
    Danckwerts,
    Steady,
    PureDiffusion,
    PureReaction,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpecArgs {
    /// Effective diffusion coefficient, m²/s.
    #[arg(long, default_value_t = 2.6e-9)]
    pub de: f64,
    /// First-order reaction rate, 1/s.
    #[arg(long, default_value_t = 2.125e-7)]
    pub k: f64,
    /// Surface concentration, mol/m³.
    #[arg(long, default_value_t = 75.5)]
    pub c0: f64,
    /// Half-width L of the slab, m.
    #[arg(long, default_value_t = 0.05)]
    pub half_thickness: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// Position, m, within [−L, L].
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x: f64,
    /// Time in years.
    #[arg(long, default_value_t = 1.0)]
    pub t_years: f64,
    /// Series term budget.
    #[arg(long, default_value_t = 500)]
    pub terms: usize,
    /// Simpson steps of the Danckwerts integral.
    #[arg(long, default_value_t = 256)]
    pub quad_steps: usize,
    /// Spatial nodes of the lattice (odd).
    #[arg(long, default_value_t = 201)]
    pub nx: usize,
    /// Time steps of the lattice; chosen from the slowest decay rate if omitted.
    #[arg(long)]
    pub nt: Option<usize>,
    /// Write the `x,t,c` field over [0, t_years] to this CSV instead of printing one value.
    #[arg(long, value_name = "CSV")]
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangesPreset {
    /// c0 ∈ [0, 200], k ∈ [1e−10, 1e−1], de ∈ [1e−13, 1e−1].
    Full,
    /// c0 ∈ [50, 100], k ∈ [1e−8, 1e−6], de ∈ [1e−10, 1e−8].
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormChoice {
    /// z-score.
    Standard,
    /// (x − µ) divided by the raw second moment.
    PaperExact,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub batches: u64,
    #[arg(long, default_value_t = 3000, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_size: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; receives dataset.csv and its sidecars.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = RangesPreset::Full)]
    pub ranges: RangesPreset,
    /// Samples sharing one physical problem (and one solve).
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub points_per_spec: u64,
    #[arg(long, value_enum, default_value_t = NormChoice::Standard)]
    pub norm: NormChoice,
    /// Normalize k and de directly instead of their base-10 logarithms.
    #[arg(long)]
    pub raw_rates: bool,
    /// Worker threads; the output does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NetArgs {
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "64,64,32")]
    pub hidden: Vec<usize>,
    /// L2 weight penalty.
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples per gradient step.
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    /// Adam step size.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Step-size multiplier applied after each epoch.
    #[arg(long, default_value_t = 1.0)]
    pub lr_decay: f64,
    /// Draw weights from [0, 1) without the 1/√fan-in factor.
    #[arg(long)]
    pub unscaled_init: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Dataset CSV, or a directory holding dataset.csv.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    /// Checkpoint path; the history goes to `<stem>.history.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Checkpoint JSON, or `oracle` for the exact series.
    #[arg(long)]
    pub model: String,
    /// Dataset CSV, or a directory holding dataset.csv.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub thresholds: Vec<f64>,
    /// CSV report path; printed to stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Retrain on growing training subsets of one dataset.
    Batch,
    /// Vary the reaction rate.
    K,
    /// Vary the diffusion coefficient.
    De,
    /// Vary the diffusion coefficient at a fast reaction rate.
    Damkohler,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    /// Checkpoint JSON or `oracle` (coefficient and Damköhler sweeps).
    #[arg(long)]
    pub model: Option<String>,
    /// Base dataset (batch sweep).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Total batch counts, ascending (batch sweep).
    #[arg(long, value_delimiter = ',', default_value = "10,30,100")]
    pub counts: Vec<usize>,
    /// Swept values; the reference values if omitted.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub thresholds: Vec<f64>,
    #[arg(long, default_value_t = 75.5)]
    pub c0: f64,
    #[arg(long, default_value_t = 0.05)]
    pub half_thickness: f64,
    /// Fixed diffusion coefficient of the k sweep.
    #[arg(long, default_value_t = 2.6e-9)]
    pub de: f64,
    /// Fixed reaction rate (default 2.125e-7 for the de sweep, 2e-4 for Damköhler).
    #[arg(long)]
    pub k: Option<f64>,
    /// Cell-centred x points per lattice.
    #[arg(long, default_value_t = 21)]
    pub lattice_nx: usize,
    /// Time points per lattice.
    #[arg(long, default_value_t = 15)]
    pub lattice_nt: usize,
    /// Last lattice time, years.
    #[arg(long, default_value_t = 7.0)]
    pub t_max_years: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    /// Parallel sweep rows.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// CSV table path; printed to stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
