use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use mknn_core::data::SyntheticKind;
use mknn_core::trw::TrwRoute;
use mknn_core::Algorithm;

/// Semi-supervised kNN on constrained tired-random-walk weights.
#[derive(Parser, Debug)]
#[command(name = "mknn", version)]
pub struct Cli {
    /// Flat `key = value` file supplying flags for the subcommand; flags on
    /// the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Repeated-split error curves for one or more classifiers.
    Bench(BenchArgs),
    /// Stream samples through a frozen model and compare with refitting.
    Online(OnlineArgs),
    /// Leave-one-out reconstruction error of samples and TRW weights.
    Rmse(RmseArgs),
    /// Cross-validated parameter search on one split.
    Tune(TuneArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value = "two-arcs")]
    pub kind: SyntheticKind,
    #[arg(long, default_value_t = 500)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Points per class moved into the gap between the classes.
    #[arg(long)]
    pub bridges: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(short, long, value_name = "PATH")]
    pub out: PathBuf,
}

/// Where the samples come from: a CSV file, or a generator.
#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV dataset; without it a synthetic set is generated.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Label column: `last`, a zero-based index, or a header name.
    #[arg(long, default_value = "last")]
    pub label_column: String,
    /// Extra label token meaning "unlabeled" (empty and `?` always are).
    #[arg(long)]
    pub unlabeled_marker: Option<String>,
    /// Z-score every feature after loading.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, default_value = "two-arcs", conflicts_with = "data")]
    pub kind: SyntheticKind,
    #[arg(long, default_value_t = 500)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long)]
    pub bridges: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub data_seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct MethodArgs {
    /// Gaussian kernel width; overrides --sigma-scale.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Kernel width as a multiple of the mean nearest-neighbor distance.
    #[arg(long, default_value_t = 4.0)]
    pub sigma_scale: f64,
    #[arg(long, default_value_t = 0.99)]
    pub alpha: f64,
    /// Neighbors per node of the geodesic kNN graph.
    #[arg(long, default_value_t = 8)]
    pub geo_neighbors: usize,
    #[arg(long, default_value = "spd-fast")]
    pub route: TrwRoute,
    #[arg(long, default_value_t = 2)]
    pub tree_depth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub theta_fraction: f64,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// Kernel widths to try, as multiples of the mean nearest-neighbor
    /// distance [default: 1,2,4,8,16].
    #[arg(long)]
    pub sigma_scales: Option<List<f64>>,
    /// [default: 0.5,0.9,0.99]
    #[arg(long)]
    pub alphas: Option<List<f64>>,
    /// Geodesic graph sizes to try [default: 5,8,12,16].
    #[arg(long)]
    pub geo_grid: Option<List<usize>>,
    #[arg(long, default_value_t = 2)]
    pub folds: usize,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "knn,wknn,gknn,mknn")]
    pub algorithms: List<Algorithm>,
    /// Values of k, e.g. `1-10` or `1,3,5`.
    #[arg(long, default_value = "1-10")]
    pub k: Counts,
    /// `k` to tie the label count to k, or a list of counts.
    #[arg(long, default_value = "k")]
    pub labels_per_class: LabelCounts,
    /// Number of random splits.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed_start: u64,
    /// Use the given parameters instead of cross-validating.
    #[arg(long)]
    pub no_tune: bool,
    #[arg(short, long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OnlineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, default_value_t = 10)]
    pub labels_per_class: usize,
    /// Unlabeled samples held out and streamed.
    #[arg(long, default_value_t = 100)]
    pub online_count: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Reconstruction neighbors [default: k].
    #[arg(long)]
    pub k_recon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the per-sample refit comparison.
    #[arg(long)]
    pub no_refit: bool,
    /// CSV of feature rows to stream instead of held-out samples.
    #[arg(long, value_name = "PATH")]
    pub stream: Option<PathBuf>,
    #[arg(short, long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RmseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub labels_per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "mknn")]
    pub algorithm: Algorithm,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub labels_per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parameter file to write; usable as `--config`.
    #[arg(short, long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Comma-separated values.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let items = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<T>()
                    .map_err(|e| format!("`{}`: {e}", t.trim()))
            })
            .collect::<Result<Vec<T>, String>>()?;
        Ok(List(items))
    }
}

/// Comma-separated counts and inclusive ranges such as `1-3,7`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counts(pub Vec<usize>);

impl FromStr for Counts {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim) {
            let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
            match part.split_once('-') {
                Some((a, b)) => {
                    let (a, b) = (num(a)?, num(b)?);
                    if a > b {
                        return Err(format!("empty range `{part}`"));
                    }
                    out.extend(a..=b);
                }
                None => out.push(num(part)?),
            }
        }
        if out.contains(&0) {
            return Err("counts must be positive".into());
        }
        Ok(Counts(out))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelCounts {
    TiedToK,
    Fixed(Counts),
}

impl FromStr for LabelCounts {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "k" {
            Ok(LabelCounts::TiedToK)
        } else {
            s.parse().map(LabelCounts::Fixed)
        }
    }
}
