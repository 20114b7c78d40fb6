//! `capi`: exact, tree-based and proxy-adjusted interaction indices from the command line.
//!
//! Exit codes: 0 on success, 1 on I/O or parse failures, 2 on capacity or
//! precondition failures.

mod commands;
mod games;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use capi::extraction::LambdaMethod;
use capi::pipeline::Adjust;
use capi::IndexFamily;

#[derive(Debug, Parser)]
#[command(name = "capi", version, about, args_override_self = true)]
pub struct Cli {
    /// Worker thread cap (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact interactions by enumeration.
    Exact(ExactArgs),
    /// Exact interactions of a tree model by leaf-path extraction.
    TreeExtract(TreeExtractArgs),
    /// Fit a boosted-tree proxy on sampled coalitions.
    TrainProxy(TrainProxyArgs),
    /// Proxy estimate with optional MSR adjustment.
    Estimate(EstimateArgs),
    /// Relative MSE against ground truth over budgets and repetitions.
    Benchmark(BenchmarkArgs),
    /// Variance factor of the MSR estimator, brute and closed form.
    Gamma(GammaArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct IndexArgs {
    #[arg(long, default_value = "sii")]
    pub index: IndexFamily,
    /// Maximum interaction order (faithful indices: the `k` of the fit).
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long, default_value_t = 0.5)]
    pub banzhaf_w: f64,
    /// Comma-separated 0/1 target strings, or a file with one per line;
    /// default is every coalition up to `--order`.
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
pub struct GameArgs {
    /// `constant:c`, `unanimity:bits`, `moebius:path`, `tree:path` or `table:path`.
    #[arg(long)]
    pub game: String,
    /// Player count; required for constant games, checked otherwise.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SamplerKind {
    Leverage,
    Proportional,
    Uniform,
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    #[arg(long, value_enum, default_value = "leverage")]
    pub sampler: SamplerKind,
    #[arg(long, default_value_t = 256)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub with_replacement: bool,
    /// Do not force the empty and grand coalitions into the sample.
    #[arg(long)]
    pub no_borders: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub index: IndexArgs,
    #[arg(long, default_value_t = capi::exact::DEFAULT_ENUMERATION_CAP)]
    pub cap: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TreeExtractArgs {
    /// JSON tree model.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub index: IndexArgs,
    /// `closed` (default) or `general` leaf weights.
    #[arg(long, default_value = "closed")]
    pub lambda: LambdaMethod,
    /// Report leaves visited and wall time on standard error.
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ProxyArgs {
    /// `default` or `hpo-informed`.
    #[arg(long, default_value = "default")]
    pub preset: String,
    #[arg(long)]
    pub n_estimators: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainProxyArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub index: IndexArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub proxy: ProxyArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ProxyKind {
    Tree,
    Linear,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub index: IndexArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, value_enum, default_value = "tree")]
    pub proxy: ProxyKind,
    #[command(flatten)]
    pub tree: ProxyArgs,
    /// Basis order of the linear proxy (defaults to `--order`).
    #[arg(long)]
    pub linear_order: Option<usize>,
    #[arg(long, default_value = "auto")]
    pub adjust: Adjust,
    /// `C` in the adjustment rule `budget ≥ C·n^(k−1)`.
    #[arg(long, default_value_t = capi::msr::DEFAULT_ADJUST_CONSTANT)]
    pub adjust_constant: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub index: IndexArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Proxies to compare: `tree:<preset>` or `linear:<order>`.
    #[arg(long, value_delimiter = ',', default_value = "tree:default")]
    pub proxies: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub budgets: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value = "auto")]
    pub adjust: Adjust,
    /// Results CSV; the summary goes to `<out>.summary.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SchemeKind {
    Leverage,
    Proportional,
    Uniform,
}

#[derive(Debug, Clone, Args)]
pub struct GammaArgs {
    #[arg(long, default_value = "sii")]
    pub index: IndexFamily,
    #[arg(long, value_enum, default_value = "leverage")]
    pub scheme: SchemeKind,
    #[arg(long)]
    pub n: usize,
    /// Target size `s`.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long, default_value_t = 0.5)]
    pub banzhaf_w: f64,
    #[arg(long, default_value_t = capi::exact::DEFAULT_ENUMERATION_CAP)]
    pub cap: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this path instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let precondition = err
        .chain()
        .find_map(|e| e.downcast_ref::<capi::Error>())
        .is_some_and(capi::Error::is_precondition);
    if precondition {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli, args[1..].to_vec()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
