//! End-to-end proxy estimation: sample, evaluate, fit a proxy, extract its
//! interactions exactly and optionally correct them with MSR on the residuals.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::{subsets_up_to_order, Coalition};
use crate::error::{Error, Result};
use crate::exact::{exact_interactions, DEFAULT_ENUMERATION_CAP};
use crate::extraction::{
    extract_linear_interactions, extract_tree_interactions, fit_linear_proxy, interaction_basis, LinearProxy,
};
use crate::game::{CountingGame, Game};
use crate::gbt::{train, GbtConfig};
use crate::indices::IndexSpec;
use crate::interaction::{InteractionVector, Provenance};
use crate::msr::{msr_estimate, should_adjust_with, ResidualGame, Sample, DEFAULT_ADJUST_CONSTANT};
use crate::numeric::{binomial, CompensatedSum};
use crate::sampling::{sample, SamplerConfig};
use crate::trees::{NodeEnsemble, TreeEnsemble};

/// Default ceiling on the number of linear basis functions.
pub const DEFAULT_LINEAR_BASIS_LIMIT: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProxyConfig {
    Tree(GbtConfig),
    /// Least squares on all coalitions of size at most `order`.
    Linear {
        order: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Adjust {
    #[default]
    Auto,
    On,
    Off,
}

impl std::str::FromStr for Adjust {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Adjust::Auto),
            "on" => Ok(Adjust::On),
            "off" => Ok(Adjust::Off),
            other => Err(Error::Parse(format!("unknown adjust mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Targets {
    /// Every coalition of size `1..=k`.
    UpToOrder(usize),
    Explicit(Vec<String>),
}

impl Targets {
    pub fn resolve(&self, n: usize) -> Result<Vec<Coalition>> {
        match self {
            Targets::UpToOrder(k) => Ok(subsets_up_to_order(n, *k)),
            Targets::Explicit(bits) => bits
                .iter()
                .map(|b| {
                    let c = Coalition::parse_bits(b)?;
                    if c.width() != n {
                        return Err(Error::WidthMismatch {
                            expected: n,
                            got: c.width(),
                        });
                    }
                    Ok(c)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub index: IndexSpec,
    pub proxy: ProxyConfig,
    /// The sampler's own seed is replaced by the run seed.
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub adjust: Adjust,
    pub targets: Targets,
    pub seed: u64,
    #[serde(default = "default_constant")]
    pub adjust_constant: f64,
    #[serde(default = "default_limit")]
    pub linear_basis_limit: usize,
}

fn default_constant() -> f64 {
    DEFAULT_ADJUST_CONSTANT
}

fn default_limit() -> usize {
    DEFAULT_LINEAR_BASIS_LIMIT
}

impl PipelineConfig {
    pub fn new(index: IndexSpec, proxy: ProxyConfig, sampler: SamplerConfig, targets: Targets, seed: u64) -> Self {
        Self {
            index,
            proxy,
            sampler,
            adjust: Adjust::Auto,
            targets,
            seed,
            adjust_constant: DEFAULT_ADJUST_CONSTANT,
            linear_basis_limit: DEFAULT_LINEAR_BASIS_LIMIT,
        }
    }

    pub fn with_adjust(mut self, adjust: Adjust) -> Self {
        self.adjust = adjust;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.sampler.budget = budget;
        self
    }
}

/// The fitted proxy, kept for inspection.
#[derive(Debug, Clone)]
pub enum FittedProxy {
    Tree {
        model: NodeEnsemble,
        ensemble: TreeEnsemble,
    },
    Linear(LinearProxy),
}

#[derive(Debug, Clone)]
pub struct ProxyShapRun {
    pub estimate: InteractionVector,
    pub proxy_part: InteractionVector,
    pub msr_part: Option<InteractionVector>,
    pub adjusted: bool,
    /// Game evaluations made by the run.
    pub queries: u64,
    pub samples: Vec<Sample>,
    /// Mean squared residual of the proxy on the evaluated coalitions.
    pub train_mse: f64,
    pub proxy: FittedProxy,
}

/// Runs the estimator. The game is evaluated exactly once per sampled coalition.
pub fn run_proxyshap<G: Game + ?Sized>(game: &G, config: &PipelineConfig) -> Result<ProxyShapRun> {
    let n = game.n_players();
    let index = config.index;
    index.validate()?;
    let targets = config.targets.resolve(n)?;
    crate::interaction::validate_targets(&index, n, &targets)?;
    let order = targets.iter().map(Coalition::len).max().unwrap_or(1);

    let adjusted = match config.adjust {
        Adjust::Off => false,
        Adjust::On => {
            if !index.family.has_coalition_weights() {
                return Err(Error::NoCoalitionWeights {
                    family: index.family.name(),
                });
            }
            true
        }
        Adjust::Auto => {
            index.family.has_coalition_weights()
                && should_adjust_with(n, order, config.sampler.budget, config.adjust_constant)
        }
    };

    if let ProxyConfig::Linear { order } = &config.proxy {
        let size: f64 = (0..=*order).map(|j| binomial(n as u64, j as u64)).sum();
        if size > config.linear_basis_limit as f64 {
            return Err(Error::Precondition(format!(
                "linear basis of order {order} over {n} players has {size} functions, limit is {}",
                config.linear_basis_limit
            )));
        }
    }

    let sampler = SamplerConfig {
        seed: config.seed,
        ..config.sampler.clone()
    };
    let drawn = sample(&sampler, n)?;

    let counting = CountingGame::new(game);
    let values: Vec<f64> = drawn
        .par_iter()
        .map(|(c, _)| counting.evaluate(c))
        .collect::<Result<_>>()?;
    let queries = counting.calls();
    let data: Vec<(Coalition, f64)> = drawn
        .iter()
        .map(|(c, _)| c.clone())
        .zip(values.iter().copied())
        .collect();

    let (proxy, proxy_part, fitted): (FittedProxy, InteractionVector, Vec<f64>) = match &config.proxy {
        ProxyConfig::Tree(gbt) => {
            let trained = train(&data, &gbt.clone().with_seed(config.seed))?;
            let (ensemble, _) = trained.model.flatten()?;
            let part = extract_tree_interactions(&ensemble, &index, &targets)?;
            let fitted = data.iter().map(|(c, _)| ensemble.predict(c)).collect();
            (
                FittedProxy::Tree {
                    model: trained.model,
                    ensemble,
                },
                part,
                fitted,
            )
        }
        ProxyConfig::Linear { order } => {
            let lp = fit_linear_proxy(&data, &interaction_basis(n, *order))?;
            let part = extract_linear_interactions(&lp, &index, &targets)?;
            let fitted = data.iter().map(|(c, _)| lp.predict(c)).collect();
            (FittedProxy::Linear(lp), part, fitted)
        }
    };

    let residual = ResidualGame::new(n, data.iter().zip(&fitted).map(|((c, v), p)| (c.clone(), *v, *p)))?;
    let samples: Vec<Sample> = drawn
        .iter()
        .map(|(c, prob)| {
            Ok(Sample {
                coalition: c.clone(),
                probability: *prob,
                value: residual.value(c)?,
            })
        })
        .collect::<Result<_>>()?;
    let train_mse = if samples.is_empty() {
        0.0
    } else {
        samples
            .iter()
            .map(|s| s.value * s.value)
            .collect::<CompensatedSum>()
            .value()
            / samples.len() as f64
    };

    let mut estimate = InteractionVector::new(index, n);
    let msr_part = if adjusted {
        let msr = msr_estimate(&samples, &index, &targets)?;
        for t in &targets {
            let v = proxy_part.get(t).unwrap_or(0.0) + msr.get(t).unwrap_or(0.0);
            estimate.insert(t.clone(), v, Provenance::ProxyMsr)?;
        }
        Some(msr)
    } else {
        for t in &targets {
            estimate.insert(t.clone(), proxy_part.get(t).unwrap_or(0.0), Provenance::Proxy)?;
        }
        None
    };

    log::debug!("proxy run: {queries} queries, adjusted={adjusted}, train mse {train_mse:e}");
    Ok(ProxyShapRun {
        estimate,
        proxy_part,
        msr_part,
        adjusted,
        queries,
        samples,
        train_mse,
        proxy,
    })
}

/// `Σ (φ̂ − φ)² / Σ φ²`; `0` when both are zero, `+∞` when only the truth is.
pub fn relative_mse(estimate: &InteractionVector, truth: &InteractionVector) -> Result<f64> {
    estimate.check_keys(truth)?;
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for (k, e) in truth.iter() {
        let d = estimate.get(k).expect("keys checked") - e.value;
        num.add(d * d);
        den.add(e.value * e.value);
    }
    let (num, den) = (num.value(), den.value());
    Ok(if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    })
}

/// Ground truth by enumeration when `n ≤ cap`, else by extraction when the
/// game is a tree ensemble. Never approximated.
pub fn ground_truth<G: Game + ?Sized>(
    game: &G,
    index: &IndexSpec,
    targets: &[Coalition],
    cap: usize,
) -> Result<InteractionVector> {
    let n = game.n_players();
    if n <= cap {
        return exact_interactions(game, index, targets, cap);
    }
    match game.as_tree_ensemble() {
        Some(ensemble) => extract_tree_interactions(ensemble, index, targets),
        None => Err(Error::TruthUnavailable(format!(
            "{n} players exceeds the enumeration cap {cap} and the game is not a tree ensemble"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub config: String,
    pub budget: usize,
    pub rep: usize,
    pub relative_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub config: String,
    pub budget: usize,
    pub repetitions: usize,
    pub mean: f64,
    /// Standard error of the mean; zero for a single repetition.
    pub sem: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn summary(&self) -> Vec<SweepSummary> {
        let mut out: Vec<SweepSummary> = Vec::new();
        for row in &self.rows {
            if !out.iter().any(|s| s.config == row.config && s.budget == row.budget) {
                let xs: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.config == row.config && r.budget == row.budget)
                    .map(|r| r.relative_mse)
                    .collect();
                let k = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / k;
                let sem = if xs.len() > 1 {
                    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
                    (var / k).sqrt()
                } else {
                    0.0
                };
                out.push(SweepSummary {
                    config: row.config.clone(),
                    budget: row.budget,
                    repetitions: xs.len(),
                    mean,
                    sem,
                });
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["config", "budget", "rep", "relative_mse"])?;
        for r in &self.rows {
            w.write_record([
                r.config.clone(),
                r.budget.to_string(),
                r.rep.to_string(),
                format!("{}", r.relative_mse),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.summary())?;
        Ok(())
    }
}

/// SplitMix64 finaliser; mixes a run seed with grid coordinates.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut z = seed;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Relative MSE of every `(config, budget, repetition)` against one shared
/// ground truth. Rows come back in grid order regardless of scheduling.
pub fn benchmark_sweep<G: Game + ?Sized>(
    game: &G,
    configs: &[(String, PipelineConfig)],
    budgets: &[usize],
    repetitions: usize,
    seed: u64,
) -> Result<SweepTable> {
    let n = game.n_players();
    let mut truths = Vec::with_capacity(configs.len());
    for (_, cfg) in configs {
        let targets = cfg.targets.resolve(n)?;
        truths.push(ground_truth(game, &cfg.index, &targets, DEFAULT_ENUMERATION_CAP)?);
    }
    let mut grid = Vec::new();
    for ci in 0..configs.len() {
        for (bi, &b) in budgets.iter().enumerate() {
            for rep in 0..repetitions {
                grid.push((ci, bi, b, rep));
            }
        }
    }
    let rows = grid
        .par_iter()
        .map(|&(ci, bi, budget, rep)| {
            let (name, cfg) = &configs[ci];
            let run_seed = derive_seed(seed, &[ci as u64, bi as u64, rep as u64]);
            let cfg = cfg.clone().with_budget(budget).with_seed(run_seed);
            let run = run_proxyshap(game, &cfg)?;
            Ok(SweepRow {
                config: name.clone(),
                budget,
                rep,
                relative_mse: relative_mse(&run.estimate, &truths[ci])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}
