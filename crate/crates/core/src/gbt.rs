//! Gradient-boosted regression trees on binary coalition features.
//!
//! Squared-error boosting: each round fits a depth-limited tree to the
//! current residuals by greedy split search, with L2-penalised leaf values
//! `Σ residual / (count + λ)` shrunk by the learning rate. A split on feature
//! `j` sends rows whose coalition contains `j` to the right.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::trees::{Node, NodeEnsemble, NodeTree, TreeEnsemble};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub reg_lambda: f64,
    /// Minimum number of training rows in each child of a split.
    pub min_child_weight: f64,
    /// Fraction of rows drawn (without replacement) per tree.
    pub subsample: f64,
    /// Fraction of features drawn (without replacement) per tree.
    pub colsample: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self::default_preset()
    }
}

impl GbtConfig {
    /// 100 trees, depth 6, learning rate 0.3, λ = 1.
    pub fn default_preset() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 6,
            learning_rate: 0.3,
            reg_lambda: 1.0,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            seed: 0,
        }
    }

    /// Many shallow trees: 2000 trees, depth 3, learning rate 0.05, λ = 5.
    /// Sampling fractions and `min_child_weight` keep the trainer defaults.
    pub fn hpo_informed() -> Self {
        Self {
            n_estimators: 2000,
            max_depth: 3,
            learning_rate: 0.05,
            reg_lambda: 5.0,
            ..Self::default_preset()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default_preset()),
            "hpo-informed" | "hpo" => Ok(Self::hpo_informed()),
            other => Err(Error::Parse(format!("unknown proxy preset {other:?}"))),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Precondition(format!("invalid boosting config: {what}")));
        if self.n_estimators == 0 {
            return bad("n_estimators must be >= 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.reg_lambda.is_nan() || self.reg_lambda < 0.0 {
            return bad("reg_lambda must be >= 0");
        }
        if self.min_child_weight.is_nan() || self.min_child_weight < 0.0 {
            return bad("min_child_weight must be >= 0");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) || !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return bad("sampling fractions must lie in (0, 1]");
        }
        Ok(())
    }
}

/// A trained model and its training MSE after each round.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: NodeEnsemble,
    pub train_mse: Vec<f64>,
}

/// Trains and flattens in one step.
pub fn fit_gbt(data: &[(Coalition, f64)], config: &GbtConfig) -> Result<TreeEnsemble> {
    let trained = train(data, config)?;
    Ok(trained.model.flatten()?.0)
}

pub fn train(data: &[(Coalition, f64)], config: &GbtConfig) -> Result<TrainedModel> {
    config.validate()?;
    let Some((first, _)) = data.first() else {
        return Err(Error::Precondition("training data is empty".into()));
    };
    let n = first.width();
    if let Some((c, _)) = data.iter().find(|(c, _)| c.width() != n) {
        return Err(Error::WidthMismatch {
            expected: n,
            got: c.width(),
        });
    }
    let rows: Vec<Vec<usize>> = data.iter().map(|(c, _)| c.players().collect()).collect();
    let targets: Vec<f64> = data.iter().map(|&(_, y)| y).collect();
    let m = data.len();
    let base_score = targets.iter().copied().collect::<CompensatedSum>().value() / m as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pred = vec![base_score; m];
    let mut trees = Vec::with_capacity(config.n_estimators);
    let mut train_mse = Vec::with_capacity(config.n_estimators);

    let n_rows = ((config.subsample * m as f64).round() as usize).clamp(1, m);
    let n_cols = ((config.colsample * n as f64).round() as usize).clamp(1, n.max(1));

    for _ in 0..config.n_estimators {
        let residual: Vec<f64> = targets.iter().zip(&pred).map(|(y, p)| y - p).collect();
        let mut sampled: Vec<usize> = if n_rows < m {
            sample(&mut rng, m, n_rows).into_vec()
        } else {
            (0..m).collect()
        };
        sampled.sort_unstable();
        let mut features: Vec<bool> = vec![n_cols >= n; n];
        if n_cols < n {
            for j in sample(&mut rng, n, n_cols).iter() {
                features[j] = true;
            }
        }

        let mut builder = TreeBuilder {
            rows: &rows,
            residual: &residual,
            features: &features,
            config,
            nodes: Vec::new(),
        };
        builder.grow(sampled, 0);
        let tree = NodeTree { nodes: builder.nodes };

        for (i, (c, _)) in data.iter().enumerate() {
            pred[i] += tree.predict_coalition(c);
        }
        let sse: CompensatedSum = targets.iter().zip(&pred).map(|(y, p)| (y - p) * (y - p)).collect();
        train_mse.push(sse.value() / m as f64);
        trees.push(tree);
    }

    Ok(TrainedModel {
        model: NodeEnsemble { n, base_score, trees },
        train_mse,
    })
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<usize>],
    residual: &'a [f64],
    features: &'a [bool],
    config: &'a GbtConfig,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    gain: f64,
}

impl TreeBuilder<'_> {
    /// Grows the subtree for `members` and returns its node index.
    fn grow(&mut self, members: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { leaf: 0.0 });
        let total: CompensatedSum = members.iter().map(|&i| self.residual[i]).collect();
        let total = total.value();
        let count = members.len() as f64;

        let split = if depth < self.config.max_depth {
            self.best_split(&members, total)
        } else {
            None
        };
        match split {
            None => {
                let leaf = self.config.learning_rate * total / (count + self.config.reg_lambda);
                self.nodes[at] = Node::Leaf {
                    leaf: if leaf.is_finite() { leaf } else { 0.0 },
                };
            }
            Some(Split { feature, .. }) => {
                let (right, left): (Vec<usize>, Vec<usize>) = members
                    .into_iter()
                    .partition(|&i| self.rows[i].binary_search(&feature).is_ok());
                let l = self.grow(left, depth + 1);
                let r = self.grow(right, depth + 1);
                self.nodes[at] = Node::Split {
                    feature,
                    left: l,
                    right: r,
                    threshold: None,
                };
            }
        }
        at
    }

    fn best_split(&self, members: &[usize], total: f64) -> Option<Split> {
        let n = self.features.len();
        let lambda = self.config.reg_lambda;
        let mcw = self.config.min_child_weight;
        let mut sum_right = vec![CompensatedSum::new(); n];
        let mut count_right = vec![0usize; n];
        let mut sum_sq = CompensatedSum::new();
        for &i in members {
            let g = self.residual[i];
            sum_sq.add(g * g);
            for &j in &self.rows[i] {
                sum_right[j].add(g);
                count_right[j] += 1;
            }
        }
        let count = members.len() as f64;
        let score = |g: f64, h: f64| if h + lambda > 0.0 { g * g / (h + lambda) } else { 0.0 };
        let parent = score(total, count);
        // splits that only shuffle rounding noise are not worth a node
        let min_gain = 1e-12 * sum_sq.value().max(f64::MIN_POSITIVE);

        let mut best: Option<Split> = None;
        for j in (0..n).filter(|&j| self.features[j]) {
            let h_right = count_right[j] as f64;
            let h_left = count - h_right;
            if h_right == 0.0 || h_left == 0.0 || h_right < mcw || h_left < mcw {
                continue;
            }
            let g_right = sum_right[j].value();
            let g_left = total - g_right;
            let gain = score(g_left, h_left) + score(g_right, h_right) - parent;
            if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Split { feature: j, gain });
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_table(n: usize, f: impl Fn(&Coalition) -> f64) -> Vec<(Coalition, f64)> {
        (0..1u64 << n)
            .map(|m| {
                let c = Coalition::from_mask(n, m);
                let y = f(&c);
                (c, y)
            })
            .collect()
    }

    #[test]
    fn constant_targets() {
        let data = full_table(4, |_| 2.5);
        let e = fit_gbt(&data, &GbtConfig::default_preset()).unwrap();
        assert_eq!(e.base_score, 2.5);
        for (c, _) in &data {
            assert!((e.predict(c) - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn single_split_exact_fit() {
        let data = full_table(3, |c| if c.contains(0) { 1.0 } else { 0.0 });
        let cfg = GbtConfig {
            n_estimators: 1,
            max_depth: 1,
            learning_rate: 1.0,
            reg_lambda: 0.0,
            ..GbtConfig::default_preset()
        };
        let trained = train(&data, &cfg).unwrap();
        assert_eq!(trained.train_mse, vec![0.0]);
        match &trained.model.trees[0].nodes[0] {
            Node::Split { feature, .. } => assert_eq!(*feature, 0),
            other => panic!("expected a split, got {other:?}"),
        }
    }

    #[test]
    fn seeded_runs_identical() {
        let data = full_table(6, |c| c.players().map(|p| (p * p) as f64).sum::<f64>().sin());
        let cfg = GbtConfig {
            n_estimators: 20,
            subsample: 0.7,
            colsample: 0.5,
            seed: 42,
            ..GbtConfig::default_preset()
        };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.train_mse, b.train_mse);
    }

    #[test]
    fn loss_non_increasing_without_sampling() {
        let data = full_table(7, |c| {
            let x = c.len() as f64;
            x * x - if c.contains(2) && c.contains(5) { 3.0 } else { 0.0 }
        });
        let trained = train(&data, &GbtConfig::default_preset().with_seed(3)).unwrap();
        for w in trained.train_mse.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "{w:?}");
        }
    }

    #[test]
    fn min_child_weight_respected() {
        let data = full_table(6, |c| c.players().map(|p| p as f64).product::<f64>());
        let cfg = GbtConfig {
            n_estimators: 5,
            min_child_weight: 9.0,
            ..GbtConfig::default_preset()
        };
        let trained = train(&data, &cfg).unwrap();
        let (flat, _) = trained.model.flatten().unwrap();
        for tree in &flat.trees {
            for leaf in &tree.leaves {
                let covered = data.iter().filter(|(c, _)| leaf.reaches(c)).count();
                assert!(covered >= 9, "leaf covers {covered}");
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(train(&[], &GbtConfig::default_preset()).is_err());
        let same = vec![(Coalition::from_mask(3, 5), 1.0), (Coalition::from_mask(3, 5), 3.0)];
        let e = fit_gbt(&same, &GbtConfig::default_preset()).unwrap();
        assert_eq!(e.base_score, 2.0);
        assert!(GbtConfig {
            learning_rate: 0.0,
            ..GbtConfig::default_preset()
        }
        .validate()
        .is_err());
        assert!(GbtConfig::preset("nope").is_err());
        assert_eq!(GbtConfig::preset("hpo-informed").unwrap().n_estimators, 2000);
    }
}
