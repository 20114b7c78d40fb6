//! Coalition samplers with known per-coalition probabilities.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::indices::IndexSpec;
use crate::numeric::{binomial, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SamplingScheme {
    /// Size uniform on `0..=n`, then a uniform subset of that size.
    Leverage,
    /// Sizes weighted by the `p^s` mass of a random order-`s` target.
    Proportional { index: IndexSpec, order: usize },
    /// Every coalition with probability `2^-n`.
    Uniform,
}

impl SamplingScheme {
    pub fn name(&self) -> &'static str {
        match self {
            SamplingScheme::Leverage => "leverage",
            SamplingScheme::Proportional { .. } => "proportional",
            SamplingScheme::Uniform => "uniform",
        }
    }

    /// Probability of drawing a coalition of size `t` in one i.i.d. draw,
    /// summed over all coalitions of that size.
    pub fn size_mass(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            SamplingScheme::Leverage => Ok(vec![1.0 / (n + 1) as f64; n + 1]),
            SamplingScheme::Uniform => Ok((0..=n)
                .map(|t| binomial(n as u64, t as u64) * 0.5f64.powi(n as i32))
                .collect()),
            SamplingScheme::Proportional { index, order } => proportional_size_mass(index, n, *order),
        }
    }

    /// Probability of drawing exactly `coalition` in one i.i.d. draw.
    pub fn probability(&self, n: usize, coalition: &Coalition) -> Result<f64> {
        let t = coalition.len();
        Ok(match self {
            SamplingScheme::Leverage => 1.0 / ((n + 1) as f64 * binomial(n as u64, t as u64)),
            SamplingScheme::Uniform => 0.5f64.powi(n as i32),
            SamplingScheme::Proportional { .. } => self.size_mass(n)?[t] / binomial(n as u64, t as u64),
        })
    }
}

/// `P(|T| = t) = Σ_r C(s,r)·C(n−s,t−r)·p^s_{t−r}(n) / 2^s`.
///
/// For a fixed target `S` the proportional design draws `T` with probability
/// `p^s_{|T∖S|}(n)/2^s`; averaging over the placement of `S` keeps the size
/// marginal and makes the design uniform within sizes.
fn proportional_size_mass(index: &IndexSpec, n: usize, s: usize) -> Result<Vec<f64>> {
    index.validate()?;
    if s == 0 || s > n {
        return Err(Error::Precondition(format!(
            "proportional order must lie in 1..={n}, got {s}"
        )));
    }
    let mut mass = vec![0.0; n + 1];
    for (t, slot) in mass.iter_mut().enumerate() {
        let mut acc = CompensatedSum::new();
        for r in t.saturating_sub(n - s)..=t.min(s) {
            let p = index.p_weight(n, s, t - r)?;
            if p < 0.0 {
                return Err(Error::Precondition(format!(
                    "{} weights are not a distribution",
                    index.family
                )));
            }
            acc.add(binomial(s as u64, r as u64) * binomial((n - s) as u64, (t - r) as u64) * p);
        }
        *slot = acc.value() * 0.5f64.powi(s as i32);
    }
    Ok(mass)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub scheme: SamplingScheme,
    pub budget: usize,
    #[serde(default = "yes")]
    pub without_replacement: bool,
    #[serde(default = "yes")]
    pub include_borders: bool,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl SamplerConfig {
    pub fn new(scheme: SamplingScheme, budget: usize, seed: u64) -> Self {
        Self {
            scheme,
            budget,
            without_replacement: true,
            include_borders: true,
            seed,
        }
    }

    pub fn with_replacement(mut self) -> Self {
        self.without_replacement = false;
        self
    }

    pub fn without_borders(mut self) -> Self {
        self.include_borders = false;
        self
    }
}

/// Draws the evaluation set. Every returned probability is the i.i.d.
/// probability of the scheme, also when duplicates were rejected.
pub fn sample(config: &SamplerConfig, n: usize) -> Result<Vec<(Coalition, f64)>> {
    let m = config.budget;
    if config.without_replacement {
        let available: u128 = if n >= 127 { u128::MAX } else { 1u128 << n };
        if m as u128 > available {
            return Err(Error::Budget {
                budget: m as u128,
                available,
            });
        }
    }
    if config.include_borders && m < 2 && m != 0 {
        return Err(Error::Precondition(
            "border coalitions need a budget of at least 2".into(),
        ));
    }
    let scheme = &config.scheme;
    let sizes = scheme.size_mass(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out: Vec<Coalition> = Vec::with_capacity(m);
    let mut seen: HashSet<Coalition> = HashSet::new();

    if config.include_borders && m >= 2 {
        for c in [Coalition::empty(n), Coalition::full(n)] {
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
    }

    let remaining = m - out.len();
    if config.without_replacement && n <= 20 && 2 * m as u64 > 1u64 << n {
        // Rejection would stall near exhaustion. Exponential keys give the
        // same law as discarding repeated i.i.d. draws.
        let mut keyed: Vec<(f64, u64)> = Vec::with_capacity(1 << n);
        for mask in 0..(1u64 << n) {
            let c = Coalition::from_mask(n, mask);
            if seen.contains(&c) {
                continue;
            }
            let p = scheme.probability(n, &c)?;
            if p > 0.0 {
                let u: f64 = rng.gen::<f64>();
                keyed.push((u.ln() / p, mask));
            }
        }
        if keyed.len() < remaining {
            return Err(Error::Budget {
                budget: m as u128,
                available: (keyed.len() + out.len()) as u128,
            });
        }
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        out.extend(
            keyed
                .into_iter()
                .take(remaining)
                .map(|(_, mask)| Coalition::from_mask(n, mask)),
        );
    } else {
        let size_dist = WeightedIndex::new(&sizes)
            .map_err(|e| Error::Precondition(format!("degenerate size distribution: {e}")))?;
        while out.len() < m {
            let c = draw(n, scheme, &size_dist, &mut rng);
            if config.without_replacement && !seen.insert(c.clone()) {
                continue;
            }
            out.push(c);
        }
    }

    out.into_iter()
        .map(|c| {
            let p = scheme.probability(n, &c)?;
            Ok((c, p))
        })
        .collect()
}

fn draw<R: Rng>(n: usize, scheme: &SamplingScheme, sizes: &WeightedIndex<f64>, rng: &mut R) -> Coalition {
    match scheme {
        SamplingScheme::Uniform => {
            let mut c = Coalition::empty(n);
            for i in 0..n {
                if rng.gen::<bool>() {
                    c.insert(i);
                }
            }
            c
        }
        _ => {
            let t = sizes.sample(rng);
            Coalition::from_players(n, sample_indices(rng, n, t))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indices::IndexFamily;

    #[test]
    fn leverage_probabilities() {
        let s = SamplingScheme::Leverage;
        assert_eq!(s.probability(3, &Coalition::empty(3)).unwrap(), 0.25);
        let p = s.probability(3, &Coalition::from_players(3, [0])).unwrap();
        assert!((p - 1.0 / 12.0).abs() < 1e-16);
    }

    #[test]
    fn uniform_probabilities() {
        for mask in 0..4 {
            assert_eq!(
                SamplingScheme::Uniform
                    .probability(2, &Coalition::from_mask(2, mask))
                    .unwrap(),
                0.25
            );
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let n = 7;
        let schemes = [
            SamplingScheme::Leverage,
            SamplingScheme::Uniform,
            SamplingScheme::Proportional {
                index: IndexSpec::new(IndexFamily::Sii, 3),
                order: 2,
            },
            SamplingScheme::Proportional {
                index: IndexSpec::new(IndexFamily::Bii, 3),
                order: 3,
            },
        ];
        for s in schemes {
            let total: f64 = (0..1u64 << n)
                .map(|m| s.probability(n, &Coalition::from_mask(n, m)).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "{s:?}: {total}");
        }
    }

    #[test]
    fn exhaustion_gives_power_set() {
        let n = 5;
        for scheme in [SamplingScheme::Leverage, SamplingScheme::Uniform] {
            let cfg = SamplerConfig::new(scheme, 32, 3);
            let got = sample(&cfg, n).unwrap();
            let set: HashSet<_> = got.iter().map(|(c, _)| c.clone()).collect();
            assert_eq!(set.len(), 32);
        }
    }

    #[test]
    fn borders_first_and_distinct() {
        let cfg = SamplerConfig::new(SamplingScheme::Leverage, 40, 9);
        let got = sample(&cfg, 10).unwrap();
        assert_eq!(got.len(), 40);
        assert!(got[0].0.is_empty());
        assert_eq!(got[1].0.len(), 10);
        let set: HashSet<_> = got.iter().map(|(c, _)| c.clone()).collect();
        assert_eq!(set.len(), 40);
    }

    #[test]
    fn budget_errors() {
        let cfg = SamplerConfig::new(SamplingScheme::Leverage, 9, 0);
        assert!(matches!(sample(&cfg, 3), Err(Error::Budget { .. })));
        let cfg = SamplerConfig::new(SamplingScheme::Leverage, 9, 0).with_replacement();
        assert_eq!(sample(&cfg, 3).unwrap().len(), 9);
        let cfg = SamplerConfig::new(SamplingScheme::Leverage, 1, 0);
        assert!(sample(&cfg, 3).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SamplerConfig::new(SamplingScheme::Leverage, 100, 42);
        assert_eq!(sample(&cfg, 12).unwrap(), sample(&cfg, 12).unwrap());
        let other = SamplerConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(sample(&cfg, 12).unwrap(), sample(&other, 12).unwrap());
    }

    #[test]
    fn leverage_size_frequencies() {
        let n = 8;
        let draws = 100_000;
        let cfg = SamplerConfig::new(SamplingScheme::Leverage, draws, 5)
            .with_replacement()
            .without_borders();
        let mut counts = vec![0usize; n + 1];
        for (c, _) in sample(&cfg, n).unwrap() {
            counts[c.len()] += 1;
        }
        let p = 1.0 / (n + 1) as f64;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sd, "{c}");
        }
    }
}
