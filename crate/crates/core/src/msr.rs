//! The MSR estimator, residual games, exact variance and `Γ` factors.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::exact::{check_cap, ValueTable};
use crate::game::{Game, GameKind};
use crate::indices::{IndexFamily, IndexSpec};
use crate::interaction::{validate_targets, InteractionVector, Provenance};
use crate::numeric::{binomial, CompensatedSum};
use crate::sampling::SamplingScheme;

/// Default constant in the adjustment rule `m ≥ C·n^{k−1}`.
pub const DEFAULT_ADJUST_CONSTANT: f64 = 10.0;

/// One evaluated sample: coalition, its i.i.d. probability and the game value.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub coalition: Coalition,
    pub probability: f64,
    pub value: f64,
}

/// `ν − ν̂` on the recorded coalitions only.
#[derive(Debug, Clone)]
pub struct ResidualGame {
    n: usize,
    residuals: HashMap<Coalition, f64>,
}

impl ResidualGame {
    /// Records `value − proxy` for each `(coalition, value, proxy)` triple.
    pub fn new<I: IntoIterator<Item = (Coalition, f64, f64)>>(n: usize, records: I) -> Result<Self> {
        let mut residuals = HashMap::new();
        for (c, v, p) in records {
            if c.width() != n {
                return Err(Error::WidthMismatch {
                    expected: n,
                    got: c.width(),
                });
            }
            residuals.insert(c, v - p);
        }
        Ok(Self { n, residuals })
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }
}

impl Game for ResidualGame {
    fn n_players(&self) -> usize {
        self.n
    }
    fn kind(&self) -> GameKind {
        GameKind::Residual
    }
    fn value(&self, coalition: &Coalition) -> Result<f64> {
        self.residuals
            .get(coalition)
            .copied()
            .ok_or_else(|| Error::MissingCoalition(coalition.clone()))
    }
}

fn require_weights(index: &IndexSpec) -> Result<()> {
    if !index.family.has_coalition_weights() {
        return Err(Error::NoCoalitionWeights {
            family: index.family.name(),
        });
    }
    Ok(())
}

/// Single-sample contribution `ν(T)·(−1)^{s−|S∩T|}·p^s_{t−|S∩T|}(n) / P(T)`.
#[inline]
fn term(index: &IndexSpec, n: usize, target: &Coalition, sample: &Sample) -> Result<f64> {
    let s = target.len();
    let inside = target.intersection_len(&sample.coalition);
    let p = index.p_weight(n, s, sample.coalition.len() - inside)?;
    let sign = if (s - inside).is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sample.value * sign * p / sample.probability)
}

/// `φ̂_S = (1/|T|)·Σ_{T} ν(T)·(−1)^{s−|S∩T|}·p^s_{t−|S∩T|}(n) / P(T)`.
pub fn msr_estimate(samples: &[Sample], index: &IndexSpec, targets: &[Coalition]) -> Result<InteractionVector> {
    require_weights(index)?;
    let n = match (samples.first(), targets.first()) {
        (Some(s), _) => s.coalition.width(),
        (None, Some(t)) => t.width(),
        (None, None) => 0,
    };
    validate_targets(index, n, targets)?;
    for s in samples {
        if s.coalition.width() != n {
            return Err(Error::WidthMismatch {
                expected: n,
                got: s.coalition.width(),
            });
        }
        if s.probability.is_nan() || s.probability <= 0.0 {
            return Err(Error::ZeroProbability(s.probability));
        }
    }
    let m = samples.len();
    let values: Vec<f64> = targets
        .par_iter()
        .map(|target| {
            if m == 0 {
                return Ok(0.0);
            }
            let mut acc = CompensatedSum::new();
            for s in samples {
                acc.add(term(index, n, target, s)?);
            }
            Ok(acc.value() / m as f64)
        })
        .collect::<Result<_>>()?;
    let mut out = InteractionVector::new(*index, n);
    for (t, v) in targets.iter().zip(values) {
        out.insert(t.clone(), v, Provenance::MsrOnly)?;
    }
    Ok(out)
}

/// Probability model for the variance machinery. Proportional sampling is
/// the target-specific design `P(T) = p^s_{|T∖S|}(n)/2^s`.
fn unit_probability(scheme: &SamplingScheme, n: usize, target: &Coalition, t: &Coalition) -> Result<f64> {
    match scheme {
        SamplingScheme::Proportional { index, .. } => {
            let s = target.len();
            let outside = t.len() - target.intersection_len(t);
            Ok(index.p_weight(n, s, outside)?.abs() * 0.5f64.powi(s as i32))
        }
        other => other.probability(n, t),
    }
}

/// `Σ_T ν(T)²·(p^s_{t−|S∩T|})² / P(T) − φ_S²`, the variance of a single-sample
/// estimate (divide by the sample count for `|T| > 1`).
pub fn variance_exact<G: Game + ?Sized>(
    game: &G,
    index: &IndexSpec,
    target: &Coalition,
    scheme: &SamplingScheme,
    cap: usize,
) -> Result<f64> {
    require_weights(index)?;
    let n = game.n_players();
    check_cap(n, cap)?;
    validate_targets(index, n, std::slice::from_ref(target))?;
    let table = ValueTable::from_game(game, cap)?;
    let mask = target.to_mask().expect("n within cap");
    let phi = table.interaction_by_derivatives(index, mask)?;
    let second = second_moment(index, n, target, scheme, |m| table.get(m))?;
    Ok(second - phi * phi)
}

fn second_moment(
    index: &IndexSpec,
    n: usize,
    target: &Coalition,
    scheme: &SamplingScheme,
    value: impl Fn(u64) -> f64 + Sync,
) -> Result<f64> {
    let s = target.len();
    const CHUNK: u64 = 4096;
    let total = 1u64 << n;
    let parts: Vec<f64> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = CompensatedSum::new();
            for m in chunk * CHUNK..((chunk + 1) * CHUNK).min(total) {
                let t = Coalition::from_mask(n, m);
                let inside = target.intersection_len(&t);
                let p = index.p_weight(n, s, t.len() - inside)?;
                if p == 0.0 {
                    continue;
                }
                let prob = unit_probability(scheme, n, target, &t)?;
                if prob.is_nan() || prob <= 0.0 {
                    return Err(Error::ZeroProbability(prob));
                }
                let v = value(m);
                acc.add(v * v * p * p / prob);
            }
            Ok(acc.value())
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().collect::<CompensatedSum>().value())
}

/// `Γ_S(P) = Σ_T (p^s_{t−|S∩T|})² / P(T)` by enumerating every coalition.
pub fn gamma_brute(index: &IndexSpec, n: usize, s: usize, scheme: &SamplingScheme, cap: usize) -> Result<f64> {
    require_weights(index)?;
    check_cap(n, cap)?;
    if s == 0 || s > n {
        return Err(Error::Precondition(format!("order {s} outside 1..={n}")));
    }
    let target = Coalition::from_players(n, 0..s);
    second_moment(index, n, &target, scheme, |_| 1.0)
}

/// `Γ_S` grouped by `(|T|, |S∩T|)`; exact for any `n`.
pub fn gamma_by_sizes(index: &IndexSpec, n: usize, s: usize, scheme: &SamplingScheme) -> Result<f64> {
    require_weights(index)?;
    if s == 0 || s > n {
        return Err(Error::Precondition(format!("order {s} outside 1..={n}")));
    }
    let target = Coalition::from_players(n, 0..s);
    let mut acc = CompensatedSum::new();
    for r in 0..=s {
        for o in 0..=n - s {
            let p = index.p_weight(n, s, o)?;
            if p == 0.0 {
                continue;
            }
            let rep = Coalition::from_players(n, (0..r).chain(s..s + o));
            let prob = unit_probability(scheme, n, &target, &rep)?;
            if prob.is_nan() || prob <= 0.0 {
                return Err(Error::ZeroProbability(prob));
            }
            acc.add(binomial(s as u64, r as u64) * binomial((n - s) as u64, o as u64) * p * p / prob);
        }
    }
    Ok(acc.value())
}

/// Closed forms of `Γ_S` where known.
pub fn gamma_closed(index: &IndexSpec, n: usize, s: usize, scheme: &SamplingScheme) -> Option<f64> {
    if s == 0 || s > n {
        return None;
    }
    match (scheme, index.family) {
        (SamplingScheme::Proportional { .. }, f) if f.has_coalition_weights() => Some(4f64.powi(s as i32)),
        (SamplingScheme::Leverage, IndexFamily::Bv | IndexFamily::Bii) if index.banzhaf_w == 0.5 => {
            Some((n + 1) as f64 * binomial(2 * n as u64, n as u64) / 4f64.powi((n - s) as i32))
        }
        (SamplingScheme::Leverage, IndexFamily::Sv | IndexFamily::Sii) if s == 1 => {
            let h: f64 = (1..=n).map(|i| 1.0 / i as f64).sum();
            Some(2.0 * (n + 1) as f64 * h / n as f64)
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaReport {
    pub brute: Option<f64>,
    pub closed: Option<f64>,
}

/// Brute `Γ` when `n ≤ cap` together with the closed form when one exists.
pub fn gamma_factor(index: &IndexSpec, n: usize, s: usize, scheme: &SamplingScheme, cap: usize) -> Result<GammaReport> {
    let closed = gamma_closed(index, n, s, scheme);
    let brute = match gamma_brute(index, n, s, scheme, cap) {
        Ok(v) => Some(v),
        Err(Error::Capacity { .. }) if closed.is_some() => None,
        Err(e) => return Err(e),
    };
    Ok(GammaReport { brute, closed })
}

/// Whether MSR adjustment is worthwhile: `n < 30` or `m ≥ C·n^{k−1}`.
pub fn should_adjust(n: usize, k: usize, budget: usize) -> bool {
    should_adjust_with(n, k, budget, DEFAULT_ADJUST_CONSTANT)
}

pub fn should_adjust_with(n: usize, k: usize, budget: usize, constant: f64) -> bool {
    n < 30 || budget as f64 >= constant * (n as f64).powi(k.saturating_sub(1) as i32)
}
