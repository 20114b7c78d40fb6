//! Exact interactions of tree ensembles and linear proxies.
//!
//! A leaf with path sets `(L, R)` and value `c` is the game
//! `c·1[R ⊆ T ⊆ N∖L]`. Its interaction at a target `S ⊆ L ∪ R` depends only
//! on `(|L|, |R|, |S∩L|, |S|)` through the weight
//!
//! `λ(ℓ, r, u, s) = Σ_{i=0}^{ℓ−u} (−1)^{i+u} C(ℓ−u, i) q_{i+u+r}^s(n)`,
//!
//! and vanishes for targets outside `L ∪ R`. Summing `c·λ` over the leaves of
//! all trees gives the ensemble's index exactly, in time linear in the
//! number of leaves per target.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::coalition::{subsets_up_to_order, Coalition};
use crate::error::{Error, Result};
use crate::indices::{IndexFamily, IndexSpec};
use crate::interaction::{validate_targets, InteractionVector, Provenance};
use crate::numeric::{beta, binomial, binomial_ratio, sign, CompensatedSum};
use crate::trees::TreeEnsemble;

/// Sizes describing one (leaf, target) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LambdaKey {
    /// `|L_j|`
    pub ell: usize,
    /// `|R_j|`
    pub r: usize,
    /// `|S ∩ L_j|`
    pub u: usize,
    /// `|S|`
    pub s: usize,
}

impl LambdaKey {
    pub fn new(ell: usize, r: usize, u: usize, s: usize) -> Self {
        Self { ell, r, u, s }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.u > self.ell.min(self.s) || self.s == 0 || self.ell + self.r > n {
            return Err(Error::Precondition(format!("invalid lambda key {self:?} for n={n}")));
        }
        Ok(())
    }

    /// `S ∖ L ⊆ R` is impossible when more target players than `r` remain.
    fn contributes(&self) -> bool {
        self.s - self.u <= self.r
    }
}

/// The defining alternating sum over Möbius weights.
pub fn lambda_general(index: &IndexSpec, n: usize, key: LambdaKey) -> Result<f64> {
    key.check(n)?;
    if !key.contributes() {
        return Ok(0.0);
    }
    let m = key.ell - key.u;
    let mut acc = CompensatedSum::new();
    for i in 0..=m {
        let q = index.q_weight(n, key.s, i + key.u + key.r)?;
        acc.add(sign(i + key.u) * binomial(m as u64, i as u64) * q);
    }
    Ok(acc.value())
}

/// Closed forms of the alternating sum per family.
///
/// For the Shapley row the sum collapses to a Beta function,
/// `(−1)^u / ((a+b+1)·C(a+b, a))` with `a = r − |R∩S|` and `b = ℓ − u`.
pub fn lambda_closed(index: &IndexSpec, n: usize, key: LambdaKey) -> Result<f64> {
    key.check(n)?;
    if !key.contributes() {
        return Ok(0.0);
    }
    let LambdaKey { ell, r, u, s } = key;
    let m = ell - u;
    let su = sign(u);
    Ok(match index.family {
        IndexFamily::Moebius => {
            if u + r == s {
                su
            } else {
                0.0
            }
        }
        IndexFamily::Sv | IndexFamily::Sii => {
            let a = r + u - s;
            su / ((a + m + 1) as f64 * binomial((a + m) as u64, a as u64))
        }
        IndexFamily::Bv | IndexFamily::Bii => {
            let w = index.banzhaf_w;
            if w == 0.5 {
                su * 0.5f64.powi((ell + r - s) as i32)
            } else {
                su * w.powi((u + r - s) as i32) * (1.0 - w).powi(m as i32)
            }
        }
        IndexFamily::Chii => s as f64 * su * beta((u + r) as f64, (m + 1) as f64),
        IndexFamily::Fbii | IndexFamily::Fsii => faithful_closed(index, key)?,
    })
}

fn faithful_closed(index: &IndexSpec, key: LambdaKey) -> Result<f64> {
    let LambdaKey { ell, r, u, s } = key;
    let k = index.max_order;
    if s > k {
        return Err(Error::InvalidIndex(format!(
            "{} target of order {s} exceeds max order {k}",
            index.family
        )));
    }
    let m = ell - u;
    let mut acc = CompensatedSum::new();
    // Möbius part: R ⊆ S
    if r + u == s {
        acc.add(sign(u));
    }
    let lead = match index.family {
        IndexFamily::Fsii => s as f64 / (k + s) as f64 * binomial(k as u64, s as u64),
        _ => 1.0,
    };
    let start = (k + 1).saturating_sub(r + u);
    for i in start..=m {
        let t = r + i + u;
        let tail = match index.family {
            IndexFamily::Fbii => 0.5f64.powi((t - s) as i32) * binomial((t - s - 1) as u64, (k - s) as u64),
            _ => lead * binomial_ratio((t - 1) as u64, k as u64, (t + k - 1) as u64, (k + s) as u64),
        };
        acc.add(sign(u + i + k - s) * binomial(m as u64, i as u64) * tail);
    }
    Ok(acc.value())
}

/// The Shapley closed form exactly as it is commonly printed,
/// `(−1)^u / ((a+b)·C(a+b, a))`. Undefined (`None`) when `a + b = 0`.
/// Kept only so tests can show which variant matches the alternating sum.
pub fn shapley_lambda_printed(key: LambdaKey) -> Option<f64> {
    if !key.contributes() {
        return Some(0.0);
    }
    let a = key.r + key.u - key.s;
    let b = key.ell - key.u;
    if a + b == 0 {
        return None;
    }
    Some(sign(key.u) / ((a + b) as f64 * binomial((a + b) as u64, a as u64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaMethod {
    #[default]
    Closed,
    General,
}

impl std::str::FromStr for LambdaMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(LambdaMethod::Closed),
            "general" => Ok(LambdaMethod::General),
            other => Err(Error::Parse(format!("unknown lambda method {other:?}"))),
        }
    }
}

/// Dense, pre-populated `λ` values for every key up to the given bounds.
/// Read-only after construction, so it is shared freely across threads.
#[derive(Debug, Clone)]
pub struct LambdaTable {
    max_ell: usize,
    max_r: usize,
    max_s: usize,
    values: Vec<f64>,
}

impl LambdaTable {
    pub fn build(
        index: &IndexSpec,
        n: usize,
        max_ell: usize,
        max_r: usize,
        max_s: usize,
        method: LambdaMethod,
    ) -> Result<Self> {
        let mut t = Self {
            max_ell,
            max_r,
            max_s,
            values: vec![0.0; (max_ell + 1) * (max_r + 1) * (max_s + 1) * (max_s + 1)],
        };
        for ell in 0..=max_ell {
            for r in 0..=max_r {
                if ell + r > n {
                    continue;
                }
                for s in 1..=max_s {
                    for u in 0..=ell.min(s) {
                        let key = LambdaKey::new(ell, r, u, s);
                        let v = match method {
                            LambdaMethod::Closed => lambda_closed(index, n, key)?,
                            LambdaMethod::General => lambda_general(index, n, key)?,
                        };
                        let slot = t.slot(key);
                        t.values[slot] = v;
                    }
                }
            }
        }
        Ok(t)
    }

    #[inline]
    fn slot(&self, k: LambdaKey) -> usize {
        ((k.ell * (self.max_r + 1) + k.r) * (self.max_s + 1) + k.s) * (self.max_s + 1) + k.u
    }

    #[inline]
    pub fn get(&self, key: LambdaKey) -> f64 {
        debug_assert!(key.ell <= self.max_ell && key.r <= self.max_r && key.s <= self.max_s);
        self.values[self.slot(key)]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractionStats {
    /// Leaves examined, summed over targets.
    pub leaves_visited: u64,
    /// Leaves whose path covered the target and contributed.
    pub contributions: u64,
    pub elapsed: Duration,
}

/// Extracts interactions of `ensemble` for every target using closed-form `λ`.
pub fn extract_tree_interactions(
    ensemble: &TreeEnsemble,
    index: &IndexSpec,
    targets: &[Coalition],
) -> Result<InteractionVector> {
    Ok(extract_tree_interactions_with(ensemble, index, targets, LambdaMethod::Closed)?.0)
}

pub fn extract_tree_interactions_with(
    ensemble: &TreeEnsemble,
    index: &IndexSpec,
    targets: &[Coalition],
    method: LambdaMethod,
) -> Result<(InteractionVector, ExtractionStats)> {
    let start = Instant::now();
    let n = ensemble.n;
    validate_targets(index, n, targets)?;

    struct PathSizes {
        ell: usize,
        r: usize,
    }
    let sizes: Vec<Vec<PathSizes>> = ensemble
        .trees
        .iter()
        .map(|t| {
            t.leaves
                .iter()
                .map(|l| PathSizes {
                    ell: l.left.len(),
                    r: l.right.len(),
                })
                .collect()
        })
        .collect();
    let max_ell = sizes.iter().flatten().map(|p| p.ell).max().unwrap_or(0);
    let max_r = sizes.iter().flatten().map(|p| p.r).max().unwrap_or(0);
    let max_s = targets.iter().map(Coalition::len).max().unwrap_or(1);
    let table = LambdaTable::build(index, n, max_ell, max_r, max_s, method)?;

    let per_target: Vec<(f64, u64)> = targets
        .par_iter()
        .map(|target| {
            let s = target.len();
            let mut acc = CompensatedSum::new();
            let mut hits = 0u64;
            for (tree, tree_sizes) in ensemble.trees.iter().zip(&sizes) {
                for (leaf, p) in tree.leaves.iter().zip(tree_sizes) {
                    if p.ell + p.r < s || !target.is_subset_of_union(&leaf.left, &leaf.right) {
                        continue;
                    }
                    let u = target.intersection_len(&leaf.left);
                    acc.add(leaf.value * table.get(LambdaKey::new(p.ell, p.r, u, s)));
                    hits += 1;
                }
            }
            (acc.value(), hits)
        })
        .collect();

    let mut out = InteractionVector::new(*index, n);
    let mut stats = ExtractionStats::default();
    let leaves = ensemble.leaf_count() as u64;
    for (target, (value, hits)) in targets.iter().zip(per_target) {
        out.insert(target.clone(), value, Provenance::Exact)?;
        stats.leaves_visited += leaves;
        stats.contributions += hits;
    }
    stats.elapsed = start.elapsed();
    Ok((out, stats))
}

/// `ν̂(T) = Σ_{S ∈ basis} β_S·1[S ⊆ T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProxy {
    pub n: usize,
    pub basis: Vec<Coalition>,
    pub beta: Vec<f64>,
}

impl LinearProxy {
    pub fn predict(&self, coalition: &Coalition) -> f64 {
        self.basis
            .iter()
            .zip(&self.beta)
            .filter(|(s, _)| s.is_subset(coalition))
            .map(|(_, &b)| b)
            .collect::<CompensatedSum>()
            .value()
    }
}

/// The empty set plus all coalitions of sizes `1..=max_order`.
pub fn interaction_basis(n: usize, max_order: usize) -> Vec<Coalition> {
    let mut basis = vec![Coalition::empty(n)];
    basis.extend(subsets_up_to_order(n, max_order));
    basis
}

/// Least-squares fit of the basis coefficients; minimum-norm under rank deficiency.
pub fn fit_linear_proxy(data: &[(Coalition, f64)], basis: &[Coalition]) -> Result<LinearProxy> {
    if basis.is_empty() {
        return Err(Error::Precondition("linear proxy basis is empty".into()));
    }
    let n = basis[0].width();
    if let Some(b) = basis.iter().find(|b| b.width() != n) {
        return Err(Error::WidthMismatch {
            expected: n,
            got: b.width(),
        });
    }
    if let Some((c, _)) = data.iter().find(|(c, _)| c.width() != n) {
        return Err(Error::WidthMismatch {
            expected: n,
            got: c.width(),
        });
    }
    if data.is_empty() {
        return Ok(LinearProxy {
            n,
            basis: basis.to_vec(),
            beta: vec![0.0; basis.len()],
        });
    }
    let design = DMatrix::from_fn(data.len(), basis.len(), |i, j| {
        if basis[j].is_subset(&data[i].0) {
            1.0
        } else {
            0.0
        }
    });
    let y = DVector::from_iterator(data.len(), data.iter().map(|&(_, v)| v));
    let svd = design.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = sigma_max * f64::EPSILON * data.len().max(basis.len()) as f64;
    let beta = svd
        .solve(&y, eps)
        .map_err(|e| Error::Precondition(format!("least squares failed: {e}")))?;
    Ok(LinearProxy {
        n,
        basis: basis.to_vec(),
        beta: beta.iter().copied().collect(),
    })
}

/// `φ_S = Σ_{T ∈ basis, T ⊇ S} q_t^s(n)·β_T`.
pub fn extract_linear_interactions(
    proxy: &LinearProxy,
    index: &IndexSpec,
    targets: &[Coalition],
) -> Result<InteractionVector> {
    let n = proxy.n;
    validate_targets(index, n, targets)?;
    let mut out = InteractionVector::new(*index, n);
    for target in targets {
        let s = target.len();
        let mut acc = CompensatedSum::new();
        for (t, &b) in proxy.basis.iter().zip(&proxy.beta) {
            if b != 0.0 && target.is_subset(t) {
                acc.add(index.q_weight(n, s, t.len())? * b);
            }
        }
        out.insert(target.clone(), acc.value(), Provenance::Exact)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{Leaf, Tree};

    fn c(n: usize, p: &[usize]) -> Coalition {
        Coalition::from_players(n, p.iter().copied())
    }

    fn idx(f: IndexFamily) -> IndexSpec {
        IndexSpec::new(f, 3)
    }

    #[test]
    fn general_lambda_examples() {
        let sii = idx(IndexFamily::Sii);
        assert_eq!(lambda_general(&sii, 5, LambdaKey::new(0, 1, 0, 1)).unwrap(), 1.0);
        assert_eq!(lambda_general(&sii, 5, LambdaKey::new(1, 1, 0, 1)).unwrap(), 0.5);
        let mob = idx(IndexFamily::Moebius);
        for (ell, r, u, s) in [(0, 2, 0, 2), (1, 1, 1, 2), (2, 1, 1, 2), (1, 2, 0, 2)] {
            let key = LambdaKey::new(ell, r, u, s);
            let expect = if u + r == s { sign(u) } else { 0.0 };
            assert_eq!(lambda_general(&mob, 6, key).unwrap(), expect);
            assert_eq!(lambda_closed(&mob, 6, key).unwrap(), expect);
        }
    }

    #[test]
    fn closed_lambda_examples() {
        let bii = idx(IndexFamily::Bii);
        assert_eq!(lambda_closed(&bii, 2, LambdaKey::new(1, 1, 0, 1)).unwrap(), 0.5);
        assert_eq!(lambda_closed(&bii, 2, LambdaKey::new(1, 1, 1, 1)).unwrap(), -0.5);
        let chii = idx(IndexFamily::Chii);
        assert!((lambda_closed(&chii, 4, LambdaKey::new(0, 2, 0, 2)).unwrap() - 1.0).abs() < 1e-14);
        let sii = idx(IndexFamily::Sii);
        assert_eq!(lambda_closed(&sii, 5, LambdaKey::new(1, 1, 0, 1)).unwrap(), 0.5);
        assert_eq!(shapley_lambda_printed(LambdaKey::new(1, 1, 0, 1)), Some(1.0));
    }

    #[test]
    fn single_leaf_shapley_value() {
        // 1[{1} ⊆ T ⊆ N∖{2}] on players {1, 2} (indices 0 and 1 here)
        let leaf = Leaf::new(c(2, &[1]), c(2, &[0]), 1.0).unwrap();
        let e = TreeEnsemble::new(2, 0.0, vec![Tree::new(vec![leaf])]);
        let sv = IndexSpec::new(IndexFamily::Sv, 1);
        let phi = extract_tree_interactions(&e, &sv, &[c(2, &[0]), c(2, &[1])]).unwrap();
        assert!((phi.get(&c(2, &[0])).unwrap() - 0.5).abs() < 1e-15);
        assert!((phi.get(&c(2, &[1])).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn uncovered_target_is_zero() {
        let leaf = Leaf::new(c(4, &[1]), c(4, &[0]), 3.0).unwrap();
        let e = TreeEnsemble::new(4, 1.0, vec![Tree::new(vec![leaf])]);
        let phi = extract_tree_interactions(&e, &idx(IndexFamily::Sii), &[c(4, &[2]), c(4, &[0, 3])]).unwrap();
        assert!(phi.values().all(|v| v == 0.0));
    }

    #[test]
    fn faithful_order_enforced() {
        let e = TreeEnsemble::new(4, 0.0, vec![]);
        let f = IndexSpec::new(IndexFamily::Fsii, 2);
        assert!(matches!(
            extract_tree_interactions(&e, &f, &[c(4, &[0, 1, 2])]),
            Err(Error::InvalidIndex(_))
        ));
    }

    #[test]
    fn linear_proxy_examples() {
        let n = 3;
        let proxy = LinearProxy {
            n,
            basis: vec![c(n, &[1, 2])],
            beta: vec![1.0],
        };
        let sii = idx(IndexFamily::Sii);
        let phi = extract_linear_interactions(&proxy, &sii, &[c(n, &[1, 2]), c(n, &[1])]).unwrap();
        assert_eq!(phi.get(&c(n, &[1, 2])), Some(1.0));
        assert_eq!(phi.get(&c(n, &[1])), Some(0.5));
        let bii = idx(IndexFamily::Bii);
        let phi = extract_linear_interactions(&proxy, &bii, &[c(n, &[1])]).unwrap();
        assert_eq!(phi.get(&c(n, &[1])), Some(0.5));
    }

    #[test]
    fn linear_fit_examples() {
        let n = 3;
        let all: Vec<Coalition> = (0..8).map(|m| Coalition::from_mask(n, m)).collect();

        let data: Vec<_> = all.iter().map(|t| (t.clone(), t.len() as f64 * 1.5 - 2.0)).collect();
        let p = fit_linear_proxy(&data, &[Coalition::empty(n)]).unwrap();
        assert!((p.beta[0] - (1.5 * 1.5 - 2.0)).abs() < 1e-12);

        let carrier = c(n, &[1, 2]);
        let data: Vec<_> = all
            .iter()
            .map(|t| (t.clone(), if carrier.is_subset(t) { 1.0 } else { 0.0 }))
            .collect();
        let basis = interaction_basis(n, 2);
        let p = fit_linear_proxy(&data, &basis).unwrap();
        for (b, v) in basis.iter().zip(&p.beta) {
            let expect = if *b == carrier { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-10, "{b:?}: {v}");
        }

        assert!(fit_linear_proxy(&data, &[]).is_err());
    }

    #[test]
    fn linear_fit_rank_deficient_is_min_norm() {
        // two identical columns: min-norm splits the weight evenly
        let n = 2;
        let a = c(n, &[0]);
        let data = vec![(Coalition::empty(n), 0.0), (a.clone(), 2.0)];
        let p = fit_linear_proxy(&data, &[a.clone(), a]).unwrap();
        assert!((p.beta[0] - 1.0).abs() < 1e-12 && (p.beta[1] - 1.0).abs() < 1e-12);
    }
}
