#![allow(dead_code)]

use capi::game::{Game, MoebiusGame};
use capi::trees::{NodeEnsemble, NodeTree};
use capi::{Coalition, IndexFamily, IndexSpec, InteractionVector, TreeEnsemble};
use nalgebra::{DMatrix, DVector};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn c(n: usize, players: &[usize]) -> Coalition {
    Coalition::from_players(n, players.iter().copied())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sparse_game(seed: u64, n: usize, terms: usize, max_order: usize) -> MoebiusGame {
    MoebiusGame::random_sparse(n, terms, max_order, &mut rng(seed))
}

/// Half of `ν` in one full-depth lookup tree, the other half as one chain
/// per Möbius term. Reproduces `ν` exactly on every coalition.
pub fn exact_tree_ensemble(game: &MoebiusGame) -> TreeEnsemble {
    let n = game.n_players();
    let mut model = NodeEnsemble::from_moebius(game);
    model.base_score *= 0.5;
    for t in &mut model.trees {
        for node in &mut t.nodes {
            if let capi::trees::Node::Leaf { leaf } = node {
                *leaf *= 0.5;
            }
        }
    }
    model.trees.push(NodeTree::lookup(n, |m| {
        0.5 * game.value(&Coalition::from_mask(n, m)).unwrap()
    }));
    let (flat, report) = model.flatten().unwrap();
    assert_eq!(report.dropped_leaves, 0);
    flat
}

/// `max |a − b| / max |b|`, with an all-zero truth compared absolutely.
pub fn rel_err(estimate: &InteractionVector, truth: &InteractionVector) -> f64 {
    let scale = truth.values().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = estimate.max_abs_diff(truth).unwrap();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn families_with_both_rows() -> Vec<IndexSpec> {
    vec![
        IndexSpec::new(IndexFamily::Sv, 1),
        IndexSpec::new(IndexFamily::Sii, 3),
        IndexSpec::new(IndexFamily::Bv, 1),
        IndexSpec::new(IndexFamily::Bii, 3),
        IndexSpec::new(IndexFamily::Moebius, 3),
    ]
}

pub fn all_indices() -> Vec<IndexSpec> {
    let mut v = families_with_both_rows();
    v.push(IndexSpec::new(IndexFamily::Chii, 3));
    for k in [2, 3] {
        v.push(IndexSpec::new(IndexFamily::Fsii, k));
        v.push(IndexSpec::new(IndexFamily::Fbii, k));
    }
    v
}

fn binom(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

fn ratio(a: BigInt, b: BigInt) -> BigRational {
    BigRational::new(a, b)
}

/// Exact Möbius weights `q_t^s` in rational arithmetic (Banzhaf at w = 1/2).
pub fn q_exact(index: &IndexSpec, s: usize, t: usize) -> BigRational {
    let k = index.max_order;
    let half_pow = |e: usize| ratio(BigInt::one(), BigInt::from(2).pow(e as u32));
    let neg = |x: BigRational, e: usize| if e % 2 == 1 { -x } else { x };
    match index.family {
        IndexFamily::Sv | IndexFamily::Sii => ratio(BigInt::one(), BigInt::from(t - s + 1)),
        IndexFamily::Bv | IndexFamily::Bii => half_pow(t - s),
        IndexFamily::Chii => ratio(BigInt::from(s), BigInt::from(t)),
        IndexFamily::Moebius => {
            if t == s {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        }
        IndexFamily::Fbii => {
            if t == s {
                BigRational::one()
            } else if t <= k {
                BigRational::zero()
            } else {
                neg(half_pow(t - s) * BigRational::from(binom(t - s - 1, k - s)), k - s)
            }
        }
        IndexFamily::Fsii => {
            if t == s {
                BigRational::one()
            } else if t <= k {
                BigRational::zero()
            } else {
                let v = ratio(BigInt::from(s), BigInt::from(k + s)) * BigRational::from(binom(k, s) * binom(t - 1, k))
                    / BigRational::from(binom(t + k - 1, k + s));
                neg(v, k - s)
            }
        }
    }
}

/// The alternating leaf-weight sum in exact arithmetic.
pub fn lambda_exact(index: &IndexSpec, ell: usize, r: usize, u: usize, s: usize) -> f64 {
    if s - u > r {
        return 0.0;
    }
    let m = ell - u;
    let mut acc = BigRational::zero();
    for i in 0..=m {
        let term = BigRational::from(binom(m, i)) * q_exact(index, s, i + u + r);
        if (i + u) % 2 == 1 {
            acc -= term;
        } else {
            acc += term;
        }
    }
    let f = acc.abs().to_f64().unwrap();
    if acc.is_negative() {
        -f
    } else {
        f
    }
}

/// `Σ_i C(ℓ−u, i)·|q_{i+u+r}^s|`, the conditioning of the alternating sum.
pub fn lambda_abs_sum(index: &IndexSpec, ell: usize, r: usize, u: usize, s: usize) -> f64 {
    if s - u > r {
        return 0.0;
    }
    let m = ell - u;
    let mut acc = BigRational::zero();
    for i in 0..=m {
        acc += BigRational::from(binom(m, i)) * q_exact(index, s, i + u + r).abs();
    }
    acc.to_f64().unwrap()
}

/// Faithful indices as the solution of their defining weighted regression:
/// `argmin Σ_T μ(T)·(ν(T) − Σ_{S⊆T, |S|≤k} β_S)²`, with `ν(∅)` and `ν(N)`
/// fitted exactly for the Shapley kernel. Independent of the Möbius weights.
pub fn faithful_by_regression<G: Game>(game: &G, family: IndexFamily, k: usize) -> Vec<(Coalition, f64)> {
    let n = game.n_players();
    let mut basis = vec![Coalition::empty(n)];
    basis.extend(capi::coalition::subsets_up_to_order(n, k));
    let p = basis.len();
    let rows: Vec<Coalition> = (0..1u64 << n).map(|m| Coalition::from_mask(n, m)).collect();
    let design =
        |t: &Coalition| DVector::from_iterator(p, basis.iter().map(|b| if b.is_subset(t) { 1.0 } else { 0.0 }));
    let y: Vec<f64> = rows.iter().map(|t| game.value(t).unwrap()).collect();

    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut constraints: Vec<(DVector<f64>, f64)> = Vec::new();
    for (t, &v) in rows.iter().zip(&y) {
        let x = design(t);
        let size = t.len();
        let w = match family {
            IndexFamily::Fbii => 1.0,
            IndexFamily::Fsii => {
                if size == 0 || size == n {
                    constraints.push((x, v));
                    continue;
                }
                (n - 1) as f64 / (capi::numeric::binomial(n as u64, size as u64) * (size * (n - size)) as f64)
            }
            other => panic!("{other} is not a faithful index"),
        };
        gram += &x * x.transpose() * w;
        rhs += &x * (v * w);
    }
    // KKT system for the equality constraints
    let q = constraints.len();
    let mut kkt = DMatrix::<f64>::zeros(p + q, p + q);
    let mut b = DVector::<f64>::zeros(p + q);
    kkt.view_mut((0, 0), (p, p)).copy_from(&gram);
    b.rows_mut(0, p).copy_from(&rhs);
    for (j, (x, v)) in constraints.iter().enumerate() {
        for i in 0..p {
            kkt[(i, p + j)] = x[i];
            kkt[(p + j, i)] = x[i];
        }
        b[p + j] = *v;
    }
    let sol = kkt.lu().solve(&b).expect("regression system is nonsingular");
    basis.into_iter().zip(sol.iter().copied()).skip(1).collect()
}
