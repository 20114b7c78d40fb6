//! Brute-force ground truth: discrete derivatives, the Möbius transform and
//! exact interaction indices by full enumeration of `2^N`.

use rayon::prelude::*;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::{Game, MoebiusGame};
use crate::indices::IndexSpec;
use crate::interaction::{validate_targets, InteractionVector, Provenance};
use crate::numeric::{sign, CompensatedSum};

/// Default largest `n` for which enumeration of `2^n` coalitions is allowed.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Hard ceiling on the configurable cap; tables are indexed by `u64` masks.
const MAX_CAP: usize = 30;

pub fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap.min(MAX_CAP) {
        return Err(Error::Capacity {
            n,
            cap: cap.min(MAX_CAP),
        });
    }
    Ok(())
}

/// `Δ_S ν(T) = Σ_{L ⊆ S} (−1)^{s−ℓ} ν(T ∪ L)`, with `S ∩ T = ∅`.
pub fn discrete_derivative<G: Game + ?Sized>(game: &G, s: &Coalition, t: &Coalition) -> Result<f64> {
    if !s.is_disjoint(t) {
        return Err(Error::Precondition(format!("S={s:?} and T={t:?} overlap")));
    }
    let size = s.len();
    let mut acc = CompensatedSum::new();
    for l in s.subsets() {
        let v = game.evaluate(&t.union(&l))?;
        acc.add(sign(size - l.len()) * v);
    }
    Ok(acc.value())
}

/// All `2^n` values of a game, indexed by bit mask.
#[derive(Debug, Clone)]
pub struct ValueTable {
    n: usize,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn from_game<G: Game + ?Sized>(game: &G, cap: usize) -> Result<Self> {
        let n = game.n_players();
        check_cap(n, cap)?;
        let values = (0..1u64 << n)
            .into_par_iter()
            .map(|mask| game.evaluate(&Coalition::from_mask(n, mask)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, values })
    }

    pub fn n_players(&self) -> usize {
        self.n
    }

    pub fn get(&self, mask: u64) -> f64 {
        self.values[mask as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dense Möbius coefficients `m_S` for every mask `S`.
    pub fn moebius_coefficients(&self) -> Vec<f64> {
        let mut m = self.values.clone();
        for i in 0..self.n {
            let bit = 1usize << i;
            for mask in 0..m.len() {
                if mask & bit != 0 {
                    m[mask] -= m[mask ^ bit];
                }
            }
        }
        m
    }

    /// `φ_S = Σ_{T ⊆ N∖S} p_t^s(n) Δ_S ν(T)` for a single target mask.
    pub fn interaction_by_derivatives(&self, index: &IndexSpec, target: u64) -> Result<f64> {
        let n = self.n;
        let s = target.count_ones() as usize;
        let full = (1u64 << n) - 1;
        let outside = full & !target;
        let weights: Vec<f64> = (0..=n - s).map(|t| index.p_weight(n, s, t)).collect::<Result<_>>()?;
        let mut acc = CompensatedSum::new();
        for_each_submask(outside, |t| {
            let w = weights[t.count_ones() as usize];
            if w == 0.0 {
                return;
            }
            let mut delta = CompensatedSum::new();
            for_each_submask(target, |l| {
                delta.add(sign(s - l.count_ones() as usize) * self.values[(t | l) as usize]);
            });
            acc.add(w * delta.value());
        });
        Ok(acc.value())
    }
}

/// Visits every submask of `mask`, including `0` and `mask` itself.
fn for_each_submask(mask: u64, mut f: impl FnMut(u64)) {
    let mut sub = mask;
    loop {
        f(sub);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & mask;
    }
}

/// Dense Möbius coefficients together with the player count.
#[derive(Debug, Clone)]
pub struct MoebiusTable {
    n: usize,
    coefficients: Vec<f64>,
}

impl MoebiusTable {
    pub fn from_values(table: &ValueTable) -> Self {
        Self {
            n: table.n,
            coefficients: table.moebius_coefficients(),
        }
    }

    pub fn from_game<G: Game + ?Sized>(game: &G, cap: usize) -> Result<Self> {
        Ok(Self::from_values(&ValueTable::from_game(game, cap)?))
    }

    pub fn get(&self, mask: u64) -> f64 {
        self.coefficients[mask as usize]
    }

    /// `φ_S = Σ_{T ⊇ S} q_t^s(n) m_T` for a single target mask.
    pub fn interaction(&self, index: &IndexSpec, target: u64) -> Result<f64> {
        let n = self.n;
        let s = target.count_ones() as usize;
        let full = (1u64 << n) - 1;
        let weights: Vec<f64> = (0..=n)
            .map(|t| if t < s { Ok(0.0) } else { index.q_weight(n, s, t) })
            .collect::<Result<_>>()?;
        let mut acc = CompensatedSum::new();
        for_each_submask(full & !target, |extra| {
            let t = target | extra;
            let m = self.coefficients[t as usize];
            if m != 0.0 {
                acc.add(weights[t.count_ones() as usize] * m);
            }
        });
        Ok(acc.value())
    }

    pub fn to_game(&self) -> MoebiusGame {
        let mut g = MoebiusGame::new(self.n);
        for (mask, &m) in self.coefficients.iter().enumerate() {
            if m != 0.0 {
                g.add_term(Coalition::from_mask(self.n, mask as u64), m)
                    .expect("mask width matches");
            }
        }
        g
    }
}

/// The Möbius transform `m_S = Δ_S ν(∅)` of a game with `n <= cap`.
/// Exactly-zero coefficients are omitted from the sparse result.
pub fn moebius_transform<G: Game + ?Sized>(game: &G, cap: usize) -> Result<MoebiusGame> {
    Ok(MoebiusTable::from_game(game, cap)?.to_game())
}

/// Which enumeration route computes the exact index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactRoute {
    /// Weighted discrete derivatives with `p_t^s(n)`.
    Derivatives,
    /// Weighted Möbius coefficients of supersets with `q_t^s(n)`.
    Moebius,
}

/// Exact interactions by enumeration. Uses discrete derivatives when the
/// family has coalition weights and the Möbius route otherwise.
pub fn exact_interactions<G: Game + ?Sized>(
    game: &G,
    index: &IndexSpec,
    targets: &[Coalition],
    cap: usize,
) -> Result<InteractionVector> {
    let route = if index.family.has_coalition_weights() {
        ExactRoute::Derivatives
    } else {
        ExactRoute::Moebius
    };
    exact_interactions_via(game, index, targets, cap, route)
}

pub fn exact_interactions_via<G: Game + ?Sized>(
    game: &G,
    index: &IndexSpec,
    targets: &[Coalition],
    cap: usize,
    route: ExactRoute,
) -> Result<InteractionVector> {
    let n = game.n_players();
    check_cap(n, cap)?;
    validate_targets(index, n, targets)?;
    let table = ValueTable::from_game(game, cap)?;
    interactions_from_table(&table, index, targets, route)
}

/// Exact interactions from a precomputed value table.
pub fn interactions_from_table(
    table: &ValueTable,
    index: &IndexSpec,
    targets: &[Coalition],
    route: ExactRoute,
) -> Result<InteractionVector> {
    let n = table.n_players();
    validate_targets(index, n, targets)?;
    let masks: Vec<u64> = targets
        .iter()
        .map(|t| t.to_mask().expect("n <= cap fits a mask"))
        .collect();
    let values: Vec<f64> = match route {
        ExactRoute::Derivatives => masks
            .par_iter()
            .map(|&m| table.interaction_by_derivatives(index, m))
            .collect::<Result<_>>()?,
        ExactRoute::Moebius => {
            let moebius = MoebiusTable::from_values(table);
            masks
                .par_iter()
                .map(|&m| moebius.interaction(index, m))
                .collect::<Result<_>>()?
        }
    };
    let mut out = InteractionVector::new(*index, n);
    for (t, v) in targets.iter().zip(values) {
        out.insert(t.clone(), v, Provenance::Exact)?;
    }
    Ok(out)
}
