mod common;

use capi::coalition::subsets_up_to_order;
use capi::exact::{
    exact_interactions, exact_interactions_via, moebius_transform, ExactRoute, DEFAULT_ENUMERATION_CAP as CAP,
};
use capi::game::{FnGame, Game, TableGame, UnanimityGame};
use capi::{Coalition, IndexFamily, IndexSpec};
use common::*;
use rand::Rng;

fn random_table(seed: u64, n: usize) -> TableGame {
    let mut r = rng(seed);
    TableGame::from_rows(
        n,
        (0..1u64 << n).map(|m| (Coalition::from_mask(n, m), r.gen_range(-1.0..1.0))),
    )
    .unwrap()
}

#[test]
fn derivative_and_moebius_routes_agree() {
    for (seed, n) in [(1, 5), (2, 8), (3, 10)] {
        let g = random_table(seed, n);
        for index in families_with_both_rows() {
            let targets = subsets_up_to_order(n, index.max_order);
            let a = exact_interactions_via(&g, &index, &targets, CAP, ExactRoute::Derivatives).unwrap();
            let b = exact_interactions_via(&g, &index, &targets, CAP, ExactRoute::Moebius).unwrap();
            assert!(rel_err(&a, &b) < 1e-9, "{} n={n}", index.family);
        }
    }
}

#[test]
fn faithful_weights_match_regression() {
    for (seed, n) in [(4, 5), (5, 6), (6, 7)] {
        let g = random_table(seed, n);
        for family in [IndexFamily::Fbii, IndexFamily::Fsii] {
            for k in 1..=3 {
                let index = IndexSpec::new(family, k);
                let targets = subsets_up_to_order(n, k);
                let phi = exact_interactions(&g, &index, &targets, CAP).unwrap();
                let scale = phi.values().fold(0.0f64, |m, v| m.max(v.abs()));
                for (t, beta) in faithful_by_regression(&g, family, k) {
                    let got = phi.get(&t).unwrap();
                    assert!(
                        (got - beta).abs() <= 1e-9 * scale,
                        "{family} k={k} {t:?}: {got} vs {beta}"
                    );
                }
            }
        }
    }
}

#[test]
fn unanimity_game_values() {
    // u_A: Shapley value 1/|A| on A, Banzhaf 2^{1−|A|}, Möbius 1 at A only
    let n = 6;
    let a = c(n, &[0, 2, 5]);
    let g = UnanimityGame::new(a.clone());
    let targets = subsets_up_to_order(n, 3);
    let sv = exact_interactions(&g, &IndexSpec::new(IndexFamily::Sv, 1), &subsets_up_to_order(n, 1), CAP).unwrap();
    let bv = exact_interactions(&g, &IndexSpec::new(IndexFamily::Bv, 1), &subsets_up_to_order(n, 1), CAP).unwrap();
    for p in 0..n {
        let expect = if a.contains(p) { 1.0 } else { 0.0 };
        assert!((sv.get(&c(n, &[p])).unwrap() - expect / 3.0).abs() < 1e-14);
        assert!((bv.get(&c(n, &[p])).unwrap() - expect / 4.0).abs() < 1e-14);
    }
    let mob = exact_interactions(&g, &IndexSpec::new(IndexFamily::Moebius, 3), &targets, CAP).unwrap();
    for (t, e) in mob.iter() {
        assert_eq!(e.value, if *t == a { 1.0 } else { 0.0 });
    }
    // SII of u_A at S ⊆ A is 1/(|A|−|S|+1)
    let sii = exact_interactions(&g, &IndexSpec::new(IndexFamily::Sii, 3), &targets, CAP).unwrap();
    for (t, e) in sii.iter() {
        let expect = if t.is_subset(&a) {
            1.0 / (3 - t.len() + 1) as f64
        } else {
            0.0
        };
        assert!((e.value - expect).abs() < 1e-14, "{t:?}");
    }
}

#[test]
fn efficiency_of_the_shapley_value() {
    let n = 9;
    let g = random_table(11, n);
    let sv = exact_interactions(&g, &IndexSpec::new(IndexFamily::Sv, 1), &subsets_up_to_order(n, 1), CAP).unwrap();
    let total: f64 = sv.values().sum();
    let grand = g.value(&Coalition::full(n)).unwrap() - g.value(&Coalition::empty(n)).unwrap();
    assert!((total - grand).abs() < 1e-12);
}

#[test]
fn moebius_transform_round_trips() {
    let n = 7;
    let g = random_table(12, n);
    let m = moebius_transform(&g, CAP).unwrap();
    for mask in 0..1u64 << n {
        let t = Coalition::from_mask(n, mask);
        assert!((m.value(&t).unwrap() - g.value(&t).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn capacity_is_enforced() {
    let g = FnGame::new(CAP + 1, |_: &Coalition| 0.0);
    let index = IndexSpec::new(IndexFamily::Sii, 1);
    let t = vec![c(CAP + 1, &[0])];
    assert!(matches!(
        exact_interactions(&g, &index, &t, CAP),
        Err(capi::Error::Capacity { .. })
    ));
}
