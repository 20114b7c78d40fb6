mod common;

use capi::coalition::subsets_up_to_order;
use capi::exact::{exact_interactions, DEFAULT_ENUMERATION_CAP as CAP};
use capi::extraction::extract_tree_interactions;
use capi::game::{CountingGame, Game};
use capi::gbt::GbtConfig;
use capi::pipeline::{
    benchmark_sweep, ground_truth, relative_mse, run_proxyshap, Adjust, PipelineConfig, ProxyConfig, Targets,
};
use capi::sampling::{SamplerConfig, SamplingScheme};
use capi::{IndexFamily, IndexSpec};
use common::*;

fn exact_fit() -> GbtConfig {
    GbtConfig {
        n_estimators: 5,
        max_depth: 12,
        learning_rate: 1.0,
        reg_lambda: 0.0,
        min_child_weight: 1.0,
        ..GbtConfig::default()
    }
}

fn config(index: IndexSpec, proxy: ProxyConfig, budget: usize, adjust: Adjust) -> PipelineConfig {
    PipelineConfig::new(
        index,
        proxy,
        SamplerConfig::new(SamplingScheme::Leverage, budget, 0),
        Targets::UpToOrder(index.max_order),
        13,
    )
    .with_adjust(adjust)
}

#[test]
fn queries_equal_budget() {
    let n = 10;
    let g = CountingGame::new(sparse_game(1, n, 10, 3));
    let cfg = config(
        IndexSpec::new(IndexFamily::Sii, 2),
        ProxyConfig::Tree(GbtConfig::default()),
        300,
        Adjust::On,
    );
    let run = run_proxyshap(&g, &cfg).unwrap();
    assert_eq!(run.queries, 300);
    assert_eq!(g.calls(), 300);
    assert_eq!(run.samples.len(), 300);
}

#[test]
fn full_budget_tree_proxy_matches_oracle() {
    let n = 7;
    for seed in 0..3 {
        let g = sparse_game(seed, n, 10, 3);
        for index in [
            IndexSpec::new(IndexFamily::Sii, 2),
            IndexSpec::new(IndexFamily::Fsii, 2),
        ] {
            let run = run_proxyshap(&g, &config(index, ProxyConfig::Tree(exact_fit()), 1 << n, Adjust::Off)).unwrap();
            assert!(run.train_mse <= 1e-8);
            let truth = exact_interactions(&g, &index, &subsets_up_to_order(n, 2), CAP).unwrap();
            assert!(rel_err(&run.estimate, &truth) < 1e-6);
        }
    }
}

#[test]
fn decomposition_identity() {
    let n = 9;
    let g = sparse_game(4, n, 12, 3);
    for proxy in [
        ProxyConfig::Tree(GbtConfig::default()),
        ProxyConfig::Linear { order: 1 },
    ] {
        let run = run_proxyshap(&g, &config(IndexSpec::new(IndexFamily::Bii, 2), proxy, 200, Adjust::On)).unwrap();
        let msr = run.msr_part.unwrap();
        for (t, e) in run.estimate.iter() {
            let sum = run.proxy_part.get(t).unwrap() + msr.get(t).unwrap();
            assert!((e.value - sum).abs() <= 1e-12 * sum.abs().max(1.0));
        }
    }
}

#[test]
fn adjustment_rule_drives_provenance() {
    let g = capi::game::ConstantGame { n: 40, value: 2.0 };
    let small = GbtConfig {
        n_estimators: 5,
        ..GbtConfig::default()
    };
    let cfg = config(
        IndexSpec::new(IndexFamily::Sii, 3),
        ProxyConfig::Tree(small),
        500,
        Adjust::Auto,
    );
    let run = run_proxyshap(&g, &cfg).unwrap();
    assert!(!run.adjusted);
    assert!(run.estimate.values().all(|v| v.abs() < 1e-8));
}

#[test]
fn tree_truth_bridges_to_enumeration() {
    for n in [8, 12] {
        let model = exact_tree_ensemble(&sparse_game(n as u64, n, 10, 3));
        let index = IndexSpec::new(IndexFamily::Sii, 2);
        let targets = subsets_up_to_order(n, 2);
        let by_enumeration = ground_truth(&model, &index, &targets, CAP).unwrap();
        let by_extraction = ground_truth(&model, &index, &targets, 4).unwrap();
        assert!(rel_err(&by_extraction, &by_enumeration) < 1e-8);
        let direct = extract_tree_interactions(&model, &index, &targets).unwrap();
        assert_eq!(relative_mse(&direct, &by_extraction).unwrap(), 0.0);
    }
    let g = sparse_game(0, 6, 4, 2);
    assert!(matches!(
        ground_truth(&g, &IndexSpec::new(IndexFamily::Sii, 1), &subsets_up_to_order(6, 1), 4),
        Err(capi::Error::TruthUnavailable(_))
    ));
}

#[test]
fn error_shrinks_with_budget() {
    let n = 12;
    let g = sparse_game(99, n, 15, 3);
    let index = IndexSpec::new(IndexFamily::Sii, 2);
    let configs = vec![(
        "tree".to_string(),
        config(index, ProxyConfig::Tree(GbtConfig::default()), 0, Adjust::Auto),
    )];
    let table = benchmark_sweep(&g, &configs, &[256, 1024, 4096], 2, 5).unwrap();
    let means: Vec<f64> = table.summary().iter().map(|s| s.mean).collect();
    assert!(means[0] >= means[1] && means[1] >= means[2], "{means:?}");
    let again = benchmark_sweep(&g, &configs, &[256, 1024, 4096], 2, 5).unwrap();
    assert_eq!(table, again);
    let _ = g.n_players();
}
