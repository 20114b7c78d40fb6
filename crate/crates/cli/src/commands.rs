use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde_json::json;

use capi::exact::exact_interactions;
use capi::extraction::extract_tree_interactions_with;
use capi::gbt::{train, GbtConfig};
use capi::msr::gamma_factor;
use capi::pipeline::{benchmark_sweep, run_proxyshap, PipelineConfig, ProxyConfig, Targets};
use capi::sampling::{sample, SamplerConfig, SamplingScheme};
use capi::{Coalition, IndexSpec, TreeEnsemble};

use crate::games::load_game;
use crate::manifest::{manifest_path, sibling, RunManifest};
use crate::*;

pub fn run(cli: Cli, args: Vec<String>) -> Result<()> {
    if let Some(threads) = cli.threads {
        // a replay reaches here a second time with the pool already built
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
        {
            log::debug!("thread pool already configured: {e}");
        }
    }
    let start = Instant::now();
    let report = match &cli.command {
        Command::Exact(a) => exact(a)?,
        Command::TreeExtract(a) => tree_extract(a)?,
        Command::TrainProxy(a) => train_proxy(a)?,
        Command::Estimate(a) => estimate(a)?,
        Command::Benchmark(a) => benchmark(a)?,
        Command::Gamma(a) => gamma(a)?,
        Command::Replay(a) => return replay(a),
    };
    if let Some(primary) = report.outputs.first() {
        let manifest = RunManifest {
            command: report.command.to_string(),
            args,
            config: report.config,
            seed: report.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            queries: report.queries,
            outputs: report.outputs.clone(),
        };
        manifest.write(&manifest_path(primary))?;
    }
    Ok(())
}

/// What a command did, for its manifest.
struct Report {
    command: &'static str,
    config: serde_json::Value,
    seed: Option<u64>,
    queries: Option<u64>,
    outputs: Vec<PathBuf>,
}

/// Writes to `path`, or to standard output when no path is given.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<Vec<PathBuf>> {
    match path {
        Some(p) => {
            std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?;
            Ok(vec![p.to_path_buf()])
        }
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(vec![])
        }
    }
}

fn index_spec(a: &IndexArgs) -> Result<IndexSpec> {
    let spec = IndexSpec::new(a.index, a.order).with_banzhaf_w(a.banzhaf_w);
    spec.validate()?;
    Ok(spec)
}

/// `--targets` takes 0/1 strings inline, or one path to a file with one
/// string per line (blank lines and `#` comments skipped).
fn targets(a: &IndexArgs, spec: &IndexSpec) -> Result<Targets> {
    let Some(given) = &a.targets else {
        return Ok(Targets::UpToOrder(spec.max_order));
    };
    let is_bits = |s: &str| !s.is_empty() && s.bytes().all(|b| b == b'0' || b == b'1');
    match given.as_slice() {
        [path] if !is_bits(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading targets from {path}"))?;
            Ok(Targets::Explicit(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(String::from)
                    .collect(),
            ))
        }
        _ => Ok(Targets::Explicit(given.clone())),
    }
}

fn sampler_config(a: &SamplerArgs, index: &IndexSpec) -> SamplerConfig {
    let scheme = match a.sampler {
        SamplerKind::Leverage => SamplingScheme::Leverage,
        SamplerKind::Uniform => SamplingScheme::Uniform,
        SamplerKind::Proportional => SamplingScheme::Proportional {
            index: *index,
            order: index.max_order,
        },
    };
    SamplerConfig {
        scheme,
        budget: a.budget,
        without_replacement: !a.with_replacement,
        include_borders: !a.no_borders,
        seed: a.seed,
    }
}

fn gbt_config(a: &ProxyArgs, seed: u64) -> Result<GbtConfig> {
    let mut cfg = GbtConfig::preset(&a.preset)?.with_seed(seed);
    if let Some(v) = a.n_estimators {
        cfg.n_estimators = v;
    }
    if let Some(v) = a.max_depth {
        cfg.max_depth = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn csv_bytes(v: &capi::InteractionVector) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    v.write_csv(&mut buf)?;
    Ok(buf)
}

fn exact(a: &ExactArgs) -> Result<Report> {
    let game = load_game(&a.game.game, a.game.n)?;
    let spec = index_spec(&a.index)?;
    let t = targets(&a.index, &spec)?;
    let phi = exact_interactions(game.as_ref(), &spec, &t.resolve(game.n_players())?, a.cap)?;
    let outputs = emit(a.out.as_deref(), &csv_bytes(&phi)?)?;
    Ok(Report {
        command: "exact",
        config: json!({ "game": a.game.game, "n": game.n_players(), "index": spec, "targets": t, "cap": a.cap }),
        seed: None,
        queries: None,
        outputs,
    })
}

fn tree_extract(a: &TreeExtractArgs) -> Result<Report> {
    let (ensemble, flatten) = TreeEnsemble::load(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let spec = index_spec(&a.index)?;
    let t = targets(&a.index, &spec)?;
    let (phi, stats) = extract_tree_interactions_with(&ensemble, &spec, &t.resolve(ensemble.n)?, a.lambda)?;
    if a.timing {
        eprintln!(
            "leaves={} targets={} leaves_visited={} contributions={} wall_ms={:.3}",
            ensemble.leaf_count(),
            phi.len(),
            stats.leaves_visited,
            stats.contributions,
            stats.elapsed.as_secs_f64() * 1e3
        );
    }
    let outputs = emit(a.out.as_deref(), &csv_bytes(&phi)?)?;
    Ok(Report {
        command: "tree-extract",
        config: json!({
            "model": a.model,
            "n": ensemble.n,
            "index": spec,
            "targets": t,
            "lambda": format!("{:?}", a.lambda).to_lowercase(),
            "dropped_leaves": flatten.dropped_leaves,
        }),
        seed: None,
        queries: None,
        outputs,
    })
}

fn train_proxy(a: &TrainProxyArgs) -> Result<Report> {
    let game = load_game(&a.game.game, a.game.n)?;
    let n = game.n_players();
    let spec = index_spec(&a.index)?;
    let sampler = sampler_config(&a.sampler, &spec);
    let gbt = gbt_config(&a.proxy, a.sampler.seed)?;
    let drawn = sample(&sampler, n)?;
    let data: Vec<(Coalition, f64)> = drawn
        .into_iter()
        .map(|(c, _)| {
            let v = game.evaluate(&c)?;
            Ok((c, v))
        })
        .collect::<capi::Result<_>>()?;
    let trained = train(&data, &gbt)?;
    let text = trained.model.to_json_string()? + "\n";
    let outputs = emit(a.out.as_deref(), text.as_bytes())?;
    Ok(Report {
        command: "train-proxy",
        config: json!({
            "game": a.game.game,
            "n": n,
            "sampler": sampler,
            "proxy": gbt,
            "train_mse": trained.train_mse.last(),
        }),
        seed: Some(a.sampler.seed),
        queries: Some(data.len() as u64),
        outputs,
    })
}

fn proxy_config(
    kind: ProxyKind,
    tree: &ProxyArgs,
    linear_order: Option<usize>,
    spec: &IndexSpec,
    seed: u64,
) -> Result<ProxyConfig> {
    Ok(match kind {
        ProxyKind::Tree => ProxyConfig::Tree(gbt_config(tree, seed)?),
        ProxyKind::Linear => ProxyConfig::Linear {
            order: linear_order.unwrap_or(spec.max_order),
        },
    })
}

fn estimate(a: &EstimateArgs) -> Result<Report> {
    let game = load_game(&a.game.game, a.game.n)?;
    let spec = index_spec(&a.index)?;
    let proxy = proxy_config(a.proxy, &a.tree, a.linear_order, &spec, a.sampler.seed)?;
    let mut cfg = PipelineConfig::new(
        spec,
        proxy,
        sampler_config(&a.sampler, &spec),
        targets(&a.index, &spec)?,
        a.sampler.seed,
    )
    .with_adjust(a.adjust);
    cfg.adjust_constant = a.adjust_constant;
    let run = run_proxyshap(game.as_ref(), &cfg)?;
    let outputs = emit(a.out.as_deref(), &csv_bytes(&run.estimate)?)?;
    Ok(Report {
        command: "estimate",
        config: json!({
            "game": a.game.game,
            "n": game.n_players(),
            "pipeline": cfg,
            "adjust": run.adjusted,
            "train_mse": run.train_mse,
        }),
        seed: Some(a.sampler.seed),
        queries: Some(run.queries),
        outputs,
    })
}

fn parse_proxy(text: &str, spec: &IndexSpec, seed: u64) -> Result<ProxyConfig> {
    match text.split_once(':').unwrap_or((text, "")) {
        ("tree", preset) => {
            let preset = if preset.is_empty() { "default" } else { preset };
            Ok(ProxyConfig::Tree(GbtConfig::preset(preset)?.with_seed(seed)))
        }
        ("linear", order) => {
            let order = if order.is_empty() {
                spec.max_order
            } else {
                order
                    .parse()
                    .map_err(|_| capi::Error::Parse(format!("bad linear order {order:?}")))?
            };
            Ok(ProxyConfig::Linear { order })
        }
        _ => bail!(capi::Error::Parse(format!("unknown proxy {text:?}"))),
    }
}

fn benchmark(a: &BenchmarkArgs) -> Result<Report> {
    let game = load_game(&a.game.game, a.game.n)?;
    let spec = index_spec(&a.index)?;
    let sampler = sampler_config(&a.sampler, &spec);
    let configs = a
        .proxies
        .iter()
        .map(|p| {
            let cfg = PipelineConfig::new(
                spec,
                parse_proxy(p, &spec, a.sampler.seed)?,
                sampler.clone(),
                targets(&a.index, &spec)?,
                a.sampler.seed,
            )
            .with_adjust(a.adjust);
            Ok((p.clone(), cfg))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = benchmark_sweep(game.as_ref(), &configs, &a.budgets, a.reps, a.sampler.seed)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    let mut outputs = emit(a.out.as_deref(), &csv)?;
    if let Some(out) = &a.out {
        let mut summary = Vec::new();
        table.write_summary_json(&mut summary)?;
        summary.push(b'\n');
        let path = sibling(out, "summary.json");
        outputs.extend(emit(Some(&path), &summary)?);
    }
    let queries: u64 = table.rows.iter().map(|r| r.budget as u64).sum();
    Ok(Report {
        command: "benchmark",
        config: json!({
            "game": a.game.game,
            "n": game.n_players(),
            "configs": configs,
            "budgets": a.budgets,
            "reps": a.reps,
        }),
        seed: Some(a.sampler.seed),
        queries: Some(queries),
        outputs,
    })
}

fn gamma(a: &GammaArgs) -> Result<Report> {
    let spec = IndexSpec::new(a.index, a.order.max(1)).with_banzhaf_w(a.banzhaf_w);
    spec.validate()?;
    let scheme = match a.scheme {
        SchemeKind::Leverage => SamplingScheme::Leverage,
        SchemeKind::Uniform => SamplingScheme::Uniform,
        SchemeKind::Proportional => SamplingScheme::Proportional {
            index: spec,
            order: a.order,
        },
    };
    let r = gamma_factor(&spec, a.n, a.order, &scheme, a.cap)?;
    let show = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    let text = format!(
        "index,scheme,n,order,brute,closed\n{},{},{},{},{},{}\n",
        spec.family,
        scheme.name(),
        a.n,
        a.order,
        show(r.brute),
        show(r.closed)
    );
    let outputs = emit(a.out.as_deref(), text.as_bytes())?;
    Ok(Report {
        command: "gamma",
        config: json!({ "index": spec, "scheme": scheme, "n": a.n, "order": a.order, "cap": a.cap }),
        seed: None,
        queries: None,
        outputs,
    })
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let manifest = RunManifest::read(&a.manifest)?;
    let mut args = manifest.args.clone();
    if let Some(out) = &a.out {
        args.push("--out".into());
        args.push(out.display().to_string());
    }
    let cli = Cli::try_parse_from(std::iter::once("capi".to_string()).chain(args.iter().cloned()))
        .map_err(|e| capi::Error::Parse(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        bail!(capi::Error::Parse("a manifest cannot record a replay".into()));
    }
    run(cli, args)
}
