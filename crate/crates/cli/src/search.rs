use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use skipnas_core::analysis::architecture_depth;
use skipnas_core::data::Dataset;
use skipnas_core::rng::SeedStreams;
use skipnas_core::search::{run_search, EpochMetrics, SearchConfig};
use skipnas_core::supernet::{Architecture, Provenance, SuperNet, SuperNetConfig};

use crate::config::RunConfig;
use crate::run::{fold_plan, for_folds, sort_k};

#[derive(Debug, Serialize)]
struct FoldSummary {
    fold: usize,
    depth: usize,
    on_connections: usize,
    initial_train_loss: f64,
    final_train_loss: f64,
    final_val_loss: f64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    command: &'static str,
    dataset: &'a str,
    graphs: usize,
    seed: u64,
    folds: Vec<FoldSummary>,
}

struct FoldResult {
    arch: Architecture,
    history: Vec<EpochMetrics>,
}

fn metrics_csv(history: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,temperature\n");
    for m in history {
        writeln!(out, "{},{:.6},{:.6},{:.6}", m.epoch, m.train_loss, m.val_loss, m.temperature).unwrap();
    }
    out
}

fn search_fold(cfg: &RunConfig, data: &Dataset, fold: &skipnas_core::data::Fold, k: usize, sort_k: usize) -> Result<FoldResult> {
    let s = &cfg.search;
    let seed = SeedStreams::new(cfg.seed).fold(k).root;
    let net_config = SuperNetConfig {
        hidden: s.hidden,
        aggregation: cfg.aggregation,
        sort_k,
        temperature: s.temperature,
        seed,
        ..SuperNetConfig::new(s.variant, s.b, s.c, data.feature_dim(), data.classes())
    };
    let (net, mut store) = SuperNet::build(net_config)?;
    let search = SearchConfig {
        epochs: s.epochs,
        batch_size: s.batch_size,
        weight_lr: s.weight_lr,
        weight_decay: s.weight_decay,
        alpha_lr: s.alpha_lr,
        temperature: s.temperature,
        seed,
    };
    let provenance = Provenance {
        seed: cfg.seed,
        epoch: s.epochs,
        hidden: s.hidden,
        aggregation: cfg.aggregation,
        dataset: Some(data.name.clone()),
        fold: Some(k),
        ..Provenance::new("search")
    };
    let outcome = run_search(&net, &mut store, &data.records, fold, &search, provenance).with_context(|| format!("fold {k}"))?;
    Ok(FoldResult {
        arch: outcome.architecture,
        history: outcome.history,
    })
}

pub fn run(cfg: &RunConfig) -> Result<PathBuf> {
    let data = crate::dataset::load(&cfg.data, cfg.seed)?;
    let selected = cfg.data.selected_folds()?;
    let plan = fold_plan(cfg, &data)?;
    let out = cfg.out_dir("search", &data.name);
    cfg.persist(&out)?;
    let k_sort = sort_k(&data);

    let results = for_folds(&selected, cfg.parallel_folds, |k| search_fold(cfg, &data, plan.fold(k)?, k, k_sort))?;

    let mut folds = Vec::with_capacity(results.len());
    for (&k, r) in selected.iter().zip(&results) {
        r.arch.save(out.join(format!("fold{k}.arch")))?;
        std::fs::write(out.join(format!("fold{k}.metrics.csv")), metrics_csv(&r.history))?;
        let (first, last) = (r.history.first().expect("epochs ≥ 1"), r.history.last().expect("epochs ≥ 1"));
        let depth = architecture_depth(&r.arch);
        println!(
            "fold {k}: depth {depth}, train loss {:.4} -> {:.4}, val loss {:.4}",
            first.train_loss, last.train_loss, last.val_loss
        );
        folds.push(FoldSummary {
            fold: k,
            depth,
            on_connections: r.arch.on_count(),
            initial_train_loss: first.train_loss,
            final_train_loss: last.train_loss,
            final_val_loss: last.val_loss,
        });
    }
    let summary = Summary {
        command: "search",
        dataset: &data.name,
        graphs: data.len(),
        seed: cfg.seed,
        folds,
    };
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!("run directory: {}", out.display());
    Ok(out)
}
