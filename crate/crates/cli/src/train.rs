use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use skipnas_core::analysis::architecture_depth;
use skipnas_core::rng::SeedStreams;
use skipnas_core::search::{tune_hyperparams, HyperParams, Trial, TrainSetup};
use skipnas_core::supernet::{preset_architecture, Architecture, Preset};

use crate::config::RunConfig;
use crate::run::{fold_plan, for_folds, format_accuracy, mean_std, sort_k};
use crate::UsageError;

/// Where the architecture of each fold comes from.
#[derive(Debug, Clone)]
pub enum ArchSource {
    /// One document for every fold.
    File(PathBuf),
    /// A search run directory holding `fold<k>.arch`.
    RunDir(PathBuf),
    Preset(Preset),
}

impl ArchSource {
    pub fn from_path(path: &Path) -> Self {
        if path.is_dir() {
            ArchSource::RunDir(path.to_path_buf())
        } else {
            ArchSource::File(path.to_path_buf())
        }
    }

    fn resolve(&self, fold: usize) -> Result<Architecture> {
        let load = |p: &Path| Architecture::load(p).map_err(|e| anyhow::Error::from(UsageError(e.to_string())));
        match self {
            ArchSource::File(p) => load(p),
            ArchSource::RunDir(d) => load(&d.join(format!("fold{fold}.arch"))),
            ArchSource::Preset(p) => Ok(preset_architecture(*p, p.layers())?),
        }
    }
}

#[derive(Debug, Serialize)]
struct FoldSummary {
    fold: usize,
    depth: usize,
    best: Trial,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    command: &'static str,
    dataset: &'a str,
    seed: u64,
    mean_test_acc: f64,
    std_test_acc: f64,
    line: String,
    folds: Vec<FoldSummary>,
}

pub fn run(cfg: &RunConfig, source: &ArchSource) -> Result<String> {
    let data = crate::dataset::load(&cfg.data, cfg.seed)?;
    let selected = cfg.data.selected_folds()?;
    // resolve every document up front so a bad one fails before training
    let archs: Vec<Architecture> = selected.iter().map(|&k| source.resolve(k)).collect::<Result<_>>()?;
    let space = cfg.train.space();
    space.validate().map_err(|e| UsageError(e.to_string()))?;
    let plan = fold_plan(cfg, &data)?;
    let out = cfg.out_dir("train", &data.name);
    cfg.persist(&out)?;
    let k_sort = sort_k(&data);
    let base = HyperParams {
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        weight_decay: cfg.train.weight_decay,
        ..HyperParams::default()
    };

    let positions: Vec<usize> = (0..selected.len()).collect();
    let outcomes = for_folds(&positions, cfg.parallel_folds, |i| {
        let k = selected[i];
        let seeds = SeedStreams::new(cfg.seed).fold(k);
        let setup = TrainSetup {
            aggregation: cfg.aggregation,
            input_dim: data.feature_dim(),
            classes: data.classes(),
            sort_k: k_sort,
            seed: seeds.init(),
        };
        tune_hyperparams(&archs[i], &data.records, plan.fold(k)?, &space, &base, &setup, seeds.tuner()).with_context(|| format!("fold {k}"))
    })?;

    let mut trials_csv = String::from("fold,trial,hidden,dropout,lr,optimizer,best_epoch,train_acc,val_acc,test_acc\n");
    let mut folds = Vec::new();
    for ((&k, arch), outcome) in selected.iter().zip(&archs).zip(&outcomes) {
        for t in &outcome.trials {
            writeln!(
                trials_csv,
                "{k},{},{},{},{:.6},{},{},{:.4},{:.4},{:.4}",
                t.index, t.hyper.hidden, t.hyper.dropout, t.hyper.lr, t.hyper.optimizer, t.best_epoch, t.train_acc, t.val_acc, t.test_acc
            )
            .unwrap();
        }
        let best = outcome.best_trial().clone();
        let depth = architecture_depth(arch);
        println!(
            "fold {k}: depth {depth}, test {:.2}% (val {:.2}%, trial {})",
            100.0 * best.test_acc,
            100.0 * best.val_acc,
            best.index
        );
        folds.push(FoldSummary { fold: k, depth, best });
    }
    std::fs::write(out.join("trials.csv"), trials_csv)?;

    let accs: Vec<f64> = folds.iter().map(|f| f.best.test_acc).collect();
    let depths: Vec<usize> = folds.iter().map(|f| f.depth).collect();
    let line = format_accuracy(&accs, &depths);
    let (mean, std) = mean_std(&accs);
    let summary = Summary {
        command: "train",
        dataset: &data.name,
        seed: cfg.seed,
        mean_test_acc: mean,
        std_test_acc: std,
        line: line.clone(),
        folds,
    };
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!("{line}");
    Ok(line)
}
