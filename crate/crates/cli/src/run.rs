use anyhow::{Context, Result};
use rayon::prelude::*;
use skipnas_core::data::{stratified_kfold, Dataset, FoldPlan};
use skipnas_core::ops::sort_pool_k;
use skipnas_core::rng::SeedStreams;

use crate::config::RunConfig;

pub fn fold_plan(cfg: &RunConfig, data: &Dataset) -> Result<FoldPlan> {
    let seed = SeedStreams::new(cfg.seed).data();
    Ok(stratified_kfold(&data.labels(), cfg.data.folds, seed)?)
}

pub fn sort_k(data: &Dataset) -> usize {
    let sizes: Vec<usize> = data.records.iter().map(|r| r.node_count()).collect();
    sort_pool_k(&sizes)
}

/// Runs `work` for each fold on up to `workers` threads and returns the
/// results in fold order. Workers share nothing mutable.
pub fn for_folds<T, F>(folds: &[usize], workers: usize, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if workers <= 1 {
        return folds.iter().map(|&k| work(k)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("starting fold workers")?;
    pool.install(|| folds.par_iter().map(|&k| work(k)).collect())
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `72.35(3.10) [L4]`, accuracies in percent. Differing depths across folds
/// print as a range.
pub fn format_accuracy(accs: &[f64], depths: &[usize]) -> String {
    let (m, s) = mean_std(accs);
    let lo = depths.iter().min().copied().unwrap_or(0);
    let hi = depths.iter().max().copied().unwrap_or(0);
    let tag = if lo == hi { format!("L{lo}") } else { format!("L{lo}-{hi}") };
    format!("{:.2}({:.2}) [{tag}]", 100.0 * m, 100.0 * s)
}
