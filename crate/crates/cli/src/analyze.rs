use std::path::Path;

use anyhow::Result;
use skipnas_core::analysis::{architecture_depth, diameter_histogram, smoothing_csv, smoothing_curve, wl_distinguish_iteration, WlVerdict};
use skipnas_core::rng::SeedStreams;
use skipnas_core::search::{HyperParams, TrainSetup};
use skipnas_core::supernet::{Architecture, Preset};

use crate::config::RunConfig;
use crate::run::{fold_plan, sort_k};
use crate::UsageError;

/// Verdict for graph `index` of each of two TU directories.
pub fn wl(a: &str, b: &str, index: usize, max_iter: usize) -> Result<WlVerdict> {
    let root = Path::new(".");
    let pick = |spec: &str| -> Result<_> {
        let d = crate::dataset::load_path(spec, root)?;
        d.records
            .get(index)
            .cloned()
            .ok_or_else(|| UsageError(format!("{spec} has no graph {index}")).into())
    };
    Ok(wl_distinguish_iteration(&pick(a)?, &pick(b)?, max_iter))
}

pub fn depth(path: &Path) -> Result<usize> {
    let arch = Architecture::load(path).map_err(|e| UsageError(e.to_string()))?;
    Ok(architecture_depth(&arch))
}

/// `diameter,count` rows followed by the average.
pub fn diameter(cfg: &RunConfig) -> Result<String> {
    let data = crate::dataset::load(&cfg.data, cfg.seed)?;
    let (hist, avg) = diameter_histogram(&data.records);
    let mut out = String::from("diameter,count\n");
    for (d, n) in hist {
        out.push_str(&format!("{d},{n}\n"));
    }
    out.push_str(&format!("average {avg:.2}\n"));
    Ok(out)
}

/// Trains `family` at each depth on one fold and tabulates final-layer
/// smoothness against accuracy.
pub fn smooth(cfg: &RunConfig, family: Preset, depths: &[usize], hyper: &HyperParams, fold: usize) -> Result<String> {
    if depths.is_empty() || depths.contains(&0) {
        return Err(UsageError("depths must be positive".into()).into());
    }
    let data = crate::dataset::load(&cfg.data, cfg.seed)?;
    let plan = fold_plan(cfg, &data)?;
    let fold = plan.fold(fold).map_err(|e| UsageError(e.to_string()))?;
    let setup = TrainSetup {
        aggregation: cfg.aggregation,
        input_dim: data.feature_dim(),
        classes: data.classes(),
        sort_k: sort_k(&data),
        seed: SeedStreams::new(cfg.seed).init(),
    };
    let points = smoothing_curve(family, depths, &data.records, fold, hyper, &setup)?;
    Ok(smoothing_csv(&points))
}
