use std::path::{Path, PathBuf};

use anyhow::Result;
use skipnas_core::data::{parse_tu_dataset, synthesize_diameter_dataset, Dataset, DiameterClass};
use skipnas_core::rng::SeedStreams;

use crate::config::DataConfig;
use crate::UsageError;

/// Environment variable consulted when no data directory is given.
pub const DATA_DIR_ENV: &str = "SKIPNAS_DATA_DIR";

fn data_dir(cfg: &DataConfig) -> PathBuf {
    cfg.data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Directory and dataset name for `spec`: an existing directory is read
/// with its file stem as the name (`fixtures/triangle.tu` holds
/// `triangle_A.txt`, ...); otherwise `spec` names a dataset under `root`,
/// either in `root/NAME/` or directly in `root`.
pub fn locate(spec: &str, root: &Path) -> Result<(PathBuf, String)> {
    let as_path = Path::new(spec);
    if as_path.is_dir() {
        let name = as_path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| UsageError(format!("cannot take a dataset name from {spec:?}")))?;
        return Ok((as_path.to_path_buf(), name.to_string()));
    }
    for dir in [root.join(spec), root.to_path_buf()] {
        if dir.join(format!("{spec}_A.txt")).is_file() {
            return Ok((dir, spec.to_string()));
        }
    }
    Err(UsageError(format!(
        "dataset {spec:?} not found: expected {spec}_A.txt in {} or {} (set --data-dir or {DATA_DIR_ENV})",
        root.join(spec).display(),
        root.display()
    ))
    .into())
}

pub fn load_path(spec: &str, root: &Path) -> Result<Dataset> {
    let (dir, name) = locate(spec, root)?;
    Ok(parse_tu_dataset(&dir, &name)?)
}

/// Loads the configured dataset, synthesizing it if asked, then applies
/// the optional subsample.
pub fn load(cfg: &DataConfig, seed: u64) -> Result<Dataset> {
    let data_seed = SeedStreams::new(seed).data();
    let dataset = match (&cfg.synthetic, &cfg.dataset) {
        (Some(_), Some(_)) => return Err(UsageError("give either --dataset or --synthetic, not both".into()).into()),
        (Some(spec), None) => {
            let classes = DiameterClass::parse_list(spec).map_err(|e| UsageError(e.to_string()))?;
            Dataset::new("synthetic", synthesize_diameter_dataset(&classes, data_seed, cfg.node_budget)?)?
        }
        (None, Some(name)) => load_path(name, &data_dir(cfg))?,
        (None, None) => return Err(UsageError("no dataset given: pass --dataset NAME or --synthetic SPEC".into()).into()),
    };
    if dataset.len() < 2 || dataset.classes() < 2 {
        return Err(UsageError(format!("dataset {} needs at least two graphs and two classes", dataset.name)).into());
    }
    Ok(match cfg.subsample {
        Some(n) => dataset.subsample(n, data_seed),
        None => dataset,
    })
}
