use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use skipnas_core::ops::AggregationKind;
use skipnas_core::search::{OptimizerKind, TrialSpace};
use skipnas_core::supernet::{TemperatureSchedule, Variant};

use crate::UsageError;

/// Everything a run depends on. A copy is written into every run directory,
/// and `--config <run>/config.toml` replays the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub aggregation: AggregationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub parallel_folds: usize,
    pub data: DataConfig,
    pub search: SearchSection,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            aggregation: AggregationKind::Gcn,
            out: None,
            parallel_folds: 1,
            data: DataConfig::default(),
            search: SearchSection::default(),
            train: TrainSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// A TU dataset name under `data_dir`, or a path to a `.tu` directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    /// Synthetic diameter trees, e.g. `"5:10,14:50"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<String>,
    pub node_budget: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    pub folds: usize,
    /// Folds to run; empty means all of them.
    pub fold: Vec<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            data_dir: None,
            synthetic: None,
            node_budget: skipnas_core::data::DEFAULT_NODE_BUDGET,
            subsample: None,
            folds: 10,
            fold: Vec::new(),
        }
    }
}

impl DataConfig {
    pub fn selected_folds(&self) -> Result<Vec<usize>> {
        if self.folds < 2 {
            return Err(UsageError(format!("need at least 2 folds, got {}", self.folds)).into());
        }
        if self.fold.is_empty() {
            return Ok((0..self.folds).collect());
        }
        if let Some(bad) = self.fold.iter().find(|&&f| f >= self.folds) {
            return Err(UsageError(format!("fold {bad} out of range for {} folds", self.folds)).into());
        }
        let mut f = self.fold.clone();
        f.sort_unstable();
        f.dedup();
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub variant: Variant,
    pub b: usize,
    pub c: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_lr: f64,
    pub alpha_lr: f64,
    pub weight_decay: f64,
    pub temperature: TemperatureSchedule,
}

impl Default for SearchSection {
    fn default() -> Self {
        let s = skipnas_core::search::SearchConfig::default();
        Self {
            variant: Variant::Full,
            b: 8,
            c: 1,
            hidden: 32,
            epochs: s.epochs,
            batch_size: s.batch_size,
            weight_lr: s.weight_lr,
            alpha_lr: s.alpha_lr,
            weight_decay: s.weight_decay,
            temperature: s.temperature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub trials: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
    pub lr_min: f64,
    pub lr_max: f64,
    pub optimizers: Vec<OptimizerKind>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let space = TrialSpace::default();
        Self {
            trials: space.budget,
            epochs: 100,
            batch_size: 64,
            weight_decay: 0.0,
            hidden: space.hidden,
            dropout: space.dropout,
            lr_min: space.lr.0,
            lr_max: space.lr.1,
            optimizers: space.optimizers,
        }
    }
}

impl TrainSection {
    pub fn space(&self) -> TrialSpace {
        TrialSpace {
            hidden: self.hidden.clone(),
            dropout: self.dropout.clone(),
            lr: (self.lr_min, self.lr_max),
            optimizers: self.optimizers.clone(),
            budget: self.trials,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Writes `config.toml` into `dir`, creating it.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("config.toml");
        std::fs::write(&path, self.to_toml()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn out_dir(&self, command: &str, dataset: &str) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(format!("{command}-{dataset}-seed{}", self.seed)))
    }
}
