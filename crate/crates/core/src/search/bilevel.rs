use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::derive::{derive_architecture, derive_raw};
use crate::autodiff::{Adam, AdamConfig, Optimizer, ParamGroup, ParamStore, Tape, TrainMask};
use crate::data::{batches, Fold, GraphBatch, GraphRecord};
use crate::error::{Error, Result};
use crate::ops::Dropout;
use crate::rng::{self, SeedStreams};
use crate::supernet::{Architecture, Mode, NoiseSource, Provenance, SuperNet, TemperatureSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_lr: f64,
    pub weight_decay: f64,
    pub alpha_lr: f64,
    pub temperature: TemperatureSchedule,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            weight_lr: 0.005,
            weight_decay: 5e-4,
            alpha_lr: 0.01,
            temperature: TemperatureSchedule::default(),
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("search needs at least one epoch".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.weight_lr > 0.0 && self.alpha_lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rates must be positive, got W {} and α {}",
                self.weight_lr, self.alpha_lr
            )));
        }
        self.temperature.validate()
    }
}

/// One optimizer per parameter group.
#[derive(Debug, Clone)]
pub struct BilevelOptimizers {
    pub weights: Adam,
    pub alphas: Adam,
}

impl BilevelOptimizers {
    pub fn new(config: &SearchConfig) -> Self {
        Self {
            weights: Adam::new(AdamConfig {
                weight_decay: config.weight_decay,
                ..AdamConfig::with_lr(config.weight_lr)
            }),
            alphas: Adam::new(AdamConfig::with_lr(config.alpha_lr)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub train_loss: f64,
    pub val_loss: f64,
}

fn diverged(net: &SuperNet, store: &ParamStore, temperature: f64, epoch: usize, what: &str) -> Error {
    Error::Diverged(format!(
        "{what} at epoch {epoch} (λ = {temperature:.4}, |W| = {:.4e}, |α| = {:.4e})",
        store.norm(&net.weight_ids()),
        store.norm(&net.alpha_ids()),
    ))
}

/// Cross-entropy of a relaxed forward, differentiated for `group` only.
fn group_step(
    net: &SuperNet,
    store: &mut ParamStore,
    optimizer: &mut Adam,
    group: ParamGroup,
    batch: &GraphBatch,
    temperature: f64,
    noise: &mut NoiseSource,
    epoch: usize,
) -> Result<f64> {
    let tape = Tape::new(TrainMask::Only(group));
    let loss = net
        .forward(&tape, store, batch, Mode::Relaxed { temperature, noise }, &mut Dropout::disabled())
        .and_then(|out| out.logits.cross_entropy(batch.labels()));
    let loss = match loss {
        Ok(l) if l.scalar().is_finite() => l,
        Ok(_) | Err(Error::NonFinite { .. }) => return Err(diverged(net, store, temperature, epoch, "non-finite loss")),
        Err(e) => return Err(e),
    };
    let grads = tape.backward(loss)?;
    store.zero_grads();
    store.accumulate(&grads);
    let ids = match group {
        ParamGroup::Weights => net.weight_ids(),
        ParamGroup::Architecture => net.alpha_ids(),
    };
    optimizer.step(store, &ids)?;
    Ok(loss.scalar())
}

/// One weight update on `train` with α frozen, then one α update on `val`
/// with the weights frozen.
#[allow(clippy::too_many_arguments)]
pub fn bilevel_step(
    net: &SuperNet,
    store: &mut ParamStore,
    optimizers: &mut BilevelOptimizers,
    train: &GraphBatch,
    val: &GraphBatch,
    temperature: f64,
    noise: &mut NoiseSource,
    epoch: usize,
) -> Result<StepLosses> {
    let train_loss = group_step(net, store, &mut optimizers.weights, ParamGroup::Weights, train, temperature, noise, epoch)?;
    let val_loss = group_step(net, store, &mut optimizers.alphas, ParamGroup::Architecture, val, temperature, noise, epoch)?;
    Ok(StepLosses { train_loss, val_loss })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub architecture: Architecture,
    /// Derivation before repair.
    pub raw: Architecture,
    pub history: Vec<EpochMetrics>,
}

/// Runs the alternating search on one fold and derives the architecture from
/// the final logits. Validation batches cycle independently of training
/// batches.
pub fn run_search(
    net: &SuperNet,
    store: &mut ParamStore,
    records: &[GraphRecord],
    fold: &Fold,
    config: &SearchConfig,
    provenance: Provenance,
) -> Result<SearchOutcome> {
    config.validate()?;
    if fold.train.is_empty() || fold.validation.is_empty() {
        return Err(Error::Invalid("search needs non-empty train and validation splits".into()));
    }
    let seeds = SeedStreams::new(config.seed);
    let mut data_rng = rng::rng(seeds.data());
    let mut noise = NoiseSource::sampled(seeds.gumbel());
    let mut optimizers = BilevelOptimizers::new(config);
    let mut val_order = fold.validation.clone();
    val_order.shuffle(&mut data_rng);
    let val_batches = batches(records, &val_order, config.batch_size)?;
    let mut val_cursor = 0;

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let temperature = config.temperature.at(epoch, config.epochs);
        let mut order = fold.train.clone();
        order.shuffle(&mut data_rng);
        let (mut train_sum, mut val_sum, mut steps) = (0.0, 0.0, 0usize);
        for train in batches(records, &order, config.batch_size)? {
            let val = &val_batches[val_cursor % val_batches.len()];
            val_cursor += 1;
            let l = bilevel_step(net, store, &mut optimizers, &train, val, temperature, &mut noise, epoch)?;
            train_sum += l.train_loss;
            val_sum += l.val_loss;
            steps += 1;
        }
        history.push(EpochMetrics {
            epoch,
            train_loss: train_sum / steps as f64,
            val_loss: val_sum / steps as f64,
            temperature,
        });
    }

    let provenance = Provenance {
        epoch: config.epochs,
        seed: config.seed,
        hidden: net.config().hidden,
        aggregation: net.config().aggregation,
        ..provenance
    };
    let raw = derive_raw(net, store, provenance.clone());
    let architecture = derive_architecture(net, store, provenance);
    Ok(SearchOutcome {
        architecture,
        raw,
        history,
    })
}
