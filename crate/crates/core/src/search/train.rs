use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdaGrad, Adam, AdamConfig, Optimizer, ParamStore, Tape, TrainMask};
use crate::data::{batches, Fold, GraphRecord};
use crate::error::{Error, Result};
use crate::ops::{AggregationKind, Dropout};
use crate::rng::{self, SeedStreams};
use crate::supernet::{Architecture, Mode, SuperNet, SuperNetConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    AdaGrad,
}

impl OptimizerKind {
    pub fn build(self, lr: f64, weight_decay: f64) -> Box<dyn Optimizer + Send> {
        match self {
            OptimizerKind::Adam => Box::new(Adam::new(AdamConfig {
                weight_decay,
                ..AdamConfig::with_lr(lr)
            })),
            OptimizerKind::AdaGrad => Box::new(AdaGrad::new(lr, weight_decay)),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::AdaGrad => "adagrad",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Self::Adam),
            "adagrad" => Ok(Self::AdaGrad),
            _ => Err(Error::Config(format!("unknown optimizer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            hidden: 64,
            dropout: 0.0,
            lr: 0.01,
            optimizer: OptimizerKind::Adam,
            weight_decay: 0.0,
            epochs: 100,
            batch_size: 64,
        }
    }
}

/// Everything besides the architecture and hyperparameters that fixes the
/// trained network.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSetup {
    pub aggregation: AggregationKind,
    pub input_dim: usize,
    pub classes: usize,
    pub sort_k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainEpoch {
    pub epoch: usize,
    /// Mean training loss of the epoch; 0 for the untrained evaluation.
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Epoch of the selected checkpoint; 0 is the untrained network.
    pub best_epoch: usize,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub history: Vec<TrainEpoch>,
}

impl TrainOutcome {
    pub fn max_train_acc(&self) -> f64 {
        self.history.iter().map(|e| e.train_acc).fold(0.0, f64::max)
    }
}

/// Fraction of `indices` classified correctly in evaluation mode.
pub fn accuracy(net: &SuperNet, store: &ParamStore, arch: &Architecture, records: &[GraphRecord], indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for batch in batches(records, indices, 256)? {
        let tape = Tape::new(TrainMask::Frozen);
        let out = net.forward(&tape, store, &batch, Mode::Discrete(arch), &mut Dropout::disabled())?;
        let logits = out.logits.value();
        for (row, &label) in logits.rows().into_iter().zip(batch.labels()) {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            correct += usize::from(best == label);
        }
    }
    Ok(correct as f64 / indices.len() as f64)
}

/// Network and weights of a selected checkpoint.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub net: SuperNet,
    pub store: ParamStore,
}

/// Trains `arch` from scratch on the fold's training split and keeps the
/// epoch with the best validation accuracy (earlier epoch on ties).
pub fn train_final(arch: &Architecture, records: &[GraphRecord], fold: &Fold, hyper: &HyperParams, setup: &TrainSetup) -> Result<TrainOutcome> {
    train_final_model(arch, records, fold, hyper, setup).map(|(outcome, _)| outcome)
}

/// [`train_final`] that also returns the selected checkpoint.
pub fn train_final_model(
    arch: &Architecture,
    records: &[GraphRecord],
    fold: &Fold,
    hyper: &HyperParams,
    setup: &TrainSetup,
) -> Result<(TrainOutcome, TrainedModel)> {
    if hyper.batch_size == 0 || hyper.hidden == 0 || !(hyper.lr > 0.0) {
        return Err(Error::Config(format!("invalid hyperparameters {hyper:?}")));
    }
    let config = SuperNetConfig {
        hidden: hyper.hidden,
        aggregation: setup.aggregation,
        sort_k: setup.sort_k,
        seed: setup.seed,
        ..SuperNetConfig::new(arch.variant, arch.b, arch.c, setup.input_dim, setup.classes)
    };
    let (net, mut store) = SuperNet::build(config)?;
    let active = net.active_params(arch)?;
    let mut optimizer = hyper.optimizer.build(hyper.lr, hyper.weight_decay);
    let seeds = SeedStreams::new(setup.seed);
    let mut data_rng = rng::rng(seeds.data());
    let mut dropout = Dropout::new(hyper.dropout, seeds.gumbel());

    let evaluate = |store: &ParamStore, epoch: usize, train_loss: f64| -> Result<TrainEpoch> {
        Ok(TrainEpoch {
            epoch,
            train_loss,
            train_acc: accuracy(&net, store, arch, records, &fold.train)?,
            val_acc: accuracy(&net, store, arch, records, &fold.validation)?,
            test_acc: accuracy(&net, store, arch, records, &fold.test)?,
        })
    };

    let mut history = vec![evaluate(&store, 0, 0.0)?];
    let mut best = 0;
    let mut checkpoint = store.clone();
    for epoch in 1..=hyper.epochs {
        let mut order = fold.train.clone();
        order.shuffle(&mut data_rng);
        let (mut sum, mut steps) = (0.0, 0usize);
        for batch in batches(records, &order, hyper.batch_size)? {
            let tape = Tape::new(TrainMask::All);
            let out = net.forward(&tape, &store, &batch, Mode::Discrete(arch), &mut dropout);
            let loss = match out.and_then(|o| o.logits.cross_entropy(batch.labels())) {
                Ok(l) if l.scalar().is_finite() => l,
                Ok(_) | Err(Error::NonFinite { .. }) => {
                    return Err(Error::Diverged(format!(
                        "non-finite loss at epoch {epoch} (lr = {}, |W| = {:.4e})",
                        hyper.lr,
                        store.norm(&active)
                    )))
                }
                Err(e) => return Err(e),
            };
            let grads = tape.backward(loss)?;
            store.zero_grads();
            store.accumulate(&grads);
            optimizer.step(&mut store, &active)?;
            sum += loss.scalar();
            steps += 1;
        }
        history.push(evaluate(&store, epoch, sum / steps.max(1) as f64)?);
        if history[epoch].val_acc > history[best].val_acc {
            best = epoch;
            checkpoint = store.clone();
        }
    }

    let sel = &history[best];
    let outcome = TrainOutcome {
        best_epoch: sel.epoch,
        train_acc: sel.train_acc,
        val_acc: sel.val_acc,
        test_acc: sel.test_acc,
        history,
    };
    Ok((outcome, TrainedModel { net, store: checkpoint }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::stratified_kfold;
    use crate::supernet::{preset_architecture, Preset};
    use ndarray::Array2;

    fn toy() -> Vec<GraphRecord> {
        (0..24)
            .map(|i| {
                let n = 3 + i % 4;
                let label = i % 2;
                let v = if label == 0 { 1.0 } else { -1.0 };
                let edges: Vec<_> = (1..n).map(|u| (u - 1, u)).collect();
                GraphRecord::new(n, edges, Array2::from_elem((n, 1), v), label).unwrap()
            })
            .collect()
    }

    fn setup() -> TrainSetup {
        TrainSetup {
            aggregation: AggregationKind::Gcn,
            input_dim: 1,
            classes: 2,
            sort_k: 3,
            seed: 9,
        }
    }

    #[test]
    fn zero_epochs_reports_the_untrained_network() {
        let recs = toy();
        let plan = stratified_kfold(&recs.iter().map(|r| r.label()).collect::<Vec<_>>(), 4, 1).unwrap();
        let arch = preset_architecture(Preset::GcnStack(2), 2).unwrap();
        let hyper = HyperParams { epochs: 0, hidden: 8, ..HyperParams::default() };
        let out = train_final(&arch, &recs, plan.fold(0).unwrap(), &hyper, &setup()).unwrap();
        assert_eq!(out.best_epoch, 0);
        assert_eq!(out.history.len(), 1);

        let config = SuperNetConfig {
            hidden: 8,
            sort_k: 3,
            seed: 9,
            ..SuperNetConfig::full(2, 1, 2)
        };
        let (net, store) = SuperNet::build(config).unwrap();
        let untrained = accuracy(&net, &store, &arch, &recs, &plan.fold(0).unwrap().test).unwrap();
        assert_eq!(out.test_acc, untrained);
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let recs = toy();
        let plan = stratified_kfold(&recs.iter().map(|r| r.label()).collect::<Vec<_>>(), 4, 1).unwrap();
        let arch = preset_architecture(Preset::GcnStack(1), 1).unwrap();
        let hyper = HyperParams { epochs: 15, hidden: 8, batch_size: 8, ..HyperParams::default() };
        let a = train_final(&arch, &recs, plan.fold(0).unwrap(), &hyper, &setup()).unwrap();
        let b = train_final(&arch, &recs, plan.fold(0).unwrap(), &hyper, &setup()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.max_train_acc(), 1.0);
        assert!(a.history.iter().all(|e| e.val_acc <= a.val_acc));
    }
}
