use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::train::{train_final, HyperParams, OptimizerKind, TrainSetup};
use crate::data::{Fold, GraphRecord};
use crate::error::{Error, Result};
use crate::rng;
use crate::supernet::Architecture;

/// Random-search space for the final training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpace {
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
    /// Inclusive range, sampled uniformly.
    pub lr: (f64, f64),
    pub optimizers: Vec<OptimizerKind>,
    pub budget: usize,
}

impl Default for TrialSpace {
    fn default() -> Self {
        Self {
            hidden: vec![8, 16, 32, 64, 128, 256],
            dropout: (0..10).map(|i| i as f64 / 10.0).collect(),
            lr: (0.001, 0.025),
            optimizers: vec![OptimizerKind::Adam, OptimizerKind::AdaGrad],
            budget: 20,
        }
    }
}

impl TrialSpace {
    /// A space holding only `hyper`.
    pub fn point(hyper: &HyperParams) -> Self {
        Self {
            hidden: vec![hyper.hidden],
            dropout: vec![hyper.dropout],
            lr: (hyper.lr, hyper.lr),
            optimizers: vec![hyper.optimizer],
            budget: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("trial budget must be at least 1".into()));
        }
        if self.hidden.is_empty() || self.dropout.is_empty() || self.optimizers.is_empty() {
            return Err(Error::Config("trial space has an empty dimension".into()));
        }
        if !(self.lr.0 > 0.0 && self.lr.0 <= self.lr.1) {
            return Err(Error::Config(format!("bad learning-rate range {:?}", self.lr)));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, base: &HyperParams, rng: &mut R) -> HyperParams {
        let lr = if self.lr.0 == self.lr.1 { self.lr.0 } else { rng.random_range(self.lr.0..=self.lr.1) };
        HyperParams {
            hidden: *self.hidden.choose(rng).expect("validated"),
            dropout: *self.dropout.choose(rng).expect("validated"),
            lr,
            optimizer: *self.optimizers.choose(rng).expect("validated"),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub hyper: HyperParams,
    pub best_epoch: usize,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub trials: Vec<Trial>,
    /// Index into `trials` of the best validation accuracy (earliest on ties).
    pub best: usize,
}

impl TuneOutcome {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

/// Samples `space.budget` configurations, trains each with [`train_final`]
/// and keeps the best one by validation accuracy.
pub fn tune_hyperparams(
    arch: &Architecture,
    records: &[GraphRecord],
    fold: &Fold,
    space: &TrialSpace,
    base: &HyperParams,
    setup: &TrainSetup,
    seed: u64,
) -> Result<TuneOutcome> {
    space.validate()?;
    let mut sampler = rng::rng(seed);
    let mut trials = Vec::with_capacity(space.budget);
    for index in 0..space.budget {
        let hyper = space.sample(base, &mut sampler);
        // trials share the initialization so they differ only in `hyper`
        let out = train_final(arch, records, fold, &hyper, setup)?;
        trials.push(Trial {
            index,
            hyper,
            best_epoch: out.best_epoch,
            train_acc: out.train_acc,
            val_acc: out.val_acc,
            test_acc: out.test_acc,
        });
    }
    let mut best = 0;
    for (i, t) in trials.iter().enumerate() {
        if t.val_acc > trials[best].val_acc {
            best = i;
        }
    }
    Ok(TuneOutcome { trials, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::stratified_kfold;
    use crate::ops::AggregationKind;
    use crate::supernet::{preset_architecture, Preset};
    use ndarray::Array2;

    fn toy() -> Vec<GraphRecord> {
        (0..18)
            .map(|i| {
                let n = 2 + i % 3;
                let v = if i % 2 == 0 { 0.5 } else { -0.5 };
                GraphRecord::new(n, (1..n).map(|u| (0, u)), Array2::from_elem((n, 1), v), i % 2).unwrap()
            })
            .collect()
    }

    fn run(space: &TrialSpace) -> TuneOutcome {
        let recs = toy();
        let plan = stratified_kfold(&recs.iter().map(|r| r.label()).collect::<Vec<_>>(), 3, 2).unwrap();
        let arch = preset_architecture(Preset::GcnStack(1), 1).unwrap();
        let base = HyperParams { epochs: 3, batch_size: 4, ..HyperParams::default() };
        let setup = TrainSetup {
            aggregation: AggregationKind::Gcn,
            input_dim: 1,
            classes: 2,
            sort_k: 2,
            seed: 4,
        };
        tune_hyperparams(&arch, &recs, plan.fold(1).unwrap(), space, &base, &setup, 8).unwrap()
    }

    #[test]
    fn samples_stay_inside_the_space() {
        let space = TrialSpace::default();
        let mut r = rng::rng(1);
        for _ in 0..200 {
            let h = space.sample(&HyperParams::default(), &mut r);
            assert!(space.hidden.contains(&h.hidden));
            assert!(space.dropout.contains(&h.dropout));
            assert!((0.001..=0.025).contains(&h.lr));
        }
    }

    #[test]
    fn budget_one_is_that_trial() {
        let space = TrialSpace { budget: 1, hidden: vec![8], ..TrialSpace::default() };
        let out = run(&space);
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.best, 0);
    }

    #[test]
    fn best_is_argmax_of_validation() {
        let space = TrialSpace { budget: 4, hidden: vec![4, 8], ..TrialSpace::default() };
        let out = run(&space);
        assert!(out.trials.iter().all(|t| t.val_acc <= out.best_trial().val_acc));
        assert!(out.trials[..out.best].iter().all(|t| t.val_acc < out.best_trial().val_acc));
    }

    #[test]
    fn collapsed_space_repeats_one_trial() {
        let hyper = HyperParams { hidden: 8, epochs: 3, batch_size: 4, ..HyperParams::default() };
        let space = TrialSpace { budget: 3, ..TrialSpace::point(&hyper) };
        let out = run(&space);
        assert!(out.trials.iter().all(|t| t.val_acc == out.trials[0].val_acc && t.hyper == out.trials[0].hyper));
        assert_eq!(out.best, 0);
    }

    #[test]
    fn empty_budget_rejected() {
        let space = TrialSpace { budget: 0, ..TrialSpace::default() };
        assert!(space.validate().is_err());
    }
}
