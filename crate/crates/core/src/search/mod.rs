//! Bi-level search, derivation, final training and tuning.

mod bilevel;
mod derive;
mod train;
mod tune;

pub use bilevel::{bilevel_step, run_search, BilevelOptimizers, EpochMetrics, SearchConfig, SearchOutcome, StepLosses};
pub use derive::{derive_architecture, derive_raw, repair_architecture};
pub use train::{accuracy, train_final, train_final_model, HyperParams, OptimizerKind, TrainEpoch, TrainOutcome, TrainSetup, TrainedModel};
pub use tune::{tune_hyperparams, Trial, TrialSpace, TuneOutcome};
