//! Candidate operations of the search space.

mod aggregate;
mod layers;
mod merge;
mod readout;

pub use aggregate::{AggregationKind, AggregationLayer};
pub use layers::{Dropout, Linear, LstmCell, Mlp2};
pub use merge::{MergeKind, MergeParams};
pub use readout::{sort_pool_k, ReadoutKind, ReadoutParams, SET2SET_STEPS};
