//! The relaxed search space and the discrete designs derived from it.

mod architecture;
mod config;
mod gumbel;
mod net;

pub use architecture::{preset_architecture, reference_architecture, Architecture, Preset, Provenance};
pub use config::{Anneal, Layout, SuperNetConfig, TemperatureSchedule, Variant};
pub use gumbel::{gumbel_sample, gumbel_softmax, gumbel_weights, NoiseSource};
pub use net::{CellWeights, Forward, Mode, ParamCounts, SuperNet};
