pub mod analysis;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod ops;
pub mod rng;
pub mod search;
pub mod supernet;

pub use error::{Error, Result};
