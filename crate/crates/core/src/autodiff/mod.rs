//! Dense reverse-mode automatic differentiation.

mod gradcheck;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::{finite_diff_check, relative_error, GradCheckConfig, GradCheckReport, WorstCoordinate};
pub use optim::{AdaGrad, Adam, AdamConfig, AdamState, Optimizer};
pub use tape::{Reduce, Tape, TrainMask, Var};
pub use tensor::{BlockDiagonal, Gradients, ParamGroup, ParamId, ParamStore, Parameter, Segments, Tensor};
