//! Dense tensors, reverse-mode differentiation and the Adam optimizer.

mod adam;
mod conv;
pub mod gradcheck;
mod ops;
mod real;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::conv2d;
pub use ops::{resample2, subsample2, Resample};
pub use real::Real;
pub use tape::{Function, Gradients, Tape, Var};
pub use tensor::Tensor;
