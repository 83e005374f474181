//! Hierarchical encoder and skip-fusing decoder.
//!
//! The encoder stacks two 3x3 convolutions per level, descending between
//! levels by 2x2 average pooling, and reads each level's observables through
//! a 1x1 head. Time enters as a constant extra input channel `t / T`. The
//! decoder starts at the bottleneck, injects each level's latents through a
//! 1x1 convolution, and fuses them with the upsampled coarser features by
//! addition.

mod config;
mod model;
mod params;

pub use config::{Activation, ModelConfig};
pub use model::{BoundParams, Hkd};
pub use params::{analytic_param_count, param_specs, ParamGroup, ParamSpec, ParamStore};
