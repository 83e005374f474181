//! Hierarchical Koopman diffusion at desk scale.
//!
//! An analytic Gaussian-mixture teacher integrates the probability-flow ODE to
//! produce denoising trajectories. A hierarchical encoder lifts noisy images
//! into per-level latent observables, per-location block-diagonal generators
//! carry them from any time to the clean endpoint in closed form, and a
//! decoder maps the result back to image space, so sampling takes one
//! network evaluation. The spectral toolkit reads the learned generators for
//! band masking, cumulative-effect tracking and frequency-aware editing.
//!
//! Modules, bottom up:
//!
//! - [`numcore`]: tensors, reverse-mode differentiation, Adam
//! - [`koopman`]: block exponentials, evolution, spectra, masking
//! - [`netarch`]: encoder/decoder and the parameter table
//! - [`teacher`]: mixture score, RK4 probability-flow solver, datasets
//! - [`trainer`]: losses, the training loop and the one-step sampler
//! - [`analysis`]: cumulative effect, band decoding, editing, FD-lite
//! - [`persist`]: binary dataset/checkpoint formats, CSV and PNG output
//! - [`cli`]: the `hkd` command line

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod analysis;
pub mod cli;
pub mod error;
pub mod koopman;
pub mod netarch;
pub mod numcore;
pub mod persist;
pub mod teacher;
pub mod trainer;

pub use error::{HkdError, Result};
