//! Analytic Gaussian-mixture teacher.
//!
//! Under the variance-exploding schedule the noised marginal of an isotropic
//! mixture stays a mixture with variances `s_i^2 + t^2`, so its score is
//! available in closed form and the probability-flow ODE can be integrated
//! with RK4 to produce denoising trajectories.

mod dataset;
mod gmm;
mod ode;
mod schedule;

pub use dataset::{generate_dataset, prior_sample, TrajectoryDataset};
pub use gmm::{gmm_score, GmmComponent, GmmSpec};
pub use ode::pf_ode_solve;
pub use schedule::Schedule;
