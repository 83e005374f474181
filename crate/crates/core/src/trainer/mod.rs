//! Trajectory-consistency training and one-step sampling.
//!
//! Every iteration draws a batch of teacher trajectories and a handful of
//! stored grid times (always including `T`), maps each noisy state straight
//! to the clean endpoint through the model, and penalises the distance to the
//! trajectory's own `x_eps` under a weighted sum of pixel MSE and a frozen
//! random-feature perceptual distance.

mod loss;
mod perceptual;
mod sample;
mod train;

pub use loss::{distance_on, lambda1_schedule, trajectory_consistency_loss, LossValue, LossWeights, Predictor, TrajectorySlice};
pub use perceptual::{PerceptualExtractor, FEATURE_CHANNELS};
pub use sample::{draw_prior, loss_equivalence_probe, map_chunks, one_step_sample, pearson, predict_from_noise, ProbeReport, SAMPLE_CHUNK};
pub use train::{check_compatible, train, IterationInfo, MetricsRow, TrainConfig, TrainHooks, TrainOutcome, LAMBDA2};
