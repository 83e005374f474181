use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HkdError, Result};
use crate::netarch::{Hkd, ParamGroup};
use crate::numcore::{adam_step, AdamConfig, AdamState, Tape, Tensor};
use crate::teacher::TrajectoryDataset;

use super::loss::{distance_on, lambda1_schedule, LossWeights};
use super::perceptual::PerceptualExtractor;

/// Weight of the perceptual term.
pub const LAMBDA2: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Intermediate times drawn per iteration, in addition to `T`.
    pub samples_per_iter: usize,
    pub epochs: usize,
    /// Optimizer steps per epoch; 0 means `ceil(n_traj / batch_size)`.
    pub steps_per_epoch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Multiplicative parameter decay per epoch.
    pub decay: f64,
    pub seed: u64,
    pub log_interval: usize,
    pub perceptual_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            samples_per_iter: 4,
            epochs: 10,
            steps_per_epoch: 0,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            decay: 0.95,
            seed: 0,
            log_interval: 10,
            perceptual_seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HkdError::Config(m.into()));
        if self.batch_size == 0 {
            return bad("train.batch_size must be positive");
        }
        if self.samples_per_iter == 0 {
            return bad("train.samples_per_iter must be at least 1");
        }
        if !(self.lr > 0.0) {
            return bad("train.lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return bad("train.beta1/beta2 must lie in [0,1) and train.adam_eps be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("train.decay must lie in (0, 1]");
        }
        if self.log_interval == 0 {
            return bad("train.log_interval must be positive");
        }
        Ok(())
    }

    pub fn resolved_steps_per_epoch(&self, n_traj: usize) -> usize {
        if self.steps_per_epoch > 0 {
            self.steps_per_epoch
        } else {
            n_traj.div_ceil(self.batch_size).max(1)
        }
    }

    pub fn extractor(&self, image_channels: usize) -> PerceptualExtractor<f32> {
        PerceptualExtractor::new(image_channels, self.perceptual_seed)
    }
}

/// One line of the metrics log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub iter: usize,
    pub epoch: usize,
    pub lambda1: f64,
    pub loss_total: f64,
    pub loss_mse: f64,
    pub loss_feat: f64,
    pub grad_norm_theta: f64,
    pub grad_norm_phi: f64,
    pub grad_norm_a: f64,
}

/// What the loop reports after each optimizer step.
#[derive(Clone, Debug)]
pub struct IterationInfo<'a> {
    pub row: MetricsRow,
    /// Grid indices of this step's sampled times; index 0 is `T`.
    pub grid_indices: &'a [usize],
    /// Diffusion time of each sampled grid index.
    pub times: &'a [f64],
}

/// Observer hooks; the defaults do nothing.
pub trait TrainHooks {
    fn on_iteration(&mut self, _info: &IterationInfo<'_>) -> Result<()> {
        Ok(())
    }

    /// Called after epoch `epoch` (1-based) with the current model.
    fn on_epoch(&mut self, _epoch: usize, _model: &Hkd<f32>) -> Result<()> {
        Ok(())
    }
}

impl TrainHooks for () {}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Hkd<f32>,
    pub metrics: Vec<MetricsRow>,
    pub iterations: usize,
}

/// Rejects datasets whose geometry or schedule disagrees with the model.
pub fn check_compatible(model: &Hkd<f32>, ds: &TrajectoryDataset) -> Result<()> {
    let want = model.config.image_shape();
    let have = ds.image_shape();
    if want != have {
        return Err(HkdError::Config(format!(
            "dataset images are {have:?} (C,H,W) but the model expects {want:?}"
        )));
    }
    let close = |a: f32, b: f64| (a as f64 - b).abs() <= 1e-6 * b.abs().max(1.0);
    if !close(ds.epsilon, model.config.epsilon) || !close(ds.horizon, model.config.horizon) {
        return Err(HkdError::Config(format!(
            "dataset schedule [{}, {}] differs from model schedule [{}, {}]",
            ds.epsilon, ds.horizon, model.config.epsilon, model.config.horizon
        )));
    }
    ds.validate()
}

struct BatchCursor {
    order: Vec<usize>,
    pos: usize,
}

impl BatchCursor {
    fn next(&mut self, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..n)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order.shuffle(rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

/// Runs the optimisation loop on a copy of `model`.
pub fn train(model: &Hkd<f32>, cfg: &TrainConfig, ds: &TrajectoryDataset, hooks: &mut dyn TrainHooks) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_compatible(model, ds)?;
    let mut model = model.clone();
    let steps = cfg.resolved_steps_per_epoch(ds.n_traj());
    let adam = AdamConfig {
        lr: cfg.lr,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.adam_eps,
        decay: AdamConfig::per_step_decay(cfg.decay, steps),
    };
    let extractor = cfg.extractor(model.config.image_channels);
    let mut state = AdamState::new(model.params.values());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cursor = BatchCursor { order: (0..ds.n_traj()).collect(), pos: ds.n_traj() };
    let last_grid = ds.n_grid() - 1;
    let total_iters = cfg.epochs * steps;
    let mut metrics = Vec::new();
    let mut iter = 0;
    for epoch in 0..cfg.epochs {
        let weights = LossWeights { lambda1: lambda1_schedule(epoch, cfg.epochs), lambda2: LAMBDA2 };
        for _ in 0..steps {
            let trajs = cursor.next(cfg.batch_size, &mut rng);
            let mut grid = vec![0];
            grid.extend((0..cfg.samples_per_iter).map(|_| rng.random_range(1..=last_grid)));

            let b = trajs.len();
            let mut inputs = Vec::with_capacity(grid.len());
            let mut times = Vec::with_capacity(grid.len() * b);
            for &k in &grid {
                inputs.push(ds.gather(&trajs, &vec![k; b])?);
                times.extend(std::iter::repeat_n(ds.times[k] as f64, b));
            }
            let target_one = ds.gather(&trajs, &vec![last_grid; b])?;
            let targets = Tensor::stack(&vec![target_one; grid.len()])?;

            let mut tape = Tape::new();
            let bound = model.bind(&mut tape, true);
            let x = tape.constant(Tensor::stack(&inputs)?);
            let y = tape.constant(targets);
            let pred = model.hkd_forward_on(&mut tape, &bound, x, &times)?;
            let (total, mse, feat) = distance_on(&mut tape, pred, y, weights, &extractor)?;
            let loss = tape.value(total).item() as f64;
            if !loss.is_finite() {
                return Err(HkdError::NonFinite(format!("loss is {loss} at iteration {iter}")));
            }
            let grads = tape.backward(total)?;
            let grads: Vec<Tensor<f32>> = bound.vars.iter().map(|&v| grads.get_or_zeros(&tape, v)).collect();
            let mut norms = [0.0f64; 3];
            for (g, group) in grads.iter().zip(model.params.groups()) {
                let slot = match group {
                    ParamGroup::Encoder => 0,
                    ParamGroup::Decoder => 1,
                    ParamGroup::Koopman => 2,
                };
                norms[slot] += g.sq_norm();
            }
            if !norms.iter().all(|n| n.is_finite()) {
                return Err(HkdError::NonFinite(format!("gradient is not finite at iteration {iter}")));
            }
            let row = MetricsRow {
                iter,
                epoch,
                lambda1: weights.lambda1,
                loss_total: loss,
                loss_mse: tape.value(mse).item() as f64,
                loss_feat: tape.value(feat).item() as f64,
                grad_norm_theta: norms[0].sqrt(),
                grad_norm_phi: norms[1].sqrt(),
                grad_norm_a: norms[2].sqrt(),
            };
            drop(tape);
            adam_step(model.params.values_mut(), &grads, &mut state, &adam)?;
            model.clamp_koopman();
            if iter % cfg.log_interval == 0 || iter + 1 == total_iters {
                metrics.push(row);
            }
            let grid_times: Vec<f64> = grid.iter().map(|&k| ds.times[k] as f64).collect();
            hooks.on_iteration(&IterationInfo { row, grid_indices: &grid, times: &grid_times })?;
            iter += 1;
        }
        hooks.on_epoch(epoch + 1, &model)?;
    }
    Ok(TrainOutcome { model, metrics, iterations: iter })
}
