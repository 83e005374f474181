use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{shape_err, HkdError, Result};
use crate::numcore::Tensor;

use super::gmm::GmmSpec;
use super::ode::rk4;
use super::schedule::Schedule;

/// Teacher trajectories sampled on a shared decreasing time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    pub epsilon: f32,
    pub horizon: f32,
    pub schedule_tag: u8,
    /// `[T = t_0 > ... > t_S = epsilon]`.
    pub times: Vec<f32>,
    /// `[N, S+1, C, H, W]`.
    pub states: Tensor<f32>,
}

impl TrajectoryDataset {
    pub fn new(epsilon: f32, horizon: f32, schedule_tag: u8, times: Vec<f32>, states: Tensor<f32>) -> Result<Self> {
        let ds = Self { epsilon, horizon, schedule_tag, times, states };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.states.shape();
        if s.len() != 5 || s[1] != self.times.len() {
            return shape_err(format!(
                "states must be [N, {}, C, H, W], got {s:?}",
                self.times.len()
            ));
        }
        if self.schedule_tag != Schedule::VE_TAG {
            return Err(HkdError::Config(format!("unknown schedule tag {}", self.schedule_tag)));
        }
        if self.times.len() < 2
            || self.times[0] != self.horizon
            || *self.times.last().expect("non-empty") != self.epsilon
            || self.times.windows(2).any(|w| !(w[0] > w[1]))
        {
            return Err(HkdError::Config(format!(
                "times must decrease strictly from {} to {}, got {:?}",
                self.horizon, self.epsilon, self.times
            )));
        }
        Ok(())
    }

    pub fn n_traj(&self) -> usize {
        self.states.shape()[0]
    }

    pub fn n_grid(&self) -> usize {
        self.times.len()
    }

    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.states.shape();
        [s[2], s[3], s[4]]
    }

    fn image_len(&self) -> usize {
        self.image_shape().iter().product()
    }

    /// One state `[C,H,W]`.
    pub fn state(&self, traj: usize, grid: usize) -> Tensor<f32> {
        let d = self.image_len();
        let off = (traj * self.n_grid() + grid) * d;
        Tensor::new(self.image_shape().to_vec(), self.states.data()[off..off + d].to_vec()).expect("sized")
    }

    /// States `[B,C,H,W]` for trajectory `trajs[b]` at grid index `grids[b]`.
    pub fn gather(&self, trajs: &[usize], grids: &[usize]) -> Result<Tensor<f32>> {
        if trajs.len() != grids.len() || trajs.is_empty() {
            return Err(HkdError::InvalidArgument("gather needs equal, non-empty index lists".into()));
        }
        let d = self.image_len();
        let mut data = Vec::with_capacity(trajs.len() * d);
        for (&n, &k) in trajs.iter().zip(grids) {
            if n >= self.n_traj() || k >= self.n_grid() {
                return Err(HkdError::InvalidArgument(format!("state ({n}, {k}) out of range")));
            }
            let off = (n * self.n_grid() + k) * d;
            data.extend_from_slice(&self.states.data()[off..off + d]);
        }
        let [c, h, w] = self.image_shape();
        Tensor::new(vec![trajs.len(), c, h, w], data)
    }
}

/// Draws `n` starting points `x_T ~ N(mean image, (s_bar^2 + T^2) I)`.
pub fn prior_sample(gmm: &GmmSpec, schedule: &Schedule, n: usize, rng: &mut impl Rng) -> Tensor<f64> {
    let mean = gmm.mean_image();
    let sbar = gmm.mean_std();
    let sd = (sbar * sbar + schedule.horizon * schedule.horizon).sqrt();
    let [c, h, w] = gmm.shape();
    let mut data = Vec::with_capacity(n * mean.numel());
    for _ in 0..n {
        for &m in mean.data() {
            let z: f64 = rng.sample(StandardNormal);
            data.push(m + sd * z);
        }
    }
    Tensor::new(vec![n, c, h, w], data).expect("sized")
}

fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Integrates `n_traj` prior draws from `T` to `epsilon`, recording `n_grid`
/// uniformly spaced states. Trajectory `i` depends only on `(seed, i)`.
pub fn generate_dataset(
    gmm: &GmmSpec,
    schedule: &Schedule,
    n_traj: usize,
    n_grid: usize,
    n_steps_per_grid: usize,
    seed: u64,
) -> Result<TrajectoryDataset> {
    schedule.validate()?;
    if n_traj == 0 || n_steps_per_grid == 0 {
        return Err(HkdError::InvalidArgument("n_traj and n_steps_per_grid must be positive".into()));
    }
    let grid = schedule.grid(n_grid)?;
    let d = gmm.dim();
    let trajectories: Vec<Vec<f32>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(seed, i);
            let mut x = prior_sample(gmm, schedule, 1, &mut rng).into_data();
            let mut out = Vec::with_capacity(n_grid * d);
            out.extend(x.iter().map(|&v| v as f32));
            for w in grid.windows(2) {
                rk4(gmm, schedule, &mut x, w[0], w[1], n_steps_per_grid, |_| {});
                out.extend(x.iter().map(|&v| v as f32));
            }
            out
        })
        .collect();
    let [c, h, w] = gmm.shape();
    let states = Tensor::new(vec![n_traj, n_grid, c, h, w], trajectories.concat())?;
    TrajectoryDataset::new(
        schedule.epsilon as f32,
        schedule.horizon as f32,
        Schedule::VE_TAG,
        grid.iter().map(|&t| t as f32).collect(),
        states,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_grid() {
        let g = GmmSpec::procedural([1, 4, 4], 2, 0.3, 1).unwrap();
        let ds = generate_dataset(&g, &Schedule::default(), 1, 2, 4, 0).unwrap();
        assert_eq!(ds.times, vec![3.0, 0.02]);
        assert_eq!(ds.states.shape(), &[1, 2, 1, 4, 4]);
    }

    #[test]
    fn deterministic_per_seed() {
        let g = GmmSpec::procedural([1, 4, 4], 2, 0.3, 1).unwrap();
        let a = generate_dataset(&g, &Schedule::default(), 3, 3, 4, 9).unwrap();
        let b = generate_dataset(&g, &Schedule::default(), 3, 3, 4, 9).unwrap();
        let c = generate_dataset(&g, &Schedule::default(), 3, 3, 4, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn gather_picks_states() {
        let g = GmmSpec::procedural([1, 4, 4], 2, 0.3, 1).unwrap();
        let ds = generate_dataset(&g, &Schedule::default(), 2, 3, 2, 0).unwrap();
        let b = ds.gather(&[1, 0], &[2, 1]).unwrap();
        assert_eq!(b.select(0).unwrap().data(), ds.state(1, 2).data());
        assert_eq!(b.select(1).unwrap().data(), ds.state(0, 1).data());
        assert!(ds.gather(&[2], &[0]).is_err());
    }
}
