use crate::error::{HkdError, Result};
use crate::netarch::Hkd;
use crate::numcore::{Real, Tape, Tensor, Var};

use super::perceptual::PerceptualExtractor;

/// `10^(-3^(epoch / total))`.
pub fn lambda1_schedule(epoch: usize, total_epochs: usize) -> f64 {
    let x = if total_epochs == 0 { 0.0 } else { epoch.min(total_epochs) as f64 / total_epochs as f64 };
    10f64.powf(-(3f64.powf(x)))
}

/// Weights of `d(x, y) = lambda1 * MSE + lambda2 * perceptual`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Scalar loss together with its two unweighted components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub mse: f64,
    pub feat: f64,
}

/// Anything that maps a noisy batch at time `t` to a clean estimate.
pub trait Predictor<T: Real> {
    fn predict(&self, x_t: &Tensor<T>, t: f64) -> Result<Tensor<T>>;
}

impl<T: Real> Predictor<T> for Hkd<T> {
    fn predict(&self, x_t: &Tensor<T>, t: f64) -> Result<Tensor<T>> {
        self.hkd_forward(x_t, t)
    }
}

/// A batch of trajectories: `states[k]` is `[B,C,H,W]` at `times[k]`, the
/// last entry being the clean endpoint.
#[derive(Clone, Debug)]
pub struct TrajectorySlice<T: Real = f32> {
    pub times: Vec<f64>,
    pub states: Vec<Tensor<T>>,
}

impl<T: Real> TrajectorySlice<T> {
    pub fn target(&self) -> &Tensor<T> {
        self.states.last().expect("non-empty slice")
    }
}

/// Records `lambda1 * mse(pred, target) + lambda2 * perceptual(pred, target)`,
/// returning `(total, mse, feat)`.
pub fn distance_on<T: Real>(
    tape: &mut Tape<T>,
    pred: Var,
    target: Var,
    weights: LossWeights,
    extractor: &PerceptualExtractor<T>,
) -> Result<(Var, Var, Var)> {
    let mse = tape.mse(pred, target)?;
    let feat = extractor.distance_on(tape, pred, target)?;
    let a = tape.scale(mse, weights.lambda1);
    let b = tape.scale(feat, weights.lambda2);
    Ok((tape.add(a, b)?, mse, feat))
}

/// Mean over the sampled grid indices and the batch of `d(f(x_t, t), x_eps)`.
pub fn trajectory_consistency_loss<T: Real>(
    model: &impl Predictor<T>,
    slice: &TrajectorySlice<T>,
    sampled: &[usize],
    weights: LossWeights,
    extractor: &PerceptualExtractor<T>,
) -> Result<LossValue> {
    if sampled.is_empty() {
        return Err(HkdError::InvalidArgument("no sampled times".into()));
    }
    if slice.times.len() != slice.states.len() || slice.states.is_empty() {
        return Err(HkdError::InvalidArgument("slice times and states disagree".into()));
    }
    let target = slice.target();
    let mut acc = LossValue { total: 0.0, mse: 0.0, feat: 0.0 };
    for &k in sampled {
        let x = slice
            .states
            .get(k)
            .ok_or_else(|| HkdError::InvalidArgument(format!("grid index {k} out of range")))?;
        let pred = model.predict(x, slice.times[k])?;
        pred.expect_same_shape(target)?;
        let mse = pred.data().iter().zip(target.data()).map(|(a, b)| (a.f64() - b.f64()).powi(2)).sum::<f64>()
            / pred.numel() as f64;
        let feat = extractor.distance(&pred, target)?;
        acc.mse += mse;
        acc.feat += feat;
        acc.total += weights.lambda1 * mse + weights.lambda2 * feat;
    }
    let n = sampled.len() as f64;
    Ok(LossValue { total: acc.total / n, mse: acc.mse / n, feat: acc.feat / n })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Copy(Tensor<f64>, f64);

    impl Predictor<f64> for Copy {
        fn predict(&self, _: &Tensor<f64>, _: f64) -> Result<Tensor<f64>> {
            Ok(self.0.map(|v| v + self.1))
        }
    }

    fn slice() -> TrajectorySlice<f64> {
        let states = (0..3).map(|k| Tensor::from_fn(&[2, 1, 4, 4], |i| ((i + 7 * k) as f64).sin())).collect();
        TrajectorySlice { times: vec![3.0, 1.5, 0.02], states }
    }

    #[test]
    fn schedule_endpoints() {
        assert!((lambda1_schedule(0, 10) - 0.1).abs() < 1e-15);
        assert!((lambda1_schedule(10, 10) - 0.001).abs() < 1e-15);
        assert!((lambda1_schedule(5, 10) - 10f64.powf(-(3f64.sqrt()))).abs() < 1e-15);
    }

    #[test]
    fn perfect_model_has_zero_loss() {
        let s = slice();
        let w = LossWeights { lambda1: 0.1, lambda2: 1.0 };
        let p = PerceptualExtractor::new(1, 0);
        let l = trajectory_consistency_loss(&Copy(s.target().clone(), 0.0), &s, &[0, 1], w, &p).unwrap();
        assert_eq!(l.total, 0.0);
    }

    #[test]
    fn constant_offset_under_mse() {
        let s = slice();
        let w = LossWeights { lambda1: 1.0, lambda2: 0.0 };
        let p = PerceptualExtractor::new(1, 0);
        let l = trajectory_consistency_loss(&Copy(s.target().clone(), 0.3), &s, &[0], w, &p).unwrap();
        assert!((l.total - 0.09).abs() < 1e-12);
    }

    #[test]
    fn empty_times_rejected() {
        let s = slice();
        let w = LossWeights { lambda1: 1.0, lambda2: 1.0 };
        let p = PerceptualExtractor::new(1, 0);
        assert!(trajectory_consistency_loss(&Copy(s.target().clone(), 0.0), &s, &[], w, &p).is_err());
    }
}
