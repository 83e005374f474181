use crate::error::{shape_err, HkdError, Result};

use super::real::Real;
use super::tensor::Tensor;

/// Adam hyper-parameters plus the multiplicative per-step parameter decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Factor applied to every parameter after each update (1 disables decay).
    pub decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            decay: 1.0,
        }
    }
}

impl AdamConfig {
    /// Per-step factor realising `per_epoch` decay spread over an epoch.
    pub fn per_step_decay(per_epoch: f64, steps_per_epoch: usize) -> f64 {
        per_epoch.powf(1.0 / steps_per_epoch.max(1) as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T: Real = f32> {
    pub first_moment: Vec<Tensor<T>>,
    pub second_moment: Vec<Tensor<T>>,
    pub step_count: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &[Tensor<T>]) -> Self {
        let zeros: Vec<_> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam update followed by multiplicative decay.
pub fn adam_step<T: Real>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if cfg.lr <= 0.0 {
        return Err(HkdError::InvalidArgument(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return shape_err(format!(
            "adam: {} params, {} grads, {} moment buffers",
            params.len(),
            grads.len(),
            state.first_moment.len()
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.first_moment[i].shape() {
            return shape_err(format!(
                "adam: parameter {i} shape {:?}, gradient {:?}, moments {:?}",
                p.shape(),
                g.shape(),
                state.first_moment[i].shape()
            ));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        for (((pj, &gj), mj), vj) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            let gj = gj.f64();
            let m_new = cfg.beta1 * mj.f64() + (1.0 - cfg.beta1) * gj;
            let v_new = cfg.beta2 * vj.f64() + (1.0 - cfg.beta2) * gj * gj;
            *mj = T::of(m_new);
            *vj = T::of(v_new);
            let update = cfg.lr * (m_new / bc1) / ((v_new / bc2).sqrt() + cfg.eps);
            *pj = T::of((pj.f64() - update) * cfg.decay);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut params = vec![Tensor::<f32>::from_fn(&[3, 2], |i| i as f32 - 2.5)];
        let before = params.clone();
        let grads = vec![Tensor::zeros(&[3, 2])];
        let mut state = AdamState::new(&params);
        for _ in 0..3 {
            adam_step(&mut params, &grads, &mut state, &AdamConfig::default()).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.step_count, 3);
    }

    #[test]
    fn first_step_is_about_lr() {
        for g in [1e-3, 0.1, 1.0, -7.0, 1e3] {
            let mut params = vec![Tensor::<f64>::scalar(0.5)];
            let mut state = AdamState::new(&params);
            let cfg = AdamConfig { lr: 1e-2, ..Default::default() };
            adam_step(&mut params, &[Tensor::scalar(g)], &mut state, &cfg).unwrap();
            let moved = (params[0].item() - 0.5).abs();
            assert!((moved - 1e-2).abs() < 1e-3, "g={g} moved {moved}");
        }
    }

    #[test]
    fn rejects_shape_mismatch_and_bad_lr() {
        let mut params = vec![Tensor::<f32>::zeros(&[2])];
        let mut state = AdamState::new(&params);
        assert!(adam_step(&mut params, &[Tensor::zeros(&[3])], &mut state, &AdamConfig::default()).is_err());
        let cfg = AdamConfig { lr: 0.0, ..Default::default() };
        assert!(adam_step(&mut params, &[Tensor::zeros(&[2])], &mut state, &cfg).is_err());
    }

    #[test]
    fn decay_compounds_to_per_epoch_factor() {
        let d = AdamConfig::per_step_decay(0.95, 20);
        assert!((d.powi(20) - 0.95).abs() < 1e-12);
    }
}
