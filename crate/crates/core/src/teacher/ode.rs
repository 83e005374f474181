use crate::error::{shape_err, HkdError, Result};
use crate::numcore::Tensor;

use super::gmm::GmmSpec;
use super::schedule::Schedule;

/// `dx/dt = -sigma(t) sigma'(t) grad log p_t(x)`.
fn drift(gmm: &GmmSpec, schedule: &Schedule, x: &[f64], t: f64, out: &mut [f64]) {
    let s = schedule.sigma(t);
    gmm.score_into(x, s, out);
    let k = -s * schedule.sigma_dot(t);
    out.iter_mut().for_each(|v| *v *= k);
}

/// Integrates from `t_start` to `t_end` in place with `n_steps` classical RK4
/// steps, calling `visit` on every state including both endpoints.
pub(crate) fn rk4(
    gmm: &GmmSpec,
    schedule: &Schedule,
    x: &mut [f64],
    t_start: f64,
    t_end: f64,
    n_steps: usize,
    mut visit: impl FnMut(&[f64]),
) {
    let d = x.len();
    let h = (t_end - t_start) / n_steps as f64;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    visit(x);
    for step in 0..n_steps {
        let t = t_start + step as f64 * h;
        drift(gmm, schedule, x, t, &mut k1);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        drift(gmm, schedule, &tmp, t + 0.5 * h, &mut k2);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        drift(gmm, schedule, &tmp, t + 0.5 * h, &mut k3);
        for i in 0..d {
            tmp[i] = x[i] + h * k3[i];
        }
        drift(gmm, schedule, &tmp, t + h, &mut k4);
        for i in 0..d {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        visit(x);
    }
}

/// Probability-flow trajectory on a uniform grid of `n_steps + 1` states.
pub fn pf_ode_solve(
    x_start: &Tensor<f64>,
    t_start: f64,
    t_end: f64,
    gmm: &GmmSpec,
    schedule: &Schedule,
    n_steps: usize,
) -> Result<Vec<Tensor<f64>>> {
    if n_steps == 0 {
        return Err(HkdError::InvalidArgument("n_steps must be at least 1".into()));
    }
    if x_start.shape() != gmm.shape() {
        return shape_err(format!("start state {:?} vs mixture {:?}", x_start.shape(), gmm.shape()));
    }
    schedule.check_time(t_start)?;
    schedule.check_time(t_end)?;
    let mut x = x_start.data().to_vec();
    let mut out = Vec::with_capacity(n_steps + 1);
    rk4(gmm, schedule, &mut x, t_start, t_end, n_steps, |s| {
        out.push(Tensor::new(x_start.shape().to_vec(), s.to_vec()).expect("same size"));
    });
    Ok(out)
}
