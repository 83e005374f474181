use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HkdError, Result};
use crate::netarch::Hkd;
use crate::numcore::Tensor;
use crate::teacher::{prior_sample, GmmSpec, Schedule, TrajectoryDataset};

use super::loss::LossWeights;
use super::perceptual::PerceptualExtractor;

/// Images pushed through the network at once by the sampler.
pub const SAMPLE_CHUNK: usize = 64;

/// Draws `n` starting points `x_T` for the given model and teacher.
pub fn draw_prior(model: &Hkd<f32>, gmm: &GmmSpec, n: usize, seed: u64) -> Tensor<f32> {
    let schedule = Schedule { epsilon: model.config.epsilon, horizon: model.config.horizon };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    prior_sample(gmm, &schedule, n, &mut rng).cast()
}

/// Applies `f` to consecutive `SAMPLE_CHUNK`-sized slices of the leading axis
/// and concatenates the results.
pub fn map_chunks<T: crate::numcore::Real>(
    x: &Tensor<T>,
    mut f: impl FnMut(&Tensor<T>) -> Result<Tensor<T>>,
) -> Result<Tensor<T>> {
    let n = x.shape()[0];
    let per = x.row_len();
    let mut parts = Vec::with_capacity(n.div_ceil(SAMPLE_CHUNK));
    for start in (0..n).step_by(SAMPLE_CHUNK) {
        let end = (start + SAMPLE_CHUNK).min(n);
        let mut shape = x.shape().to_vec();
        shape[0] = end - start;
        parts.push(f(&Tensor::new(shape, x.data()[start * per..end * per].to_vec())?)?);
    }
    Tensor::stack(&parts)
}

/// `hkd_forward(x, T)` over a batch, in fixed-size chunks.
pub fn predict_from_noise(model: &Hkd<f32>, x_t: &Tensor<f32>) -> Result<Tensor<f32>> {
    map_chunks(x_t, |chunk| model.hkd_forward(chunk, model.config.horizon))
}

/// One network evaluation per image: encode `x_T`, evolve to `epsilon`, decode.
pub fn one_step_sample(model: &Hkd<f32>, gmm: &GmmSpec, n: usize, seed: u64) -> Result<Tensor<f32>> {
    if n == 0 {
        return Err(HkdError::InvalidArgument("sample count must be positive".into()));
    }
    predict_from_noise(model, &draw_prior(model, gmm, n, seed))
}

/// Pearson correlation, `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    /// `d(hkd_forward(x_t, t), x_eps)` per probe.
    pub image_losses: Vec<f64>,
    /// `sum_l ||E_l(x_t) - exp((t - T) A_l) E_l(x_T)||^2` per probe.
    pub latent_losses: Vec<f64>,
    pub correlation: Option<f64>,
}

/// Compares image-space and latent-space consistency over random `(x_t, t)` pairs.
pub fn loss_equivalence_probe(
    model: &Hkd<f32>,
    ds: &TrajectoryDataset,
    n_probe: usize,
    seed: u64,
    weights: LossWeights,
    extractor: &PerceptualExtractor<f32>,
) -> Result<ProbeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = ds.n_grid() - 1;
    let ops = model.koopman_ops();
    let horizon = model.config.horizon;
    let mut image_losses = Vec::with_capacity(n_probe);
    let mut latent_losses = Vec::with_capacity(n_probe);
    for _ in 0..n_probe {
        let n = rng.random_range(0..ds.n_traj());
        let k = rng.random_range(0..=last);
        let t = model.config.snap_time(ds.times[k] as f64);
        let x_t = ds.gather(&[n], &[k])?;
        let x_eps = ds.gather(&[n], &[last])?;
        let pred = model.hkd_forward(&x_t, t)?;
        let mse = pred.data().iter().zip(x_eps.data()).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum::<f64>()
            / pred.numel() as f64;
        image_losses.push(weights.lambda1 * mse + weights.lambda2 * extractor.distance(&pred, &x_eps)?);

        let z_t = model.encode(&x_t, t)?;
        let z_top = model.encode(&ds.gather(&[n], &[0])?, horizon)?;
        let carried = z_top.evolve(&ops, t - horizon)?;
        let latent: f64 = z_t.levels.iter().zip(&carried.levels).map(|(a, b)| a.sub(b).expect("same shape").sq_norm()).sum();
        latent_losses.push(latent);
    }
    let correlation = pearson(&image_losses, &latent_losses);
    Ok(ProbeReport { image_losses, latent_losses, correlation })
}
