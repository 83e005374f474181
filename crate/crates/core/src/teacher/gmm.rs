use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{shape_err, HkdError, Result};
use crate::numcore::Tensor;

use super::schedule::Schedule;

#[derive(Clone, Debug, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    /// Mean image `[C,H,W]`.
    pub mean: Tensor<f64>,
    /// Isotropic per-pixel standard deviation.
    pub std: f64,
}

/// Isotropic Gaussian mixture over images.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmSpec {
    components: Vec<GmmComponent>,
    shape: [usize; 3],
}

impl GmmSpec {
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| HkdError::InvalidArgument("mixture needs at least one component".into()))?;
        let shape: [usize; 3] = match *first.mean.shape() {
            [c, h, w] => [c, h, w],
            ref s => return shape_err(format!("component means must be [C,H,W], got {s:?}")),
        };
        let mut total = 0.0;
        for (i, comp) in components.iter().enumerate() {
            if comp.mean.shape() != shape {
                return shape_err(format!("component {i} mean shape {:?} != {shape:?}", comp.mean.shape()));
            }
            if !(comp.weight > 0.0) || !(comp.std > 0.0) || !comp.mean.is_finite() {
                return Err(HkdError::InvalidArgument(format!(
                    "component {i}: weight {} and std {} must be positive, mean finite",
                    comp.weight, comp.std
                )));
            }
            total += comp.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(HkdError::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { components, shape })
    }

    pub fn single(mean: Tensor<f64>, std: f64) -> Result<Self> {
        Self::new(vec![GmmComponent { weight: 1.0, mean, std }])
    }

    /// `k` equally weighted components whose means are random anti-aliased
    /// bar/disc drawings on a dark background.
    pub fn procedural(shape: [usize; 3], k: usize, std: f64, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(HkdError::InvalidArgument("mixture needs at least one component".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let components = (0..k)
            .map(|_| GmmComponent { weight: 1.0 / k as f64, mean: template(shape, &mut rng), std })
            .collect();
        Self::new(components)
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.iter().product()
    }

    /// `sum_i w_i s_i`.
    pub fn mean_std(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.std).sum()
    }

    /// `sum_i w_i mu_i`.
    pub fn mean_image(&self) -> Tensor<f64> {
        let mut out = Tensor::zeros(&self.shape);
        for c in &self.components {
            for (o, &m) in out.data_mut().iter_mut().zip(c.mean.data()) {
                *o += c.weight * m;
            }
        }
        out
    }

    /// Per-component log of `w_i N(x; mu_i, (s_i^2 + t^2) I)` without the
    /// `2 pi` constant.
    fn log_terms(&self, x: &[f64], t: f64) -> Vec<f64> {
        let d = x.len() as f64;
        self.components
            .iter()
            .map(|c| {
                let var = c.std * c.std + t * t;
                let sq: f64 = x.iter().zip(c.mean.data()).map(|(a, m)| (a - m) * (a - m)).sum();
                c.weight.ln() - 0.5 * d * var.ln() - 0.5 * sq / var
            })
            .collect()
    }

    fn responsibilities(&self, x: &[f64], t: f64) -> Vec<f64> {
        let logs = self.log_terms(x, t);
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut r: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = r.iter().sum();
        r.iter_mut().for_each(|v| *v /= z);
        r
    }

    /// `log p_t(x)` of the noised mixture.
    pub fn log_density(&self, x: &[f64], t: f64) -> f64 {
        let logs = self.log_terms(x, t);
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        lse - 0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// `grad log p_t(x)` written into `out`.
    pub fn score_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let r = self.responsibilities(x, t);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (c, &ri) in self.components.iter().zip(&r) {
            if ri == 0.0 {
                continue;
            }
            let var = c.std * c.std + t * t;
            for ((o, &xv), &m) in out.iter_mut().zip(x).zip(c.mean.data()) {
                *o += ri * (m - xv) / var;
            }
        }
    }

    /// Draws `n` images from the noised marginal `p_t`.
    pub fn sample(&self, n: usize, t: f64, rng: &mut impl Rng) -> Tensor<f64> {
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (i, c) in self.components.iter().enumerate() {
                acc += c.weight;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            let c = &self.components[pick];
            let sd = (c.std * c.std + t * t).sqrt();
            for &m in c.mean.data() {
                let z: f64 = rng.sample(StandardNormal);
                data.push(m + sd * z);
            }
        }
        let [ch, h, w] = self.shape;
        Tensor::new(vec![n, ch, h, w], data).expect("sized above")
    }
}

/// `grad log p_t(x)` for `x` shaped like the mixture's images.
pub fn gmm_score(x: &Tensor<f64>, t: f64, gmm: &GmmSpec, schedule: &Schedule) -> Result<Tensor<f64>> {
    if x.shape() != gmm.shape() {
        return shape_err(format!("score input {:?} vs mixture {:?}", x.shape(), gmm.shape()));
    }
    schedule.check_time(t)?;
    let mut out = Tensor::zeros(x.shape());
    gmm.score_into(x.data(), schedule.sigma(t), out.data_mut());
    Ok(out)
}

const BACKGROUND: f64 = -0.6;
const FOREGROUND: f64 = 0.8;
const SUPERSAMPLE: usize = 4;

fn template(shape: [usize; 3], rng: &mut impl Rng) -> Tensor<f64> {
    let [c, h, w] = shape;
    let (hf, wf) = (h as f64, w as f64);
    let n_shapes = rng.random_range(1..=3);
    let mut out = Tensor::full(&[c, h, w], BACKGROUND);
    for _ in 0..n_shapes {
        let tint: Vec<f64> = (0..c).map(|_| rng.random_range(0.5..1.0)).collect();
        let shape_kind: Box<dyn Fn(f64, f64) -> bool> = if rng.random_bool(0.5) {
            let (cy, cx) = (rng.random_range(0.2..0.8) * hf, rng.random_range(0.2..0.8) * wf);
            let r = rng.random_range(0.12..0.3) * hf.min(wf);
            Box::new(move |y, x| (y - cy).powi(2) + (x - cx).powi(2) <= r * r)
        } else if rng.random_bool(0.5) {
            let y0 = rng.random_range(0.0..0.8) * hf;
            let th = rng.random_range(0.12..0.25) * hf;
            let (x0, x1) = (rng.random_range(0.0..0.3) * wf, rng.random_range(0.7..1.0) * wf);
            Box::new(move |y, x| y >= y0 && y < y0 + th && x >= x0 && x < x1)
        } else {
            let x0 = rng.random_range(0.0..0.8) * wf;
            let tw = rng.random_range(0.12..0.25) * wf;
            let (y0, y1) = (rng.random_range(0.0..0.3) * hf, rng.random_range(0.7..1.0) * hf);
            Box::new(move |y, x| x >= x0 && x < x0 + tw && y >= y0 && y < y1)
        };
        for i in 0..h {
            for j in 0..w {
                let mut hits = 0;
                for a in 0..SUPERSAMPLE {
                    for b in 0..SUPERSAMPLE {
                        let y = i as f64 + (a as f64 + 0.5) / SUPERSAMPLE as f64;
                        let x = j as f64 + (b as f64 + 0.5) / SUPERSAMPLE as f64;
                        hits += shape_kind(y, x) as usize;
                    }
                }
                let cover = hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
                for (ch, &tone) in tint.iter().enumerate() {
                    let v = &mut out.data_mut()[(ch * h + i) * w + j];
                    let target = BACKGROUND + (FOREGROUND - BACKGROUND) * tone;
                    *v = v.max(BACKGROUND + (target - BACKGROUND) * cover);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_gaussian_score_is_exact() {
        let mean = Tensor::from_fn(&[1, 2, 2], |i| i as f64 * 0.3 - 0.4);
        let g = GmmSpec::single(mean.clone(), 0.5).unwrap();
        let x = Tensor::from_fn(&[1, 2, 2], |i| (i as f64).sin());
        let sch = Schedule::default();
        let s = gmm_score(&x, 1.2, &g, &sch).unwrap();
        for i in 0..4 {
            let want = (mean.data()[i] - x.data()[i]) / (0.25 + 1.44);
            assert_eq!(s.data()[i], want);
        }
    }

    #[test]
    fn symmetric_pair_has_zero_score_at_origin() {
        let a = Tensor::from_fn(&[1, 2, 2], |i| i as f64 + 1.0);
        let b = a.scale(-1.0);
        let g = GmmSpec::new(vec![
            GmmComponent { weight: 0.5, mean: a, std: 0.3 },
            GmmComponent { weight: 0.5, mean: b, std: 0.3 },
        ])
        .unwrap();
        let s = gmm_score(&Tensor::zeros(&[1, 2, 2]), 0.5, &g, &Schedule::default()).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn far_components_stay_finite() {
        let a = Tensor::full(&[1, 4, 4], 40.0);
        let b = Tensor::full(&[1, 4, 4], -40.0);
        let g = GmmSpec::new(vec![
            GmmComponent { weight: 0.5, mean: a, std: 0.1 },
            GmmComponent { weight: 0.5, mean: b, std: 0.1 },
        ])
        .unwrap();
        let x = Tensor::full(&[1, 4, 4], 39.0);
        let s = gmm_score(&x, 0.02, &g, &Schedule::default()).unwrap();
        assert!(s.is_finite());
        assert!(g.log_density(x.data(), 0.02).is_finite());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let m = Tensor::zeros(&[1, 2, 2]);
        let r = GmmSpec::new(vec![GmmComponent { weight: 0.7, mean: m, std: 1.0 }]);
        assert!(r.is_err());
    }

    #[test]
    fn templates_are_deterministic_and_in_range() {
        let a = GmmSpec::procedural([1, 16, 16], 8, 0.2, 5).unwrap();
        let b = GmmSpec::procedural([1, 16, 16], 8, 0.2, 5).unwrap();
        assert_eq!(a, b);
        for c in a.components() {
            assert!(c.mean.data().iter().all(|&v| (BACKGROUND..=FOREGROUND).contains(&v)));
            assert!(c.mean.data().iter().any(|&v| v > BACKGROUND));
        }
    }
}
