use crate::error::{shape_err, HkdError, Result};
use crate::koopman::{band_keep, LatentPyramid, SpectralBand};
use crate::netarch::{Hkd, ModelConfig};
use crate::numcore::{Real, Tensor};
use crate::trainer::SAMPLE_CHUNK;

/// Which Koopman blocks an edit touches.
#[derive(Clone, Debug, PartialEq)]
pub enum EditBands {
    /// Every block at every level (frequency-agnostic editing).
    All,
    /// One band per level.
    PerLevel(Vec<SpectralBand>),
}

/// A latent mixing intervention.
#[derive(Clone, Debug, PartialEq)]
pub struct EditSpec {
    pub bands: EditBands,
    /// Weight of the reference latents, in `[0, 1]`.
    pub ratio: f64,
    /// Per-level spatial masks, `h_l * w_l` row-major.
    pub region: Vec<Vec<bool>>,
    pub t_edit: f64,
}

/// Pixels on or below the main diagonal, row-major `H * W`.
pub fn lower_left_half(size: usize) -> Vec<bool> {
    (0..size * size).map(|p| p / size >= p % size).collect()
}

/// Per-level masks from an image-resolution mask: a cell is selected when at
/// least half of the pixels it covers are.
pub fn region_from_image(config: &ModelConfig, mask: &[bool]) -> Result<Vec<Vec<bool>>> {
    let size = config.image_size;
    if mask.len() != size * size {
        return shape_err(format!("region mask has {} pixels, image has {}", mask.len(), size * size));
    }
    Ok((1..=config.levels)
        .map(|l| {
            let s = config.level_size(l);
            let f = size / s;
            (0..s * s)
                .map(|c| {
                    let (ci, cj) = (c / s, c % s);
                    let hits = (0..f * f).filter(|&q| mask[(ci * f + q / f) * size + cj * f + q % f]).count();
                    2 * hits >= f * f
                })
                .collect()
        })
        .collect())
}

/// The lowest-alpha third of the blocks at every level.
pub fn high_frequency_bands(config: &ModelConfig) -> Vec<SpectralBand> {
    (1..=config.levels)
        .map(|l| {
            let parts = SpectralBand::partition(l, config.latent_channels[l - 1] / 2, 3);
            *parts.last().expect("at least one part")
        })
        .collect()
}

impl EditSpec {
    /// Full region, all bands, midpoint time.
    pub fn new(config: &ModelConfig, ratio: f64) -> Self {
        Self {
            bands: EditBands::All,
            ratio,
            region: (1..=config.levels).map(|l| vec![true; config.level_size(l).pow(2)]).collect(),
            t_edit: 0.5 * (config.horizon + config.epsilon),
        }
    }

    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(HkdError::InvalidArgument(format!("mixing ratio {} outside [0, 1]", self.ratio)));
        }
        config.check_time(self.t_edit)?;
        if self.region.len() != config.levels {
            return shape_err(format!("{} region masks for {} levels", self.region.len(), config.levels));
        }
        for (l, m) in self.region.iter().enumerate() {
            let s = config.level_size(l + 1);
            if m.len() != s * s {
                return shape_err(format!("level {} region has {} cells, expected {}", l + 1, m.len(), s * s));
            }
        }
        if let EditBands::PerLevel(bands) = &self.bands {
            if bands.len() != config.levels {
                return shape_err(format!("{} bands for {} levels", bands.len(), config.levels));
            }
            for (l, b) in bands.iter().enumerate() {
                if b.level != l + 1 {
                    return Err(HkdError::InvalidArgument(format!("band for level {} listed at level {}", b.level, l + 1)));
                }
                b.validate(config.latent_channels[l] / 2)?;
            }
        }
        Ok(())
    }
}

/// Mixes `reference` into `original` inside the selected coordinates:
/// `(1 - rho) * orig + rho * ref` there, `orig` elsewhere.
pub fn mix_latents<T: Real>(model: &Hkd<T>, original: &LatentPyramid<T>, reference: &LatentPyramid<T>, spec: &EditSpec) -> Result<LatentPyramid<T>> {
    if original.levels.len() != reference.levels.len() {
        return shape_err("pyramids differ in depth");
    }
    let ops = model.koopman_ops();
    let rho = T::of(spec.ratio);
    let keep_orig = T::of(1.0 - spec.ratio);
    let mut out = original.clone();
    for (l, (zo, zr)) in out.levels.iter_mut().zip(&reference.levels).enumerate() {
        zo.expect_same_shape(zr)?;
        let op = &ops[l];
        let keep = match &spec.bands {
            EditBands::All => vec![true; op.blocks() * op.spatial().0 * op.spatial().1],
            EditBands::PerLevel(b) => band_keep(op, &b[l])?,
        };
        let plane = op.spatial().0 * op.spatial().1;
        let [n, d, _, _] = zo.dims4()?;
        let region = &spec.region[l];
        let r = zr.data();
        let o = zo.data_mut();
        for s in 0..n {
            for k in 0..d / 2 {
                for p in 0..plane {
                    if keep[k * plane + p] && region[p] {
                        for c in [2 * k, 2 * k + 1] {
                            let i = (s * d + c) * plane + p;
                            o[i] = keep_orig * o[i] + rho * r[i];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One-step generation from `x_orig` with latents of `x_ref` mixed in.
///
/// Both pyramids are carried to `epsilon` and mixed there. Evolution is
/// linear and acts on each block pair independently, so this equals mixing at
/// `t_edit` and evolving the result, while keeping `ratio = 0` and
/// `ratio = 1` over everything bit-identical to the plain sampler.
pub fn frequency_edit(model: &Hkd<f32>, x_orig: &Tensor<f32>, x_ref: &Tensor<f32>, spec: &EditSpec) -> Result<Tensor<f32>> {
    spec.validate(&model.config)?;
    x_orig.expect_same_shape(x_ref)?;
    let ops = model.koopman_ops();
    let horizon = model.config.horizon;
    let dt = model.config.epsilon - horizon;
    let n = x_orig.shape().first().copied().unwrap_or(0);
    let per = x_orig.row_len();
    let mut parts = Vec::with_capacity(n.div_ceil(SAMPLE_CHUNK));
    for start in (0..n).step_by(SAMPLE_CHUNK) {
        let end = (start + SAMPLE_CHUNK).min(n);
        let mut shape = x_orig.shape().to_vec();
        shape[0] = end - start;
        let chunk = |x: &Tensor<f32>| Tensor::new(shape.clone(), x.data()[start * per..end * per].to_vec());
        let zo = model.encode(&chunk(x_orig)?, horizon)?.evolve(&ops, dt)?;
        let zr = model.encode(&chunk(x_ref)?, horizon)?.evolve(&ops, dt)?;
        parts.push(model.decode(&mix_latents(model, &zo, &zr, spec)?)?);
    }
    Tensor::stack(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_left_half_counts() {
        let m = lower_left_half(4);
        assert_eq!(m.iter().filter(|&&b| b).count(), 10);
        assert!(m[3 * 4]);
        assert!(!m[3]);
    }

    #[test]
    fn region_downsampling() {
        let cfg = ModelConfig { image_size: 8, levels: 2, latent_channels: vec![4, 4], hidden_widths: vec![4, 4], ..Default::default() };
        let full = region_from_image(&cfg, &[true; 64]).unwrap();
        assert_eq!(full[0].len(), 64);
        assert_eq!(full[1].len(), 16);
        assert!(full[1].iter().all(|&b| b));
        let half = region_from_image(&cfg, &lower_left_half(8)).unwrap();
        assert!(half[1][3 * 4]);
        assert!(!half[1][3]);
        assert!(region_from_image(&cfg, &[true; 10]).is_err());
    }

    #[test]
    fn ratio_is_validated() {
        let cfg = ModelConfig::default();
        assert!(EditSpec::new(&cfg, 1.5).validate(&cfg).is_err());
        assert!(EditSpec::new(&cfg, 0.25).validate(&cfg).is_ok());
        let mut s = EditSpec::new(&cfg, 0.5);
        s.t_edit = 10.0;
        assert!(s.validate(&cfg).is_err());
    }

    #[test]
    fn high_band_is_last_third() {
        let cfg = ModelConfig::default();
        let b = high_frequency_bands(&cfg);
        assert_eq!(b[2], SpectralBand::new(3, 10, 16));
    }
}
