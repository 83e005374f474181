use crate::error::{shape_err, HkdError, Result};
use crate::koopman::{spectral_mask, KoopmanLevelOp, LatentPyramid, SpectralBand};
use crate::netarch::Hkd;
use crate::numcore::{Real, Tensor};
use crate::trainer::Predictor;

/// `(t, f(x_t, t))` for every stored state of one trajectory, from `T` down
/// to `epsilon`. `states` is `[S+1, C, H, W]`.
pub fn consistency_series<T: Real>(model: &impl Predictor<T>, times: &[f64], states: &Tensor<T>) -> Result<Vec<(f64, Tensor<T>)>> {
    if states.shape().first() != Some(&times.len()) {
        return shape_err(format!("{} times for states {:?}", times.len(), states.shape()));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    order
        .into_iter()
        .map(|k| Ok((times[k], model.predict(&states.select(k)?, times[k])?)))
        .collect()
}

/// One CE measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CeEntry {
    pub level: usize,
    /// Index of the band within its level's partition.
    pub band: usize,
    pub lo: usize,
    pub hi: usize,
    pub time: f64,
    /// `||masked z_t||_2`.
    pub norm: f64,
    /// `||masked z_t||^2 / ||z_t||^2` (0 when `z_t` vanishes).
    pub share: f64,
}

/// Per (level, band, time) energy of the evolved latents.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CeReport {
    pub entries: Vec<CeEntry>,
}

impl CeReport {
    /// Sum of shares over the bands of `level` at `time`.
    pub fn share_sum(&self, level: usize, time: f64) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.level == level && e.time == time)
            .map(|e| e.share)
            .sum()
    }
}

/// Checks that `bands` tile `[0, blocks)` without gaps or overlap.
fn check_partition(bands: &[SpectralBand], level: usize, blocks: usize) -> Result<()> {
    let mut sorted: Vec<_> = bands.to_vec();
    sorted.sort_by_key(|b| b.lo);
    let mut next = 0;
    for b in &sorted {
        if b.level != level {
            return Err(HkdError::InvalidArgument(format!("band for level {} listed under level {level}", b.level)));
        }
        b.validate(blocks)?;
        if b.lo != next {
            return Err(HkdError::InvalidArgument(format!(
                "level {level} bands do not partition [0, {blocks}): gap or overlap at {next}"
            )));
        }
        next = b.hi;
    }
    if next != blocks {
        return Err(HkdError::InvalidArgument(format!(
            "level {level} bands end at {next}, not {blocks}"
        )));
    }
    Ok(())
}

/// Evolves `z` (observed at `z.time_tag`) to each of `times` and records the
/// share of every band in `bands[level - 1]`.
pub fn cumulative_effect_latent<T: Real>(
    z: &LatentPyramid<T>,
    ops: &[KoopmanLevelOp<T>],
    bands: &[Vec<SpectralBand>],
    times: &[f64],
) -> Result<CeReport> {
    if bands.len() != ops.len() || z.levels.len() != ops.len() {
        return shape_err(format!(
            "{} latent levels, {} operators, {} band lists",
            z.levels.len(),
            ops.len(),
            bands.len()
        ));
    }
    for (l, (op, level_bands)) in ops.iter().zip(bands).enumerate() {
        check_partition(level_bands, l + 1, op.blocks())?;
    }
    let mut entries = Vec::new();
    for &t in times {
        let zt = z.evolve(ops, t - z.time_tag)?;
        for (l, (op, level_bands)) in ops.iter().zip(bands).enumerate() {
            let total = zt.levels[l].sq_norm();
            for (b, band) in level_bands.iter().enumerate() {
                let sq = spectral_mask(&zt.levels[l], op, band)?.sq_norm();
                entries.push(CeEntry {
                    level: l + 1,
                    band: b,
                    lo: band.lo,
                    hi: band.hi,
                    time: t,
                    norm: sq.sqrt(),
                    share: if total > 0.0 { sq / total } else { 0.0 },
                });
            }
        }
    }
    Ok(CeReport { entries })
}

/// CE of the encoded `x_T` (`[N,C,H,W]`) along `times`.
pub fn cumulative_effect<T: Real>(model: &Hkd<T>, x_top: &Tensor<T>, bands: &[Vec<SpectralBand>], times: &[f64]) -> Result<CeReport> {
    for &t in times {
        model.config.check_time(t)?;
    }
    let z = model.encode(x_top, model.config.horizon)?;
    cumulative_effect_latent(&z, &model.koopman_ops(), bands, times)
}

/// Per-level bands splitting each level's blocks into `parts` contiguous ranges.
pub fn default_bands<T: Real>(model: &Hkd<T>, parts: usize) -> Vec<Vec<SpectralBand>> {
    (1..=model.config.levels)
        .map(|l| SpectralBand::partition(l, model.config.latent_channels[l - 1] / 2, parts))
        .collect()
}

/// Encodes `x_T`, evolves to `epsilon`, keeps only `bands[l]` at each level
/// and decodes.
pub fn band_decode<T: Real>(model: &Hkd<T>, x_top: &Tensor<T>, bands: &[SpectralBand]) -> Result<Tensor<T>> {
    if bands.len() != model.config.levels {
        return shape_err(format!("{} bands for {} levels", bands.len(), model.config.levels));
    }
    let ops = model.koopman_ops();
    let z = model.encode(x_top, model.config.horizon)?;
    let mut zt = z.evolve(&ops, model.config.epsilon - z.time_tag)?;
    for ((level, op), band) in zt.levels.iter_mut().zip(&ops).zip(bands) {
        *level = spectral_mask(level, op, band)?;
    }
    model.decode(&zt)
}
