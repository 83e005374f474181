use crate::error::{shape_err, HkdError, Result};
use crate::numcore::{Real, Tensor};

use super::block::KoopmanLevelOp;

/// Half-open range `[lo, hi)` of per-location block ranks, where rank 0 is the
/// block with the largest real part `alpha` at that location.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpectralBand {
    pub level: usize,
    pub lo: usize,
    pub hi: usize,
}

impl SpectralBand {
    pub fn new(level: usize, lo: usize, hi: usize) -> Self {
        Self { level, lo, hi }
    }

    pub fn full(level: usize, blocks: usize) -> Self {
        Self { level, lo: 0, hi: blocks }
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    pub fn validate(&self, blocks: usize) -> Result<()> {
        if self.lo > self.hi || self.hi > blocks {
            return Err(HkdError::InvalidArgument(format!(
                "band [{}, {}) is not a sub-range of [0, {blocks})",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Splits `[0, blocks)` into `parts` contiguous bands of near-equal width.
    pub fn partition(level: usize, blocks: usize, parts: usize) -> Vec<Self> {
        let parts = parts.clamp(1, blocks.max(1));
        (0..parts)
            .map(|p| Self::new(level, p * blocks / parts, (p + 1) * blocks / parts))
            .collect()
    }
}

/// Block ranks per location: `rank[k * plane + p]` is the position of block `k`
/// at location `p` when blocks are sorted by descending alpha (ties by index).
pub fn block_ranks<T: Real>(op: &KoopmanLevelOp<T>) -> Vec<usize> {
    let blocks = op.blocks();
    let (h, w) = op.spatial();
    let plane = h * w;
    let alpha = op.alpha.data();
    let mut ranks = vec![0; blocks * plane];
    let mut order: Vec<usize> = Vec::with_capacity(blocks);
    for p in 0..plane {
        order.clear();
        order.extend(0..blocks);
        order.sort_by(|&a, &b| {
            alpha[b * plane + p]
                .partial_cmp(&alpha[a * plane + p])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for (rank, &k) in order.iter().enumerate() {
            ranks[k * plane + p] = rank;
        }
    }
    ranks
}

/// Keep-flags per block and location for `band`.
pub fn band_keep<T: Real>(op: &KoopmanLevelOp<T>, band: &SpectralBand) -> Result<Vec<bool>> {
    if band.level != op.level {
        return Err(HkdError::InvalidArgument(format!(
            "band targets level {} but operator is level {}",
            band.level, op.level
        )));
    }
    band.validate(op.blocks())?;
    Ok(block_ranks(op)
        .into_iter()
        .map(|r| r >= band.lo && r < band.hi)
        .collect())
}

/// Zeroes every channel pair whose block rank falls outside `band`.
pub fn spectral_mask<T: Real>(z: &Tensor<T>, op: &KoopmanLevelOp<T>, band: &SpectralBand) -> Result<Tensor<T>> {
    let keep = band_keep(op, band)?;
    apply_keep(z, op, &keep)
}

fn apply_keep<T: Real>(z: &Tensor<T>, op: &KoopmanLevelOp<T>, keep: &[bool]) -> Result<Tensor<T>> {
    let (n, d) = match *z.shape() {
        [d, _, _] => (1, d),
        [n, d, _, _] => (n, d),
        _ => return shape_err(format!("latent must be [d,h,w] or [N,d,h,w], got {:?}", z.shape())),
    };
    let (h, w) = op.spatial();
    let plane = h * w;
    if d != op.channels() || z.numel() != n * d * plane {
        return shape_err(format!(
            "latent {:?} does not match level-{} operator ({} channels, {h}x{w})",
            z.shape(),
            op.level,
            op.channels()
        ));
    }
    let mut out = z.clone();
    let data = out.data_mut();
    for s in 0..n {
        for k in 0..op.blocks() {
            for p in 0..plane {
                if !keep[k * plane + p] {
                    let a = (s * d + 2 * k) * plane + p;
                    data[a] = T::zero();
                    data[a + plane] = T::zero();
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_op() -> KoopmanLevelOp<f64> {
        // one location, alphas (0.9, 0.1, -0.5)
        KoopmanLevelOp::new(
            1,
            Tensor::new(vec![3, 1, 1], vec![0.9, 0.1, -0.5]).unwrap(),
            Tensor::zeros(&[3, 1, 1]),
        )
        .unwrap()
    }

    #[test]
    fn middle_band_keeps_middle_alpha() {
        let op = toy_op();
        let z = Tensor::new(vec![6, 1, 1], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let m = spectral_mask(&z, &op, &SpectralBand::new(1, 1, 2)).unwrap();
        assert_eq!(m.data(), &[0., 0., 3., 4., 0., 0.]);
    }

    #[test]
    fn ranks_follow_descending_alpha() {
        let op = KoopmanLevelOp::new(
            1,
            Tensor::new(vec![3, 1, 1], vec![-0.5, 0.9, 0.1]).unwrap(),
            Tensor::zeros(&[3, 1, 1]),
        )
        .unwrap();
        assert_eq!(block_ranks(&op), vec![2, 0, 1]);
    }

    #[test]
    fn full_and_empty_bands() {
        let op = toy_op();
        let z = Tensor::from_fn(&[2, 6, 1, 1], |i| i as f64 + 1.0);
        assert_eq!(spectral_mask(&z, &op, &SpectralBand::full(1, 3)).unwrap(), z);
        let empty = spectral_mask(&z, &op, &SpectralBand::new(1, 2, 2)).unwrap();
        assert!(empty.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_invalid_bands() {
        let op = toy_op();
        let z = Tensor::<f64>::zeros(&[6, 1, 1]);
        assert!(spectral_mask(&z, &op, &SpectralBand::new(1, 2, 1)).is_err());
        assert!(spectral_mask(&z, &op, &SpectralBand::new(1, 0, 4)).is_err());
        assert!(spectral_mask(&z, &op, &SpectralBand::new(2, 0, 1)).is_err());
    }

    #[test]
    fn partition_covers_range() {
        let bands = SpectralBand::partition(2, 8, 3);
        assert_eq!(bands.first().unwrap().lo, 0);
        assert_eq!(bands.last().unwrap().hi, 8);
        for w in bands.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
    }
}
