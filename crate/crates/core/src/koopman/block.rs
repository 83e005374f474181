use crate::error::{shape_err, HkdError, Result};
use crate::numcore::{Real, Tensor};

/// Largest admissible `|alpha * dt|` before `exp` is considered an overflow.
pub const EXPONENT_GUARD: f64 = 50.0;

pub(crate) fn check_guard(alpha: f64, dt: f64) -> Result<()> {
    let value = (alpha * dt).abs();
    if value.is_nan() || value > EXPONENT_GUARD {
        return Err(HkdError::Overflow { value, limit: EXPONENT_GUARD });
    }
    Ok(())
}

/// Exact exponential of `[[alpha, beta], [-beta, alpha]] * dt`.
///
/// Equals `e^{alpha dt} [[cos(beta dt), sin(beta dt)], [-sin(beta dt), cos(beta dt)]]`.
pub fn block_exp(alpha: f64, beta: f64, dt: f64) -> Result<[[f64; 2]; 2]> {
    check_guard(alpha, dt)?;
    let scale = (alpha * dt).exp();
    let (s, c) = (beta * dt).sin_cos();
    Ok([[scale * c, scale * s], [-scale * s, scale * c]])
}

/// Per-level, per-location block-diagonal generator.
///
/// Block `k` at location `(i, j)` has eigenvalues `alpha[k,i,j] ± i beta[k,i,j]`
/// and acts on latent channels `(2k, 2k+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KoopmanLevelOp<T: Real = f32> {
    /// 1-based pyramid level.
    pub level: usize,
    pub alpha: Tensor<T>,
    pub beta: Tensor<T>,
    pub trainable: bool,
}

impl<T: Real> KoopmanLevelOp<T> {
    pub fn new(level: usize, alpha: Tensor<T>, beta: Tensor<T>) -> Result<Self> {
        if alpha.shape().len() != 3 {
            return shape_err(format!("koopman alpha must be [d/2,h,w], got {:?}", alpha.shape()));
        }
        alpha.expect_same_shape(&beta)?;
        Ok(Self { level, alpha, beta, trainable: true })
    }

    /// The all-zero generator: evolution is the identity.
    pub fn zeros(level: usize, blocks: usize, h: usize, w: usize) -> Self {
        Self {
            level,
            alpha: Tensor::zeros(&[blocks, h, w]),
            beta: Tensor::zeros(&[blocks, h, w]),
            trainable: true,
        }
    }

    pub fn blocks(&self) -> usize {
        self.alpha.shape()[0]
    }

    /// Latent channel count `d_l`.
    pub fn channels(&self) -> usize {
        2 * self.blocks()
    }

    pub fn spatial(&self) -> (usize, usize) {
        (self.alpha.shape()[1], self.alpha.shape()[2])
    }

    pub fn alpha_at(&self, k: usize, i: usize, j: usize) -> f64 {
        let (h, w) = self.spatial();
        self.alpha.data()[(k * h + i) * w + j].f64()
    }

    pub fn beta_at(&self, k: usize, i: usize, j: usize) -> f64 {
        let (h, w) = self.spatial();
        self.beta.data()[(k * h + i) * w + j].f64()
    }

    /// Projects alpha onto `|alpha * span| <= EXPONENT_GUARD`.
    pub fn clamp_alpha(&mut self, span: f64) {
        // shrink slightly so the rounded bound still satisfies the guard
        let bound = T::of(EXPONENT_GUARD * (1.0 - 1e-6) / span.abs().max(f64::MIN_POSITIVE));
        for a in self.alpha.data_mut() {
            *a = a.max(-bound).min(bound);
        }
    }
}

/// One eigenvalue pair `magnitude * (cos(phase) ± i sin(phase))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeSpectrum {
    pub level: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub alpha: f64,
    pub beta: f64,
    pub magnitude: f64,
    pub phase: f64,
}

/// Eigenvalues of the discrete-time Koopman matrix `exp(A dt)` at every
/// block and location.
pub fn koopman_eigenvalues<T: Real>(op: &KoopmanLevelOp<T>, dt: f64) -> Result<Vec<ModeSpectrum>> {
    let (h, w) = op.spatial();
    let mut out = Vec::with_capacity(op.alpha.numel());
    for k in 0..op.blocks() {
        for i in 0..h {
            for j in 0..w {
                let (alpha, beta) = (op.alpha_at(k, i, j), op.beta_at(k, i, j));
                check_guard(alpha, dt)?;
                out.push(ModeSpectrum {
                    level: op.level,
                    block: k,
                    i,
                    j,
                    alpha,
                    beta,
                    magnitude: (alpha * dt).exp(),
                    phase: beta * dt,
                });
            }
        }
    }
    Ok(out)
}
