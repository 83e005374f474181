use crate::error::{HkdError, Result};

/// Assumed data standard deviation for input scaling.
pub const SIGMA_DATA: f64 = 0.5;

/// Nonlinearity used between convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Silu,
    /// Identity everywhere; makes encoder and decoder affine (test mode).
    Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub image_channels: usize,
    pub image_size: usize,
    pub levels: usize,
    /// `d_l` per level, each even.
    pub latent_channels: Vec<usize>,
    pub hidden_widths: Vec<usize>,
    pub epsilon: f64,
    pub horizon: f64,
    pub seed: u64,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            image_channels: 1,
            image_size: 16,
            levels: 3,
            latent_channels: vec![8, 16, 32],
            hidden_widths: vec![32, 64, 128],
            epsilon: 0.02,
            horizon: 3.0,
            seed: 0,
            activation: Activation::Silu,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HkdError::Config(m));
        if self.image_channels == 0 || self.image_size == 0 || self.levels == 0 {
            return bad("image_channels, image_size and levels must be positive".into());
        }
        if self.latent_channels.len() != self.levels || self.hidden_widths.len() != self.levels {
            return bad(format!(
                "{} levels need {} latent channel counts and hidden widths, got {} and {}",
                self.levels,
                self.levels,
                self.latent_channels.len(),
                self.hidden_widths.len()
            ));
        }
        if self.levels > 16 || !self.image_size.is_multiple_of(1 << (self.levels - 1)) {
            return bad(format!(
                "image size {} is not divisible by 2^{}",
                self.image_size,
                self.levels - 1
            ));
        }
        if let Some(d) = self.latent_channels.iter().find(|&&d| d == 0 || d % 2 != 0) {
            return bad(format!("latent channel counts must be even and positive, got {d}"));
        }
        if self.hidden_widths.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if !(self.epsilon > 0.0 && self.horizon > self.epsilon && self.horizon.is_finite()) {
            return bad(format!(
                "need 0 < epsilon < horizon, got epsilon={} horizon={}",
                self.epsilon, self.horizon
            ));
        }
        Ok(())
    }

    /// Spatial size `h_l = w_l` of 1-based level `l`.
    pub fn level_size(&self, level: usize) -> usize {
        self.image_size >> (level - 1)
    }

    /// Shape `[d_l, h_l, w_l]` of one sample's level-`l` observables.
    pub fn level_shape(&self, level: usize) -> [usize; 3] {
        let s = self.level_size(level);
        [self.latent_channels[level - 1], s, s]
    }

    pub fn image_shape(&self) -> [usize; 3] {
        [self.image_channels, self.image_size, self.image_size]
    }

    /// `T - epsilon`.
    pub fn span(&self) -> f64 {
        self.horizon - self.epsilon
    }

    /// Snaps `t` to the horizon or epsilon when within float32 rounding of them.
    pub fn snap_time(&self, t: f64) -> f64 {
        let tol = 1e-6 * self.horizon.abs().max(1.0);
        if (t - self.epsilon).abs() <= tol {
            self.epsilon
        } else if (t - self.horizon).abs() <= tol {
            self.horizon
        } else {
            t
        }
    }

    /// Encoder input scaling `1 / sqrt(t^2 + sigma_data^2)`, which keeps the
    /// noisy input at roughly unit variance across times.
    pub fn input_scale(&self, t: f64) -> f64 {
        1.0 / (t * t + SIGMA_DATA * SIGMA_DATA).sqrt()
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let t = self.snap_time(t);
        if !(t >= self.epsilon && t <= self.horizon) {
            return Err(HkdError::InvalidArgument(format!(
                "time {t} outside [{}, {}]",
                self.epsilon, self.horizon
            )));
        }
        Ok(())
    }

    /// Image-space radius (Chebyshev, pixels) over which a change in level-`l`
    /// latents can influence the decoder output.
    ///
    /// Each 3x3 convolution at scale `s` dilates an aligned footprint by `s`
    /// pixels; 1x1 convolutions and nearest upsampling do not dilate.
    pub fn decoder_receptive_radius(&self, level: usize) -> usize {
        let own = 2 * (1 << (level - 1));
        let below: usize = (1..level).map(|m| 2 * (1 << (m - 1))).sum();
        own + below + 1
    }
}
