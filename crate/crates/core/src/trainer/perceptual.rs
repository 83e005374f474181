use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::numcore::{Real, Tape, Tensor, Var};

/// Channels of both frozen feature layers.
pub const FEATURE_CHANNELS: usize = 16;

/// Frozen two-layer random convolutional feature map.
///
/// Each layer is a stride-2 3x3 convolution (padding 1, floor output size),
/// so the output has a quarter of the input resolution; SiLU sits between
/// the layers and biases are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptualExtractor<T: Real = f32> {
    pub w1: Tensor<T>,
    pub w2: Tensor<T>,
}

impl<T: Real> PerceptualExtractor<T> {
    pub fn new(image_channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kernel = |cout: usize, cin: usize| {
            let bound = (6.0 / (cin * 9) as f64).sqrt();
            Tensor::from_fn(&[cout, cin, 3, 3], |_| T::of(rng.random_range(-bound..bound)))
        };
        let w1 = kernel(FEATURE_CHANNELS, image_channels);
        let w2 = kernel(FEATURE_CHANNELS, FEATURE_CHANNELS);
        Self { w1, w2 }
    }

    pub fn cast<U: Real>(&self) -> PerceptualExtractor<U> {
        PerceptualExtractor { w1: self.w1.cast(), w2: self.w2.cast() }
    }

    /// Records `F(x)` for `x: [N,C,H,W]` with `H, W` divisible by 4.
    pub fn features_on(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        let w1 = tape.constant(self.w1.clone());
        let w2 = tape.constant(self.w2.clone());
        let b = tape.constant(Tensor::zeros(&[FEATURE_CHANNELS]));
        let h = tape.conv2d(x, w1, b, 1, 1)?;
        let h = tape.subsample2(h)?;
        let h = tape.silu(h);
        let h = tape.conv2d(h, w2, b, 1, 1)?;
        tape.subsample2(h)
    }

    pub fn features(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let f = self.features_on(&mut tape, xv)?;
        Ok(tape.value(f).clone())
    }

    /// Records `||F(x) - F(y)||^2 / numel(F)`.
    pub fn distance_on(&self, tape: &mut Tape<T>, x: Var, y: Var) -> Result<Var> {
        let fx = self.features_on(tape, x)?;
        let fy = self.features_on(tape, y)?;
        tape.mse(fx, fy)
    }

    pub fn distance(&self, x: &Tensor<T>, y: &Tensor<T>) -> Result<f64> {
        x.expect_same_shape(y)?;
        let fx = self.features(x)?;
        let fy = self.features(y)?;
        let sq: f64 = fx.data().iter().zip(fy.data()).map(|(a, b)| (a.f64() - b.f64()).powi(2)).sum();
        Ok(sq / fx.numel() as f64)
    }
}
