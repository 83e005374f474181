use crate::error::{HkdError, Result};

/// Variance-exploding noise schedule `sigma(t) = t` on `[epsilon, horizon]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub epsilon: f64,
    pub horizon: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { epsilon: 0.02, horizon: 3.0 }
    }
}

impl Schedule {
    /// On-disk tag of the `sigma(t) = t` form.
    pub const VE_TAG: u8 = 1;

    pub fn new(epsilon: f64, horizon: f64) -> Result<Self> {
        let s = Self { epsilon, horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.horizon > self.epsilon && self.horizon.is_finite()) {
            return Err(HkdError::Config(format!(
                "need 0 < epsilon < horizon, got epsilon={} horizon={}",
                self.epsilon, self.horizon
            )));
        }
        Ok(())
    }

    pub fn sigma(&self, t: f64) -> f64 {
        t
    }

    pub fn sigma_dot(&self, _t: f64) -> f64 {
        1.0
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let tol = 1e-9 * self.horizon;
        if !(t >= self.epsilon - tol && t <= self.horizon + tol) {
            return Err(HkdError::InvalidArgument(format!(
                "time {t} outside [{}, {}]",
                self.epsilon, self.horizon
            )));
        }
        Ok(())
    }

    /// `n` uniformly spaced times from `horizon` down to `epsilon`, endpoints exact.
    pub fn grid(&self, n: usize) -> Result<Vec<f64>> {
        if n < 2 {
            return Err(HkdError::InvalidArgument(format!("grid needs at least 2 points, got {n}")));
        }
        let step = (self.horizon - self.epsilon) / (n - 1) as f64;
        let mut g: Vec<f64> = (0..n).map(|k| self.horizon - k as f64 * step).collect();
        g[n - 1] = self.epsilon;
        Ok(g)
    }
}
