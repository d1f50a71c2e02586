//! Hammerstein benchmark process
//! `y(k) = 0.2 f(u(k-1)) + 0.8 y(k-1)` with an arctan-shaped static map.
//!
//! Measurement noise is added to the returned samples only; the recursion
//! itself runs on the noise-free output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// `f(x) = (atan(8x - 4) + atan(4)) / (2 atan(4))`, mapping `[0, 1]` onto `[0, 1]`.
pub fn static_nonlinearity(x: f64) -> f64 {
    let a4 = 4f64.atan();
    ((8.0 * x - 4.0).atan() + a4) / (2.0 * a4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammersteinProcess {
    pub pole: f64,
    pub input_gain: f64,
    /// Standard deviation of the additive output noise.
    pub noise_sigma: f64,
}

impl Default for HammersteinProcess {
    fn default() -> Self {
        Self {
            pole: 0.8,
            input_gain: 0.2,
            noise_sigma: 0.0,
        }
    }
}

impl HammersteinProcess {
    pub fn with_noise(noise_sigma: f64) -> Self {
        Self {
            noise_sigma,
            ..Self::default()
        }
    }

    /// Output of a constant input after the transient has died out.
    pub fn steady_state(&self, u: f64) -> f64 {
        self.input_gain / (1.0 - self.pole) * static_nonlinearity(u)
    }

    /// Output samples `y(0..N)` aligned with `u`, starting at `y(0) = y0`.
    ///
    /// `y0` defaults to the steady state of `u(0)`.
    pub fn simulate(&self, u: &Signal, y0: Option<f64>, noise_seed: Option<u64>) -> Result<Signal> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::config("noise_sigma", "must be finite and >= 0"));
        }
        let x = u.samples();
        let mut y = y0.unwrap_or_else(|| x.first().map_or(0.0, |&u0| self.steady_state(u0)));
        let mut out = Vec::with_capacity(x.len());
        for (k, &uk) in x.iter().enumerate() {
            out.push(y);
            if k + 1 < x.len() {
                y = self.input_gain * static_nonlinearity(uk) + self.pole * y;
            }
        }
        if self.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.noise_sigma)
                .map_err(|e| Error::config("noise_sigma", e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed.unwrap_or(0));
            for v in &mut out {
                *v += normal.sample(&mut rng);
            }
        }
        Signal::new(out, u.sampling_time())
    }
}
