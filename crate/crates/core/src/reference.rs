//! Baseline excitation and test signals: APRBS, multisine and ramp.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

fn check_range(range: [f64; 2]) -> Result<()> {
    let [lo, hi] = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::config("range", format!("[{lo}, {hi}] is empty")));
    }
    Ok(())
}

fn check_t0(t0: f64) -> Result<()> {
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(Error::config("sampling_time", "must be finite and > 0"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprbsConfig {
    /// Minimum hold time in seconds.
    pub hold_time: f64,
    pub range: [f64; 2],
    pub n_samples: usize,
    pub sampling_time: f64,
    pub seed: u64,
}

impl AprbsConfig {
    /// Shortest run in samples, `ceil(T_H / T0)`.
    pub fn min_hold(&self) -> usize {
        ((self.hold_time / self.sampling_time) - 1e-9)
            .ceil()
            .max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        check_t0(self.sampling_time)?;
        check_range(self.range)?;
        if !(self.hold_time.is_finite() && self.hold_time >= self.sampling_time) {
            return Err(Error::config("hold_time", "must be >= sampling_time"));
        }
        Ok(())
    }
}

/// Random levels held for `h` samples, `h` uniform on `[h_min, 3 h_min]`.
///
/// The last run absorbs any remainder shorter than `h_min`, so every run of
/// the output honours the minimum hold.
pub fn generate_aprbs(cfg: &AprbsConfig) -> Result<Signal> {
    cfg.validate()?;
    let [lo, hi] = cfg.range;
    let h_min = cfg.min_hold();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.n_samples);
    while out.len() < cfg.n_samples {
        let mut hold = rng.random_range(h_min..=3 * h_min);
        let left = cfg.n_samples - out.len();
        if left < hold + h_min {
            hold = left;
        }
        let level = rng.random_range(lo..=hi);
        out.extend(std::iter::repeat_n(level, hold));
    }
    Signal::new(out, cfg.sampling_time)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultisineConfig {
    /// Excited band `[f_lo, f_hi]` in Hz.
    pub band: [f64; 2],
    pub range: [f64; 2],
    pub n_samples: usize,
    pub sampling_time: f64,
    pub seed: u64,
}

impl MultisineConfig {
    pub fn validate(&self) -> Result<()> {
        check_t0(self.sampling_time)?;
        check_range(self.range)?;
        let [f_lo, f_hi] = self.band;
        let nyquist = 0.5 / self.sampling_time;
        if !(f_lo >= 0.0 && f_lo <= f_hi && f_hi <= nyquist + 1e-12) {
            return Err(Error::config(
                "band",
                format!("need 0 <= f_lo <= f_hi <= {nyquist} Hz"),
            ));
        }
        if self.n_samples < 2 {
            return Err(Error::config("n_samples", "must be >= 2"));
        }
        Ok(())
    }

    /// Non-DC DFT bins whose frequency lies inside the band.
    pub fn bins(&self) -> Vec<usize> {
        let n = self.n_samples;
        let df = 1.0 / (n as f64 * self.sampling_time);
        let tol = 1e-9 * df;
        (1..=n / 2)
            .filter(|&k| {
                let f = k as f64 * df;
                f >= self.band[0] - tol && f <= self.band[1] + tol
            })
            .collect()
    }
}

/// Equal-amplitude cosines on the in-band DFT bins with random phases,
/// rescaled to span `range` exactly.
pub fn generate_multisine(cfg: &MultisineConfig) -> Result<Signal> {
    cfg.validate()?;
    let bins = cfg.bins();
    if bins.is_empty() {
        return Err(Error::EmptyBand {
            lo: cfg.band[0],
            hi: cfg.band[1],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phases: Vec<f64> = bins
        .iter()
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    let n = cfg.n_samples;
    let raw: Vec<f64> = (0..n)
        .map(|t| {
            bins.iter()
                .zip(&phases)
                .map(|(&k, &ph)| (2.0 * PI * (k * t % n) as f64 / n as f64 + ph).cos())
                .sum()
        })
        .collect();
    let (min, max) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let [lo, hi] = cfg.range;
    let span = max - min;
    let out = raw
        .into_iter()
        .map(|v| {
            if span > 0.0 {
                lo + (v - min) / span * (hi - lo)
            } else {
                0.5 * (lo + hi)
            }
        })
        .collect();
    Signal::new(out, cfg.sampling_time)
}

pub fn generate_ramp(range: [f64; 2], n_samples: usize, sampling_time: f64) -> Result<Signal> {
    check_range(range)?;
    if n_samples < 2 {
        return Err(Error::config(
            "n_samples",
            "a ramp needs at least 2 samples",
        ));
    }
    let [lo, hi] = range;
    let last = (n_samples - 1) as f64;
    let mut out: Vec<f64> = (0..n_samples)
        .map(|i| lo + (hi - lo) * i as f64 / last)
        .collect();
    out[n_samples - 1] = hi;
    Signal::new(out, sampling_time)
}

/// Lengths of maximal runs of equal consecutive samples.
pub fn run_lengths(samples: &[f64]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        let mut j = i + 1;
        while j < samples.len() && samples[j] == samples[i] {
            j += 1;
        }
        runs.push(j - i);
        i = j;
    }
    runs
}
