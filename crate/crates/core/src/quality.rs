//! Quality function `J = J1 - lambda * J2` scoring candidate sequences in the
//! proxy regressor space.
//!
//! `J1(L)` sums the nearest-neighbour distances of the first `L` candidate
//! points to the already accepted points. `J2(L)` is a length penalty
//! `F * (L^n)_scaled`, where the activity factor `F` is the inverse mean step
//! between consecutive candidate points over the full `L_max` horizon. A
//! candidate that barely moves (a settled sequence) is penalized hardest.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::RegressorMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    Chebyshev,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Metric::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Metric::Manhattan => diffs.sum(),
            Metric::Chebyshev => diffs.fold(0.0, f64::max),
        }
    }
}

fn default_power() -> f64 {
    4.0
}

fn default_epsilon() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityConfig {
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_epsilon")]
    pub epsilon_f: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            power: default_power(),
            metric: Metric::Euclidean,
            epsilon_f: default_epsilon(),
        }
    }
}

impl QualityConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config("lambda", "must be finite and >= 0"));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::config("power", "must be finite and > 0"));
        }
        if !(self.epsilon_f.is_finite() && self.epsilon_f > 0.0) {
            return Err(Error::config("epsilon_f", "must be finite and > 0"));
        }
        Ok(())
    }
}

pub fn nearest_neighbor_distance(
    existing: &RegressorMatrix,
    point: &[f64],
    metric: Metric,
) -> Result<f64> {
    if existing.is_empty() {
        return Err(Error::EmptyReference);
    }
    if point.len() != existing.dim() {
        return Err(Error::DimensionMismatch {
            expected: existing.dim(),
            got: point.len(),
        });
    }
    Ok(existing
        .rows()
        .map(|r| metric.distance(r, point))
        .fold(f64::INFINITY, f64::min))
}

/// Space-filling reward of the first `length` candidate points.
///
/// Candidate points are scored against `existing` only, never against each
/// other.
pub fn j1<P: AsRef<[f64]>>(
    existing: &RegressorMatrix,
    candidates: &[P],
    length: usize,
    metric: Metric,
) -> Result<f64> {
    if length > candidates.len() {
        return Err(Error::IndexOutOfRange {
            index: length,
            needed: length,
            available: candidates.len(),
        });
    }
    candidates[..length]
        .iter()
        .map(|p| nearest_neighbor_distance(existing, p.as_ref(), metric))
        .sum()
}

/// Inverse mean distance between consecutive candidate points.
///
/// The mean is clamped below by `epsilon` so a fully settled sequence yields
/// `1 / epsilon` rather than a division by zero.
pub fn activity_factor<P: AsRef<[f64]>>(points: &[P], metric: Metric, epsilon: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::IndexOutOfRange {
            index: points.len(),
            needed: 2,
            available: points.len(),
        });
    }
    let total: f64 = points
        .windows(2)
        .map(|w| metric.distance(w[1].as_ref(), w[0].as_ref()))
        .sum();
    let mean = total / (points.len() - 1) as f64;
    Ok(1.0 / mean.max(epsilon))
}

/// `(L^n - 1) / (L_max^n - 1)`, mapping `1..=L_max` onto `[0, 1]`.
pub fn scaled_length(length: usize, max_length: usize, power: f64) -> Result<f64> {
    if length < 1 || length > max_length {
        return Err(Error::IndexOutOfRange {
            index: length,
            needed: 1,
            available: max_length,
        });
    }
    if max_length == 1 {
        return Ok(0.0);
    }
    let num = (length as f64).powf(power) - 1.0;
    let den = (max_length as f64).powf(power) - 1.0;
    Ok(num / den)
}

pub fn j2(length: usize, max_length: usize, activity: f64, power: f64) -> Result<f64> {
    Ok(activity * scaled_length(length, max_length, power)?)
}

pub fn j_total(j1: f64, j2: f64, lambda: f64) -> f64 {
    j1 - lambda * j2
}

/// Quality profile of one amplitude level over all admissible lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    pub level: f64,
    pub level_index: usize,
    /// `J1(L)` for `L = 1..=L_max` (index `L - 1`).
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
    pub j: Vec<f64>,
    pub activity: f64,
    /// Length maximizing `J`, smallest on ties.
    pub best_length: usize,
}

impl CandidateEvaluation {
    /// Scores `points` (the candidate's regressor trajectory over `L_max`
    /// steps) against the accepted points.
    pub fn evaluate<P: AsRef<[f64]>>(
        existing: &RegressorMatrix,
        points: &[P],
        cfg: &QualityConfig,
        level: f64,
        level_index: usize,
    ) -> Result<Self> {
        let max_length = points.len();
        let activity = activity_factor(points, cfg.metric, cfg.epsilon_f)?;
        let mut j1s = Vec::with_capacity(max_length);
        let mut j2s = Vec::with_capacity(max_length);
        let mut js = Vec::with_capacity(max_length);
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            acc += nearest_neighbor_distance(existing, p.as_ref(), cfg.metric)?;
            let len = i + 1;
            let pen = j2(len, max_length, activity, cfg.power)?;
            j1s.push(acc);
            j2s.push(pen);
            js.push(j_total(acc, pen, cfg.lambda));
        }
        let best_length = argmax_first(&js) + 1;
        Ok(Self {
            level,
            level_index,
            j1: j1s,
            j2: j2s,
            j: js,
            activity,
            best_length,
        })
    }

    pub fn max_length(&self) -> usize {
        self.j.len()
    }

    pub fn best_value(&self) -> f64 {
        self.j[self.best_length - 1]
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Ranking of `(J, L, level)` triples: higher `J`, then shorter `L`, then
/// lower level. `Ordering::Less` means `a` is preferred.
pub fn preference(a: (f64, usize, f64), b: (f64, usize, f64)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.total_cmp(&b.2))
}
