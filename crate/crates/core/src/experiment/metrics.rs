//! Scores and descriptive statistics for signals, models and designs.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{RegressorMatrix, Signal};

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            what: "rmse operands",
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Ok(0.0);
    }
    let sse: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok((sse / y_true.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBin {
    pub frequency: f64,
    pub magnitude: f64,
}

/// One-sided DFT magnitudes at `k / (N T0)` for `k = 0..=N/2`.
pub fn spectrum(signal: &Signal) -> Result<Vec<SpectrumBin>> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::config("signal", "spectrum needs at least 2 samples"));
    }
    let mut buf: Vec<Complex<f64>> = signal
        .samples()
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * signal.sampling_time());
    Ok(buf[..=n / 2]
        .iter()
        .enumerate()
        .map(|(k, c)| SpectrumBin {
            frequency: k as f64 * df,
            magnitude: c.norm(),
        })
        .collect())
}

/// Magnitude-weighted mean frequency, DC bin excluded.
pub fn spectral_centroid(spectrum: &[SpectrumBin]) -> f64 {
    let (num, den) = spectrum.iter().skip(1).fold((0.0, 0.0), |(n, d), b| {
        (n + b.frequency * b.magnitude, d + b.magnitude)
    });
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Largest distance from any point of a regular grid over the box
/// `[lower, upper]` to its nearest data point (Euclidean).
pub fn fill_distance(
    points: &RegressorMatrix,
    lower: &[f64],
    upper: &[f64],
    per_axis: usize,
) -> Result<f64> {
    let dim = points.dim();
    if lower.len() != dim || upper.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: lower.len().min(upper.len()),
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyReference);
    }
    if per_axis < 2 {
        return Err(Error::config(
            "per_axis",
            "grid needs at least 2 points per axis",
        ));
    }
    let total = per_axis.pow(dim as u32);
    let mut probe = vec![0.0; dim];
    let mut worst: f64 = 0.0;
    for idx in 0..total {
        let mut rest = idx;
        for d in 0..dim {
            let i = rest % per_axis;
            rest /= per_axis;
            probe[d] = lower[d] + (upper[d] - lower[d]) * i as f64 / (per_axis - 1) as f64;
        }
        let nearest = points
            .rows()
            .map(|r| {
                r.iter()
                    .zip(&probe)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    Ok(worst.sqrt())
}

/// Share of 2-D regressor points `(u, y)` within `tolerance` of the line
/// `y = u`.
pub fn equilibrium_fraction(points: &RegressorMatrix, tolerance: f64) -> Result<f64> {
    if points.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: points.dim(),
        });
    }
    if points.is_empty() {
        return Ok(0.0);
    }
    let near = points
        .rows()
        .filter(|r| (r[0] - r[1]).abs() / std::f64::consts::SQRT_2 < tolerance)
        .count();
    Ok(near as f64 / points.row_count() as f64)
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_abs_diff_eq!(rmse(&[0.0; 7], &[0.1; 7]).unwrap(), 0.1, epsilon = 1e-15);
        assert_eq!(rmse(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert!(rmse(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn spectrum_of_constant_and_sinusoid() {
        let c = Signal::new(vec![0.4; 64], 1.0).unwrap();
        let s = spectrum(&c).unwrap();
        assert_eq!(s.len(), 33);
        assert_abs_diff_eq!(s[0].magnitude, 0.4 * 64.0, epsilon = 1e-12);
        assert!(s[1..].iter().all(|b| b.magnitude < 1e-12));

        let x: Vec<f64> = (0..100)
            .map(|t| (2.0 * PI * 7.0 * t as f64 / 100.0).sin())
            .collect();
        let s = spectrum(&Signal::new(x, 0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(s[7].frequency, 7.0 / 50.0, epsilon = 1e-15);
        for (k, b) in s.iter().enumerate() {
            if k == 7 {
                assert_abs_diff_eq!(b.magnitude, 50.0, epsilon = 1e-9);
            } else {
                assert!(b.magnitude < 1e-9);
            }
        }
        assert_abs_diff_eq!(spectral_centroid(&s), 7.0 / 50.0, epsilon = 1e-9);
    }

    #[test]
    fn fill_distance_of_corners() {
        let pts = RegressorMatrix::from_rows(2, &[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
            .unwrap();
        let d = fill_distance(&pts, &[0.0, 0.0], &[1.0, 1.0], 3).unwrap();
        assert_abs_diff_eq!(d, 0.5f64.sqrt(), epsilon = 1e-15);
        let one = RegressorMatrix::from_rows(2, &[[0.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(
            fill_distance(&one, &[0.0, 0.0], &[1.0, 1.0], 11).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn equilibrium_share() {
        let pts = RegressorMatrix::from_rows(2, &[[0.5, 0.5], [0.5, 0.55], [0.0, 1.0], [1.0, 0.9]])
            .unwrap();
        assert_abs_diff_eq!(
            equilibrium_fraction(&pts, 0.05).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn type7_quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[5.0], 0.3), 5.0);
        assert!(median(&[]).is_nan());
    }
}
