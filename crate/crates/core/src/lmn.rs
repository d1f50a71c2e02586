//! Local model network trained with the local linear model tree (LOLIMOT)
//! algorithm, used as a NARX one-step predictor.
//!
//! The regressor space is partitioned into axis-aligned hyperrectangles. Each
//! rectangle carries an affine local model and a Gaussian validity function
//! centred on it with per-axis standard deviation `k_sigma * extent`.
//! Validities are normalized to sum to one, and the network output is the
//! validity-weighted sum of the local model outputs.
//!
//! Training grows the tree greedily: the partition with the largest local
//! loss is halved along every axis in turn, the two new local models are
//! fitted by weighted least squares, and the split with the lowest global
//! loss is kept if it improves on the current network.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{
    build_regressor_matrix, MultiSignal, OperatingPoint, RegressorConfig, RegressorMatrix, Signal,
};

const DIVERGENCE_LIMIT: f64 = 1e6;

fn default_max_models() -> usize {
    10
}

fn default_k_sigma() -> f64 {
    1.0 / 3.0
}

fn default_order() -> usize {
    1
}

fn default_ridge() -> f64 {
    1e-8
}

fn default_margin() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmnConfig {
    #[serde(default = "default_max_models")]
    pub max_local_models: usize,
    #[serde(default = "default_k_sigma")]
    pub k_sigma: f64,
    #[serde(default = "default_order")]
    pub dynamic_order: usize,
    /// Ridge added when a local normal-equation system is singular.
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    /// Relative margin added around the training data's bounding box.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

impl Default for LmnConfig {
    fn default() -> Self {
        Self {
            max_local_models: default_max_models(),
            k_sigma: default_k_sigma(),
            dynamic_order: default_order(),
            ridge: default_ridge(),
            margin: default_margin(),
        }
    }
}

impl LmnConfig {
    pub fn with_models(max_local_models: usize) -> Self {
        Self {
            max_local_models,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_local_models < 1 {
            return Err(Error::config("max_local_models", "must be >= 1"));
        }
        if !(self.k_sigma.is_finite() && self.k_sigma > 0.0) {
            return Err(Error::config("k_sigma", "must be finite and > 0"));
        }
        if self.dynamic_order < 1 {
            return Err(Error::config("dynamic_order", "must be >= 1"));
        }
        if !(self.ridge.is_finite() && self.ridge > 0.0) {
            return Err(Error::config("ridge", "must be finite and > 0"));
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::config("margin", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Axis-aligned hyperrectangle `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Partition {
    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn extent(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn volume(&self) -> f64 {
        (0..self.lower.len()).map(|d| self.extent(d)).product()
    }

    /// Half-open membership, closed on the upper face of the outer box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(d, &v)| v >= self.lower[d] && v <= self.upper[d])
    }

    pub fn halve(&self, d: usize) -> (Partition, Partition) {
        let mid = 0.5 * (self.lower[d] + self.upper[d]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[d] = mid;
        right.lower[d] = mid;
        (left, right)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub partition: Partition,
    pub center: Vec<f64>,
    /// Validity standard deviation per axis.
    pub widths: Vec<f64>,
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl LocalModel {
    pub fn affine(&self, x: &[f64]) -> f64 {
        self.offset + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    fn log_activation(&self, x: &[f64]) -> f64 {
        -0.5 * x
            .iter()
            .zip(&self.center)
            .zip(&self.widths)
            .map(|((v, c), s)| ((v - c) / s).powi(2))
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmnModel {
    pub dim: usize,
    pub dynamic_order: usize,
    pub k_sigma: f64,
    pub bounds: Partition,
    pub local_models: Vec<LocalModel>,
    /// Global training loss after each accepted model count.
    pub loss_history: Vec<f64>,
}

fn validities_of(models: &[LocalModel], x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(models.iter().map(|m| m.log_activation(x)));
    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
}

impl LmnModel {
    pub fn num_local_models(&self) -> usize {
        self.local_models.len()
    }

    /// Normalized validity of every local model at `x`.
    pub fn validities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut out = Vec::with_capacity(self.local_models.len());
        validities_of(&self.local_models, x, &mut out);
        Ok(out)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    pub fn predict_one_step(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut phi = Vec::with_capacity(self.local_models.len());
        validities_of(&self.local_models, x, &mut phi);
        Ok(predict_with(&self.local_models, &phi, x))
    }

    pub fn num_inputs(&self) -> usize {
        self.dim / self.dynamic_order - 1
    }

    /// Output-error simulation feeding back the model's own predictions.
    ///
    /// `y_init = [y(0), y(-1), .., y(1 - m)]`; inputs before `u(0)` are held
    /// at `u(0)`. Returns `y(0..N)` aligned with `u`.
    pub fn simulate_free_run(&self, u: &MultiSignal, y_init: &[f64]) -> Result<Signal> {
        let m = self.dynamic_order;
        let p = self.num_inputs();
        if u.num_inputs() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: u.num_inputs(),
            });
        }
        if y_init.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: y_init.len(),
            });
        }
        let n = u.len().ok_or(Error::LengthMismatch {
            what: "input channels",
            left: u.min_len(),
            right: u.lengths().into_iter().max().unwrap_or(0),
        })?;
        let mut y = Vec::with_capacity(n);
        if n == 0 {
            return Signal::new(y, u.sampling_time());
        }
        y.push(y_init[0]);
        let u_at = |j: usize, t: isize| u.input(j)[t.max(0) as usize];
        let mut x = Vec::with_capacity(self.dim);
        let mut phi = Vec::with_capacity(self.local_models.len());
        for k in 1..n as isize {
            x.clear();
            for j in 0..p {
                for d in 1..=m as isize {
                    x.push(u_at(j, k - d));
                }
            }
            for d in 1..=m as isize {
                let t = k - d;
                x.push(if t >= 0 {
                    y[t as usize]
                } else {
                    y_init[(-t) as usize]
                });
            }
            validities_of(&self.local_models, &x, &mut phi);
            let yk = predict_with(&self.local_models, &phi, &x);
            if !yk.is_finite() || yk.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Divergence {
                    step: k as usize,
                    value: yk,
                });
            }
            y.push(yk);
        }
        Signal::new(y, u.sampling_time())
    }
}

fn predict_with(models: &[LocalModel], phi: &[f64], x: &[f64]) -> f64 {
    models.iter().zip(phi).map(|(m, w)| w * m.affine(x)).sum()
}

/// Weighted least squares `min sum w_k (y_k - a.x_k - b)^2`, returning
/// `(a, b)`. Falls back to a ridge-regularized solve when singular.
pub fn weighted_least_squares(
    x: &RegressorMatrix,
    y: &[f64],
    w: &[f64],
    ridge: f64,
) -> (Vec<f64>, f64) {
    let dim = x.dim();
    let q = dim + 1;
    let mut a = DMatrix::<f64>::zeros(q, q);
    let mut b = DVector::<f64>::zeros(q);
    let mut z = vec![0.0; q];
    for ((row, &yk), &wk) in x.rows().zip(y).zip(w) {
        z[..dim].copy_from_slice(row);
        z[dim] = 1.0;
        for i in 0..q {
            let wz = wk * z[i];
            b[i] += wz * yk;
            for j in i..q {
                a[(i, j)] += wz * z[j];
            }
        }
    }
    for i in 0..q {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }
    let theta = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => {
            let scale = (a.trace() / q as f64).abs().max(f64::MIN_POSITIVE);
            let reg = a + DMatrix::<f64>::identity(q, q) * (ridge * scale);
            match reg.clone().cholesky() {
                Some(ch) => ch.solve(&b),
                None => reg
                    .svd(true, true)
                    .solve(&b, 1e-14)
                    .unwrap_or_else(|_| DVector::zeros(q)),
            }
        }
    };
    (theta.rows(0, dim).iter().copied().collect(), theta[dim])
}

fn bounding_box(x: &RegressorMatrix, margin: f64) -> Partition {
    let dim = x.dim();
    let mut lower = vec![f64::INFINITY; dim];
    let mut upper = vec![f64::NEG_INFINITY; dim];
    for row in x.rows() {
        for d in 0..dim {
            lower[d] = lower[d].min(row[d]);
            upper[d] = upper[d].max(row[d]);
        }
    }
    for d in 0..dim {
        let span = (upper[d] - lower[d]).max(1e-9);
        lower[d] -= margin * span;
        upper[d] += margin * span;
        if upper[d] - lower[d] < 1e-9 {
            upper[d] = lower[d] + 1e-9;
        }
    }
    Partition { lower, upper }
}

struct Trainer<'a> {
    x: &'a RegressorMatrix,
    y: &'a [f64],
    cfg: &'a LmnConfig,
}

impl Trainer<'_> {
    fn shell(&self, partition: Partition) -> LocalModel {
        let widths = (0..partition.lower.len())
            .map(|d| self.cfg.k_sigma * partition.extent(d))
            .collect();
        LocalModel {
            center: partition.center(),
            widths,
            weights: vec![0.0; self.x.dim()],
            offset: 0.0,
            partition,
        }
    }

    /// Row-major `N x M` validity matrix.
    fn validity_matrix(&self, models: &[LocalModel]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.x.row_count() * models.len());
        let mut phi = Vec::with_capacity(models.len());
        for row in self.x.rows() {
            validities_of(models, row, &mut phi);
            out.extend_from_slice(&phi);
        }
        out
    }

    fn fit(&self, model: &mut LocalModel, phi: &[f64], idx: usize, count: usize) {
        let w: Vec<f64> = phi.chunks_exact(count).map(|r| r[idx]).collect();
        let (weights, offset) = weighted_least_squares(self.x, self.y, &w, self.cfg.ridge);
        model.weights = weights;
        model.offset = offset;
    }

    fn residuals(&self, models: &[LocalModel], phi: &[f64]) -> Vec<f64> {
        let m = models.len();
        self.x
            .rows()
            .zip(self.y)
            .zip(phi.chunks_exact(m))
            .map(|((row, &yk), w)| yk - predict_with(models, w, row))
            .collect()
    }

    fn points_in(&self, part: &Partition) -> usize {
        self.x.rows().filter(|r| part.contains(r)).count()
    }
}

/// Grows a local model network on `(x, y)` pairs.
pub fn train(x: &RegressorMatrix, y: &[f64], cfg: &LmnConfig) -> Result<LmnModel> {
    cfg.validate()?;
    if x.row_count() != y.len() {
        return Err(Error::LengthMismatch {
            what: "regressor rows vs targets",
            left: x.row_count(),
            right: y.len(),
        });
    }
    let dim = x.dim();
    if x.row_count() < dim + 1 {
        return Err(Error::InsufficientData {
            samples: x.row_count(),
            params: dim + 1,
        });
    }
    if !dim.is_multiple_of(cfg.dynamic_order) || dim / cfg.dynamic_order < 2 {
        return Err(Error::config(
            "dynamic_order",
            format!(
                "regressor dimension {dim} is not (p + 1) * {}",
                cfg.dynamic_order
            ),
        ));
    }
    let tr = Trainer { x, y, cfg };
    let bounds = bounding_box(x, cfg.margin);
    let mut models = vec![tr.shell(bounds.clone())];
    let phi = tr.validity_matrix(&models);
    tr.fit(&mut models[0], &phi, 0, 1);
    let mut residuals = tr.residuals(&models, &phi);
    let mut phi = phi;
    let mut loss: f64 = residuals.iter().map(|e| e * e).sum();
    let mut loss_history = vec![loss];
    let min_points = dim + 1;

    while models.len() < cfg.max_local_models {
        let m = models.len();
        let mut local_loss: Vec<(usize, f64)> = (0..m)
            .map(|i| {
                let l = phi
                    .chunks_exact(m)
                    .zip(&residuals)
                    .map(|(w, e)| w[i] * e * e)
                    .sum::<f64>();
                (i, l)
            })
            .collect();
        local_loss.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut accepted = None;
        for &(worst, _) in &local_loss {
            let mut best: Option<(f64, Vec<LocalModel>, Vec<f64>)> = None;
            for d in 0..dim {
                let (left, right) = models[worst].partition.halve(d);
                if tr.points_in(&left) < min_points || tr.points_in(&right) < min_points {
                    continue;
                }
                let mut trial: Vec<LocalModel> = models
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != worst)
                    .map(|(_, lm)| lm.clone())
                    .collect();
                trial.push(tr.shell(left));
                trial.push(tr.shell(right));
                let count = trial.len();
                let trial_phi = tr.validity_matrix(&trial);
                let (a, b) = trial.split_at_mut(count - 1);
                tr.fit(&mut a[count - 2], &trial_phi, count - 2, count);
                tr.fit(&mut b[0], &trial_phi, count - 1, count);
                let res = tr.residuals(&trial, &trial_phi);
                let trial_loss: f64 = res.iter().map(|e| e * e).sum();
                if best.as_ref().is_none_or(|(l, _, _)| trial_loss < *l) {
                    best = Some((trial_loss, trial, trial_phi));
                }
            }
            if let Some((l, trial, trial_phi)) = best {
                if l < loss {
                    accepted = Some((l, trial, trial_phi));
                    break;
                }
            }
        }
        let Some((l, trial, trial_phi)) = accepted else {
            break;
        };
        models = trial;
        phi = trial_phi;
        residuals = tr.residuals(&models, &phi);
        loss = l;
        loss_history.push(loss);
    }

    Ok(LmnModel {
        dim,
        dynamic_order: cfg.dynamic_order,
        k_sigma: cfg.k_sigma,
        bounds,
        local_models: models,
        loss_history,
    })
}

/// One-step-ahead training pairs from a measured record.
///
/// Rows `k = 1..N-1` regress `y(k)` on `[u(k-1).., y(k-1)..]`; history before
/// the record is held at `(u(0), y(0))`.
pub fn narx_training_data(
    u: &MultiSignal,
    y: &Signal,
    order: usize,
) -> Result<(RegressorMatrix, Vec<f64>)> {
    let cfg = RegressorConfig::new(order, u.num_inputs())?;
    let n = y.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            samples: n,
            params: cfg.dim() + 1,
        });
    }
    let initial = OperatingPoint::new(
        u.inputs()
            .iter()
            .map(|c| c.first().copied().unwrap_or(0.0))
            .collect(),
        y.samples()[0],
    );
    let full = build_regressor_matrix(u, y, &cfg, &initial)?;
    let mut x = RegressorMatrix::with_capacity(cfg.dim(), n - 1);
    for k in 0..n - 1 {
        x.push_row(full.row(k))?;
    }
    Ok((x, y.samples()[1..].to_vec()))
}
