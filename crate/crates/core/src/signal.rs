//! Sampled signals and the NARX regressor space built from them.
//!
//! A regressor at time index `k` with dynamic order `m` collects the delayed
//! inputs and outputs
//!
//! ```text
//! x(k) = [u1(k-1) .. u1(k-m), .., up(k-1) .. up(k-m), y(k-1) .. y(k-m)]
//! ```
//!
//! Row `k` of a [`RegressorMatrix`] (1-based) therefore pairs the input sample
//! `u(k-1)` with the output `y(k-1)` observed while it was applied. Indices
//! before the start of the record are filled with an [`OperatingPoint`].

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled scalar trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    samples: Vec<f64>,
    sampling_time: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sampling_time: f64) -> Result<Self> {
        check_sampling_time(sampling_time)?;
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(
                "samples",
                format!("non-finite value at index {i}"),
            ));
        }
        Ok(Self {
            samples,
            sampling_time,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sampling_time(&self) -> f64 {
        self.sampling_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `p` input channels sharing one sampling time.
///
/// Channel lengths may differ while a design is being generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSignal {
    inputs: Vec<Vec<f64>>,
    sampling_time: f64,
}

impl MultiSignal {
    pub fn new(inputs: Vec<Vec<f64>>, sampling_time: f64) -> Result<Self> {
        check_sampling_time(sampling_time)?;
        if inputs.is_empty() {
            return Err(Error::config("inputs", "at least one input is required"));
        }
        for (j, ch) in inputs.iter().enumerate() {
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(
                    format!("inputs[{j}]"),
                    "contains a non-finite value",
                ));
            }
        }
        Ok(Self {
            inputs,
            sampling_time,
        })
    }

    /// An empty record with `p` channels.
    pub fn empty(p: usize, sampling_time: f64) -> Result<Self> {
        Self::new(vec![Vec::new(); p], sampling_time)
    }

    pub fn from_signal(signal: Signal) -> Self {
        let sampling_time = signal.sampling_time;
        Self {
            inputs: vec![signal.samples],
            sampling_time,
        }
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn input(&self, j: usize) -> &[f64] {
        &self.inputs[j]
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn sampling_time(&self) -> f64 {
        self.sampling_time
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.inputs.iter().map(Vec::len).collect()
    }

    /// Common length, or `None` while the channels are ragged.
    pub fn len(&self) -> Option<usize> {
        let n = self.inputs[0].len();
        self.inputs.iter().all(|c| c.len() == n).then_some(n)
    }

    /// True when no channel has a sample yet.
    pub fn is_empty(&self) -> bool {
        self.inputs.iter().all(Vec::is_empty)
    }

    pub fn min_len(&self) -> usize {
        self.inputs.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn channel(&self, j: usize) -> Signal {
        Signal {
            samples: self.inputs[j].clone(),
            sampling_time: self.sampling_time,
        }
    }

    pub(crate) fn push(&mut self, j: usize, value: f64) {
        self.inputs[j].push(value);
    }
}

fn check_sampling_time(t0: f64) -> Result<()> {
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(Error::config("sampling_time", "must be finite and > 0"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub dynamic_order: usize,
    pub num_inputs: usize,
}

impl RegressorConfig {
    pub fn new(dynamic_order: usize, num_inputs: usize) -> Result<Self> {
        if dynamic_order < 1 {
            return Err(Error::config("dynamic_order", "must be >= 1"));
        }
        if num_inputs < 1 {
            return Err(Error::config("num_inputs", "must be >= 1"));
        }
        Ok(Self {
            dynamic_order,
            num_inputs,
        })
    }

    /// Regressor dimension `(p + 1) * m`.
    pub fn dim(&self) -> usize {
        (self.num_inputs + 1) * self.dynamic_order
    }
}

/// Values assumed for every sample before the start of a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub inputs: Vec<f64>,
    pub output: f64,
}

impl OperatingPoint {
    pub fn new(inputs: Vec<f64>, output: f64) -> Self {
        Self { inputs, output }
    }

    pub fn zero(p: usize) -> Self {
        Self {
            inputs: vec![0.0; p],
            output: 0.0,
        }
    }
}

/// Row-major `N x dim` matrix of regressor vectors, appended in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl RegressorMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut m = Self::with_capacity(dim, rows.len());
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * rows),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row_count(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    /// Column `c` as an owned vector.
    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }
}

/// Writes the regressor at time `k` into `out`.
///
/// `u_at(j, t)` and `y_at(t)` supply the history; `t` may be negative when the
/// caller pads with an operating point.
pub(crate) fn fill_regressor(
    num_inputs: usize,
    order: usize,
    k: isize,
    u_at: impl Fn(usize, isize) -> f64,
    y_at: impl Fn(isize) -> f64,
    out: &mut Vec<f64>,
) {
    out.clear();
    for j in 0..num_inputs {
        for d in 1..=order as isize {
            out.push(u_at(j, k - d));
        }
    }
    for d in 1..=order as isize {
        out.push(y_at(k - d));
    }
}

/// Regressor at time `k` from an explicit history, without padding.
pub fn build_regressor(
    u_history: &MultiSignal,
    y_history: &Signal,
    k: usize,
    cfg: &RegressorConfig,
) -> Result<Vec<f64>> {
    let m = cfg.dynamic_order;
    if u_history.num_inputs() != cfg.num_inputs {
        return Err(Error::DimensionMismatch {
            expected: cfg.num_inputs,
            got: u_history.num_inputs(),
        });
    }
    let available = u_history.min_len().min(y_history.len());
    if k < m || k > available {
        return Err(Error::IndexOutOfRange {
            index: k,
            needed: m,
            available,
        });
    }
    let mut out = Vec::with_capacity(cfg.dim());
    fill_regressor(
        cfg.num_inputs,
        m,
        k as isize,
        |j, t| u_history.input(j)[t as usize],
        |t| y_history.samples()[t as usize],
        &mut out,
    );
    Ok(out)
}

/// Rows `k = 1..=N`; history before index 0 comes from `initial`.
pub fn build_regressor_matrix(
    u: &MultiSignal,
    y: &Signal,
    cfg: &RegressorConfig,
    initial: &OperatingPoint,
) -> Result<RegressorMatrix> {
    if u.num_inputs() != cfg.num_inputs {
        return Err(Error::DimensionMismatch {
            expected: cfg.num_inputs,
            got: u.num_inputs(),
        });
    }
    if initial.inputs.len() != cfg.num_inputs {
        return Err(Error::DimensionMismatch {
            expected: cfg.num_inputs,
            got: initial.inputs.len(),
        });
    }
    let n = u.len().ok_or(Error::LengthMismatch {
        what: "input channels",
        left: u.min_len(),
        right: u.lengths().into_iter().max().unwrap_or(0),
    })?;
    if y.len() != n {
        return Err(Error::LengthMismatch {
            what: "inputs vs output",
            left: n,
            right: y.len(),
        });
    }
    let mut matrix = RegressorMatrix::with_capacity(cfg.dim(), n);
    let mut row = Vec::with_capacity(cfg.dim());
    for k in 1..=n as isize {
        fill_regressor(
            cfg.num_inputs,
            cfg.dynamic_order,
            k,
            |j, t| {
                if t < 0 {
                    initial.inputs[j]
                } else {
                    u.input(j)[t as usize]
                }
            },
            |t| {
                if t < 0 {
                    initial.output
                } else {
                    y.samples()[t as usize]
                }
            },
            &mut row,
        );
        matrix.data.extend_from_slice(&row);
    }
    Ok(matrix)
}

/// A signal file: input channels plus an optional `y` column.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTable {
    pub inputs: MultiSignal,
    pub output: Option<Signal>,
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

impl SignalTable {
    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.inputs.len().ok_or(Error::LengthMismatch {
            what: "input channels",
            left: self.inputs.min_len(),
            right: self.inputs.lengths().into_iter().max().unwrap_or(0),
        })?;
        if let Some(y) = &self.output {
            if y.len() != n {
                return Err(Error::LengthMismatch {
                    what: "inputs vs output",
                    left: n,
                    right: y.len(),
                });
            }
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.inputs.num_inputs())
            .map(|j| format!("u{j}"))
            .collect();
        if self.output.is_some() {
            header.push("y".to_owned());
        }
        w.write_record(&header)?;
        for k in 0..n {
            let mut rec: Vec<String> = self
                .inputs
                .inputs()
                .iter()
                .map(|c| fmt_value(c[k]))
                .collect();
            if let Some(y) = &self.output {
                rec.push(fmt_value(y.samples()[k]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R, sampling_time: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let mut input_cols = Vec::new();
        let mut y_col = None;
        for (i, h) in headers.iter().enumerate() {
            let h = h.trim();
            if h == "y" {
                if y_col.replace(i).is_some() {
                    return Err(Error::Format("duplicate `y` column".into()));
                }
            } else if let Some(idx) = h.strip_prefix('u').and_then(|s| s.parse::<usize>().ok()) {
                if idx != input_cols.len() + 1 {
                    return Err(Error::Format(format!(
                        "input columns must be u1, u2, ... in order; found `{h}`"
                    )));
                }
                input_cols.push(i);
            } else {
                return Err(Error::Format(format!("unexpected column `{h}`")));
            }
        }
        if input_cols.is_empty() {
            return Err(Error::Format("no input column (u1, ...)".into()));
        }
        let mut inputs = vec![Vec::new(); input_cols.len()];
        let mut ys = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |col: usize| -> Result<f64> {
                let field = rec.get(col).unwrap_or("").trim();
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: cannot parse `{field}`", line + 1)))
            };
            for (j, &c) in input_cols.iter().enumerate() {
                inputs[j].push(parse(c)?);
            }
            if let Some(c) = y_col {
                ys.push(parse(c)?);
            }
        }
        let inputs = MultiSignal::new(inputs, sampling_time)?;
        let output = match y_col {
            Some(_) => Some(Signal::new(ys, sampling_time)?),
            None => None,
        };
        Ok(Self { inputs, output })
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn read_path(path: impl AsRef<Path>, sampling_time: f64) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f), sampling_time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ms(ch: Vec<Vec<f64>>) -> MultiSignal {
        MultiSignal::new(ch, 1.0).unwrap()
    }

    fn sig(v: Vec<f64>) -> Signal {
        Signal::new(v, 1.0).unwrap()
    }

    #[test]
    fn regressor_single_input_first_order() {
        let cfg = RegressorConfig::new(1, 1).unwrap();
        let x = build_regressor(&ms(vec![vec![0.5]]), &sig(vec![0.2]), 1, &cfg).unwrap();
        assert_eq!(x, vec![0.5, 0.2]);
    }

    #[test]
    fn regressor_orders_inputs_then_output() {
        let cfg = RegressorConfig::new(1, 2).unwrap();
        let x = build_regressor(&ms(vec![vec![1.0], vec![0.0]]), &sig(vec![0.3]), 1, &cfg).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.3]);
    }

    #[test]
    fn regressor_second_order_delays() {
        let cfg = RegressorConfig::new(2, 1).unwrap();
        let x = build_regressor(&ms(vec![vec![0.1, 0.4]]), &sig(vec![0.0, 0.02]), 2, &cfg).unwrap();
        assert_eq!(x, vec![0.4, 0.1, 0.02, 0.0]);
    }

    #[test]
    fn regressor_rejects_short_history() {
        let cfg = RegressorConfig::new(2, 1).unwrap();
        let err = build_regressor(&ms(vec![vec![0.1, 0.4]]), &sig(vec![0.0, 0.02]), 1, &cfg);
        assert!(matches!(err, Err(Error::IndexOutOfRange { .. })));
        let err = build_regressor(&ms(vec![vec![0.1, 0.4]]), &sig(vec![0.0, 0.02]), 3, &cfg);
        assert!(matches!(err, Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn matrix_small_example() {
        let cfg = RegressorConfig::new(1, 1).unwrap();
        let m = build_regressor_matrix(
            &ms(vec![vec![0.0, 1.0, 1.0]]),
            &sig(vec![0.0, 0.0, 0.2]),
            &cfg,
            &OperatingPoint::zero(1),
        )
        .unwrap();
        assert_eq!(m.row_count(), 3);
        assert_eq!(m.row(0), &[0.0, 0.0]);
        assert_eq!(m.row(1), &[1.0, 0.0]);
        assert_eq!(m.row(2), &[1.0, 0.2]);
    }

    #[test]
    fn matrix_empty_and_single() {
        let cfg = RegressorConfig::new(1, 1).unwrap();
        let m = build_regressor_matrix(
            &ms(vec![vec![]]),
            &sig(vec![]),
            &cfg,
            &OperatingPoint::zero(1),
        )
        .unwrap();
        assert!(m.is_empty());
        let m = build_regressor_matrix(
            &ms(vec![vec![0.5]]),
            &sig(vec![0.0]),
            &cfg,
            &OperatingPoint::zero(1),
        )
        .unwrap();
        assert_eq!(m.row_count(), 1);
        assert_eq!(m.row(0), &[0.5, 0.0]);
    }

    #[test]
    fn matrix_pads_with_operating_point() {
        let cfg = RegressorConfig::new(2, 1).unwrap();
        let op = OperatingPoint::new(vec![0.7], 0.3);
        let m = build_regressor_matrix(&ms(vec![vec![0.1, 0.4]]), &sig(vec![0.0, 0.02]), &cfg, &op)
            .unwrap();
        assert_eq!(m.row(0), &[0.1, 0.7, 0.0, 0.3]);
        assert_eq!(m.row(1), &[0.4, 0.1, 0.02, 0.0]);
    }

    #[test]
    fn matrix_rejects_mismatched_lengths() {
        let cfg = RegressorConfig::new(1, 1).unwrap();
        let err = build_regressor_matrix(
            &ms(vec![vec![0.0, 1.0]]),
            &sig(vec![0.0]),
            &cfg,
            &OperatingPoint::zero(1),
        );
        assert!(matches!(err, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn csv_round_trip_preserves_bits() {
        let table = SignalTable {
            inputs: ms(vec![vec![0.1, 1.0 / 3.0, -2.5e-7], vec![0.0, 1.0, 0.25]]),
            output: Some(sig(vec![std::f64::consts::PI, 0.0, 1e10])),
        };
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("u1,u2,y\n"));
        let back = SignalTable::read(buf.as_slice(), 1.0).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(SignalTable::read("u1\nabc\n".as_bytes(), 1.0).is_err());
        assert!(SignalTable::read("x\n1\n".as_bytes(), 1.0).is_err());
        assert!(SignalTable::read("u2\n1\n".as_bytes(), 1.0).is_err());
    }

    fn signal_pair() -> impl Strategy<Value = (usize, usize, Vec<Vec<f64>>, Vec<f64>)> {
        (1usize..4, 1usize..4, 0usize..30).prop_flat_map(|(p, m, n)| {
            (
                Just(p),
                Just(m),
                prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), p),
                prop::collection::vec(-1.0f64..1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn matrix_rows_match_pointwise_regressors((p, m, u, y) in signal_pair()) {
            let cfg = RegressorConfig::new(m, p).unwrap();
            let u = ms(u);
            let y = sig(y);
            let mat = build_regressor_matrix(&u, &y, &cfg, &OperatingPoint::zero(p)).unwrap();
            prop_assert_eq!(mat.row_count(), y.len());
            for row in mat.rows() {
                prop_assert_eq!(row.len(), (p + 1) * m);
            }
            for k in m..=y.len() {
                let x = build_regressor(&u, &y, k, &cfg).unwrap();
                prop_assert_eq!(mat.row(k - 1), x.as_slice());
            }
        }

        #[test]
        fn appending_a_sample_appends_one_row((p, m, u, y) in signal_pair(), extra in -1.0f64..1.0) {
            let cfg = RegressorConfig::new(m, p).unwrap();
            let op = OperatingPoint::zero(p);
            let before = build_regressor_matrix(&ms(u.clone()), &sig(y.clone()), &cfg, &op).unwrap();
            let u2: Vec<Vec<f64>> = u.into_iter().map(|mut c| { c.push(extra); c }).collect();
            let mut y2 = y;
            y2.push(extra * 0.5);
            let after = build_regressor_matrix(&ms(u2), &sig(y2), &cfg, &op).unwrap();
            prop_assert_eq!(after.row_count(), before.row_count() + 1);
            for i in 0..before.row_count() {
                prop_assert_eq!(after.row(i), before.row(i));
            }
        }
    }
}
