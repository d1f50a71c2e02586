//! Incremental concatenation of optimal piecewise-constant sequences.
//!
//! Each iteration picks the input with the fewest samples, scores every
//! unblocked amplitude level over every admissible length with the
//! [quality function](crate::quality), and appends the winning
//! `(level, length)` pair. Levels follow a Latin-hypercube style ledger: once
//! used, a level is blocked until every other level of that input has been
//! used too.
//!
//! While inputs have unequal lengths, the regressor matrix only covers the
//! time span on which every input is defined. Candidates for the shortest
//! input see the other inputs' existing samples and hold their last value
//! beyond them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proxy::{time_constant_for_pole, ProxyModel, ProxyState};
use crate::quality::{preference, CandidateEvaluation, QualityConfig};
use crate::signal::{
    build_regressor_matrix, fill_regressor, MultiSignal, OperatingPoint, RegressorConfig,
    RegressorMatrix, Signal,
};

/// `count` equidistant levels from `lo` to `hi` inclusive.
pub fn amplitude_levels(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::config("levels", "need at least 2 amplitude levels"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::config("range", format!("[{lo}, {hi}] is empty")));
    }
    let step = (hi - lo) / (count - 1) as f64;
    let mut levels: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
    levels[count - 1] = hi;
    Ok(levels)
}

/// Amplitude levels of one input with used/blocked bookkeeping.
///
/// When the last free level is consumed every level is released except that
/// one, which stays blocked until some other level has been used.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelLedger {
    levels: Vec<f64>,
    used: Vec<bool>,
    held: Option<usize>,
}

impl LevelLedger {
    pub fn new(levels: Vec<f64>) -> Self {
        let used = vec![false; levels.len()];
        Self {
            levels,
            used,
            held: None,
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn resolution(&self) -> usize {
        self.levels.len()
    }

    pub fn is_used(&self, index: usize) -> bool {
        self.used[index] || self.held == Some(index)
    }

    pub fn available(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.levels.len()).filter(|&i| !self.is_used(i))
    }

    pub fn mark_used(&mut self, index: usize) {
        self.used[index] = true;
        self.held = None;
        if self.used.iter().all(|&u| u) {
            self.used.iter_mut().for_each(|u| *u = false);
            self.held = Some(index);
        }
    }
}

fn default_sampling_time() -> f64 {
    1.0
}

fn default_order() -> usize {
    1
}

fn default_gain() -> f64 {
    1.0
}

fn default_range() -> [f64; 2] {
    [0.0, 1.0]
}

fn evaluation_time_constant() -> f64 {
    time_constant_for_pole(0.8, 1.0)
}

/// Per-input design settings. `None` fields resolve to their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    #[serde(default = "default_range")]
    pub range: [f64; 2],
    /// Proxy time constant in seconds.
    #[serde(default = "evaluation_time_constant")]
    pub time_constant: f64,
    #[serde(default = "default_gain")]
    pub gain: f64,
    /// Longest admissible sequence; defaults to `round(3 T / T0)`.
    #[serde(default)]
    pub max_length: Option<usize>,
    /// Number of amplitude levels; defaults to `ceil(N T0 / T)`.
    #[serde(default)]
    pub levels: Option<usize>,
    /// Operating point before the first sample; defaults to the range minimum.
    #[serde(default)]
    pub initial: Option<f64>,
}

impl Default for InputSpec {
    fn default() -> Self {
        Self {
            range: default_range(),
            time_constant: evaluation_time_constant(),
            gain: default_gain(),
            max_length: None,
            levels: None,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub n_samples: usize,
    #[serde(default = "default_sampling_time")]
    pub sampling_time: f64,
    #[serde(default = "default_order")]
    pub dynamic_order: usize,
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub quality: QualityConfig,
    #[serde(default)]
    pub seed: u64,
}

impl OptimizerConfig {
    /// Single input on `[0, 1]`, `T0 = 1 s`, proxy pole 0.8.
    pub fn single_input(n_samples: usize, lambda: f64) -> Self {
        Self {
            n_samples,
            sampling_time: 1.0,
            dynamic_order: 1,
            inputs: vec![InputSpec::default()],
            quality: QualityConfig::with_lambda(lambda),
            seed: 0,
        }
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn max_length(&self, j: usize) -> usize {
        let spec = &self.inputs[j];
        spec.max_length.unwrap_or_else(|| {
            let l = (3.0 * spec.time_constant / self.sampling_time).round();
            (l as usize).max(2)
        })
    }

    pub fn resolution(&self, j: usize) -> usize {
        let spec = &self.inputs[j];
        spec.levels.unwrap_or_else(|| {
            let mean_len = spec.time_constant / self.sampling_time;
            ((self.n_samples as f64 / mean_len).ceil() as usize).max(2)
        })
    }

    pub fn initial_input(&self, j: usize) -> f64 {
        let spec = &self.inputs[j];
        spec.initial.unwrap_or(spec.range[0])
    }

    pub fn regressor_config(&self) -> RegressorConfig {
        RegressorConfig {
            dynamic_order: self.dynamic_order,
            num_inputs: self.num_inputs(),
        }
    }

    pub fn proxy_model(&self) -> Result<ProxyModel> {
        ProxyModel::with_gains(
            self.inputs.iter().map(|s| s.time_constant).collect(),
            self.inputs.iter().map(|s| s.gain).collect(),
            self.sampling_time,
        )
    }

    /// Operating point of the proxy before the first sample.
    pub fn initial_point(&self) -> Result<OperatingPoint> {
        let u0: Vec<f64> = (0..self.num_inputs())
            .map(|j| self.initial_input(j))
            .collect();
        let y0 = self.proxy_model()?.steady_state(&u0)?.output();
        Ok(OperatingPoint::new(u0, y0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1 {
            return Err(Error::config("n_samples", "must be >= 1"));
        }
        if !(self.sampling_time.is_finite() && self.sampling_time > 0.0) {
            return Err(Error::config("sampling_time", "must be finite and > 0"));
        }
        if self.dynamic_order < 1 {
            return Err(Error::config("dynamic_order", "must be >= 1"));
        }
        if self.inputs.is_empty() {
            return Err(Error::config("inputs", "at least one input is required"));
        }
        for (j, s) in self.inputs.iter().enumerate() {
            let [lo, hi] = s.range;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(format!("inputs[{j}].range"), "need lo < hi"));
            }
            if !(s.time_constant.is_finite() && s.time_constant > 0.0) {
                return Err(Error::config(
                    format!("inputs[{j}].time_constant"),
                    "must be finite and > 0",
                ));
            }
            if !s.gain.is_finite() {
                return Err(Error::config(format!("inputs[{j}].gain"), "must be finite"));
            }
            if self.max_length(j) < 2 {
                return Err(Error::config(
                    format!("inputs[{j}].max_length"),
                    "must be >= 2",
                ));
            }
            if self.resolution(j) < 2 {
                return Err(Error::config(format!("inputs[{j}].levels"), "must be >= 2"));
            }
            if let Some(u0) = s.initial {
                if !u0.is_finite() {
                    return Err(Error::config(
                        format!("inputs[{j}].initial"),
                        "must be finite",
                    ));
                }
            }
        }
        self.quality.validate()
    }

    /// The configuration with every default made explicit.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        for j in 0..out.inputs.len() {
            out.inputs[j].max_length = Some(self.max_length(j));
            out.inputs[j].levels = Some(self.resolution(j));
            out.inputs[j].initial = Some(self.initial_input(j));
        }
        out
    }
}

/// One appended sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub input: usize,
    pub level: f64,
    pub level_index: usize,
    /// Length actually appended (after truncation at `N`).
    pub length: usize,
    /// Length selected by the optimizer.
    pub selected_length: usize,
}

impl SequenceRecord {
    pub fn truncated(&self) -> bool {
        self.length < self.selected_length
    }
}

/// The winner of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub level_index: usize,
    pub level: f64,
    pub length: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct GenerationState {
    target: usize,
    order: usize,
    max_lengths: Vec<usize>,
    quality: QualityConfig,
    proxy: ProxyModel,
    initial: OperatingPoint,
    ledgers: Vec<LevelLedger>,
    signal: MultiSignal,
    /// Samples on which every input is defined.
    committed: usize,
    /// Proxy output for times `0..=committed`.
    proxy_output: Vec<f64>,
    proxy_state: ProxyState,
    /// Steady-state seed point followed by one row per committed sample.
    reference: RegressorMatrix,
    rng: ChaCha8Rng,
    sequences: Vec<SequenceRecord>,
}

impl GenerationState {
    pub fn new(cfg: &OptimizerConfig) -> Result<Self> {
        cfg.validate()?;
        let p = cfg.num_inputs();
        let proxy = cfg.proxy_model()?;
        let initial = cfg.initial_point()?;
        let ledgers = (0..p)
            .map(|j| {
                let [lo, hi] = cfg.inputs[j].range;
                amplitude_levels(lo, hi, cfg.resolution(j)).map(LevelLedger::new)
            })
            .collect::<Result<Vec<_>>>()?;
        let rcfg = cfg.regressor_config();
        let mut reference = RegressorMatrix::with_capacity(rcfg.dim(), cfg.n_samples + 1);
        let mut seed = Vec::with_capacity(rcfg.dim());
        fill_regressor(
            p,
            cfg.dynamic_order,
            0,
            |j, _| initial.inputs[j],
            |_| initial.output,
            &mut seed,
        );
        reference.push_row(&seed)?;
        Ok(Self {
            target: cfg.n_samples,
            order: cfg.dynamic_order,
            max_lengths: (0..p).map(|j| cfg.max_length(j)).collect(),
            quality: cfg.quality.clone(),
            proxy_state: proxy.steady_state(&initial.inputs)?,
            proxy,
            proxy_output: vec![initial.output],
            initial,
            ledgers,
            signal: MultiSignal::empty(p, cfg.sampling_time)?,
            committed: 0,
            reference,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            sequences: Vec::new(),
        })
    }

    /// State after replaying `initial` from the configured operating point.
    pub fn with_initial(cfg: &OptimizerConfig, initial: &MultiSignal) -> Result<Self> {
        let mut state = Self::new(cfg)?;
        if initial.num_inputs() != cfg.num_inputs() {
            return Err(Error::DimensionMismatch {
                expected: cfg.num_inputs(),
                got: initial.num_inputs(),
            });
        }
        for (j, ch) in initial.inputs().iter().enumerate() {
            if ch.len() > cfg.n_samples {
                return Err(Error::config(
                    format!("initial[{j}]"),
                    format!(
                        "has {} samples, more than n_samples = {}",
                        ch.len(),
                        cfg.n_samples
                    ),
                ));
            }
            for &v in ch {
                state.signal.push(j, v);
            }
        }
        state.commit();
        Ok(state)
    }

    pub fn signal(&self) -> &MultiSignal {
        &self.signal
    }

    pub fn ledger(&self, j: usize) -> &LevelLedger {
        &self.ledgers[j]
    }

    pub fn regressors(&self) -> &RegressorMatrix {
        &self.reference
    }

    pub fn sequences(&self) -> &[SequenceRecord] {
        &self.sequences
    }

    pub fn committed(&self) -> usize {
        self.committed
    }

    pub fn max_length(&self, j: usize) -> usize {
        self.max_lengths[j]
    }

    pub fn is_complete(&self) -> bool {
        self.signal.inputs().iter().all(|c| c.len() >= self.target)
    }

    fn input_at(&self, j: usize, t: isize) -> f64 {
        if t < 0 {
            return self.initial.inputs[j];
        }
        let ch = self.signal.input(j);
        match ch.get(t as usize) {
            Some(&v) => v,
            None => ch.last().copied().unwrap_or(self.initial.inputs[j]),
        }
    }

    /// Extends the regressor matrix over samples now defined for every input.
    fn commit(&mut self) {
        let end = self.signal.min_len();
        let p = self.signal.num_inputs();
        let mut row = Vec::with_capacity(self.reference.dim());
        let mut u = vec![0.0; p];
        for t in self.committed..end {
            let y_hist = &self.proxy_output;
            let y0 = self.initial.output;
            fill_regressor(
                p,
                self.order,
                t as isize + 1,
                |j, s| self.input_at(j, s),
                |s| if s < 0 { y0 } else { y_hist[s as usize] },
                &mut row,
            );
            self.reference
                .push_row(&row)
                .expect("regressor dimension is fixed by the config");
            for (j, uj) in u.iter_mut().enumerate() {
                *uj = self.signal.input(j)[t];
            }
            self.proxy.advance(&mut self.proxy_state, &u);
            self.proxy_output.push(self.proxy_state.output());
        }
        self.committed = self.committed.max(end);
    }

    /// Shortest unfinished input; ties are broken uniformly at random.
    pub fn select_input(&mut self) -> Result<usize> {
        let open: Vec<(usize, usize)> = self
            .signal
            .inputs()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() < self.target)
            .map(|(j, c)| (j, c.len()))
            .collect();
        let shortest = open
            .iter()
            .map(|&(_, n)| n)
            .min()
            .ok_or(Error::GenerationComplete)?;
        let ties: Vec<usize> = open
            .into_iter()
            .filter(|&(_, n)| n == shortest)
            .map(|(j, _)| j)
            .collect();
        if ties.len() == 1 {
            return Ok(ties[0]);
        }
        Ok(ties[self.rng.random_range(0..ties.len())])
    }

    /// Regressor trajectory of holding `level` on input `j` for `L_max` steps.
    fn candidate_points(&self, j: usize, level: f64) -> Vec<Vec<f64>> {
        let start = self.committed;
        let horizon = self.max_lengths[j];
        let p = self.signal.num_inputs();
        let mut state = self.proxy_state.clone();
        let mut y_ext = Vec::with_capacity(horizon);
        let mut u = vec![0.0; p];
        let mut points = Vec::with_capacity(horizon);
        let u_at = |i: usize, s: isize| {
            if i == j && s >= start as isize {
                level
            } else {
                self.input_at(i, s)
            }
        };
        for step in 0..horizon {
            let t = start + step;
            let mut row = Vec::with_capacity(self.reference.dim());
            {
                let y_at = |s: isize| {
                    if s < 0 {
                        self.initial.output
                    } else if (s as usize) <= start {
                        self.proxy_output[s as usize]
                    } else {
                        y_ext[s as usize - start - 1]
                    }
                };
                fill_regressor(p, self.order, t as isize + 1, u_at, y_at, &mut row);
            }
            points.push(row);
            for (i, ui) in u.iter_mut().enumerate() {
                *ui = u_at(i, t as isize);
            }
            self.proxy.advance(&mut state, &u);
            y_ext.push(state.output());
        }
        points
    }

    /// Quality profiles of every unblocked level of input `j`.
    ///
    /// `j` must be one of the shortest inputs.
    pub fn enumerate_candidates(&self, j: usize) -> Result<Vec<CandidateEvaluation>> {
        if j >= self.signal.num_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.signal.num_inputs(),
                got: j + 1,
            });
        }
        if self.signal.input(j).len() != self.committed {
            return Err(Error::config(
                "input",
                format!("input {j} is not one of the shortest inputs"),
            ));
        }
        let ledger = &self.ledgers[j];
        let available: Vec<usize> = ledger.available().collect();
        available
            .par_iter()
            .map(|&idx| {
                let level = ledger.levels()[idx];
                let points = self.candidate_points(j, level);
                CandidateEvaluation::evaluate(&self.reference, &points, &self.quality, level, idx)
            })
            .collect()
    }

    pub fn append_sequence(
        &mut self,
        j: usize,
        level_index: usize,
        length: usize,
    ) -> Result<SequenceRecord> {
        let max_len = self.max_lengths[j];
        if length < 1 || length > max_len {
            return Err(Error::IndexOutOfRange {
                index: length,
                needed: 1,
                available: max_len,
            });
        }
        let level = *self.ledgers[j]
            .levels()
            .get(level_index)
            .ok_or(Error::IndexOutOfRange {
                index: level_index,
                needed: 0,
                available: self.ledgers[j].resolution(),
            })?;
        let room = self.target.saturating_sub(self.signal.input(j).len());
        let applied = length.min(room);
        for _ in 0..applied {
            self.signal.push(j, level);
        }
        self.ledgers[j].mark_used(level_index);
        self.commit();
        let rec = SequenceRecord {
            input: j,
            level,
            level_index,
            length: applied,
            selected_length: length,
        };
        self.sequences.push(rec);
        Ok(rec)
    }

    /// One full iteration: select an input, score, append.
    pub fn step(&mut self) -> Result<SequenceRecord> {
        let j = self.select_input()?;
        let candidates = self.enumerate_candidates(j)?;
        let best = select_sequence(&candidates)?;
        self.append_sequence(j, best.level_index, best.length)
    }

    pub fn run(mut self) -> Result<Design> {
        while !self.is_complete() {
            self.step()?;
        }
        Ok(Design {
            signal: self.signal,
            sequences: self.sequences,
        })
    }
}

/// Global argmax of `J` over every `(level, length)` pair.
pub fn select_sequence(candidates: &[CandidateEvaluation]) -> Result<Selection> {
    candidates
        .iter()
        .map(|c| Selection {
            level_index: c.level_index,
            level: c.level,
            length: c.best_length,
            value: c.best_value(),
        })
        .min_by(|a, b| preference((a.value, a.length, a.level), (b.value, b.length, b.level)))
        .ok_or(Error::NoCandidates)
}

/// A generated excitation signal and the sequences it was assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub signal: MultiSignal,
    pub sequences: Vec<SequenceRecord>,
}

impl Design {
    pub fn sequences_of(&self, j: usize) -> impl Iterator<Item = &SequenceRecord> + '_ {
        self.sequences.iter().filter(move |s| s.input == j)
    }

    pub fn mean_sequence_length(&self, j: usize) -> f64 {
        let (n, total) = self
            .sequences_of(j)
            .fold((0usize, 0usize), |(n, t), s| (n + 1, t + s.length));
        total as f64 / n.max(1) as f64
    }
}

pub fn generate_design(cfg: &OptimizerConfig) -> Result<Design> {
    GenerationState::new(cfg)?.run()
}

pub fn generate(cfg: &OptimizerConfig) -> Result<MultiSignal> {
    Ok(generate_design(cfg)?.signal)
}

/// Completes `initial` to `N` samples per input.
pub fn generate_continuation(initial: &MultiSignal, cfg: &OptimizerConfig) -> Result<MultiSignal> {
    Ok(GenerationState::with_initial(cfg, initial)?.run()?.signal)
}

/// Proxy regressor matrix of a finished design, starting from the
/// configured operating point.
pub fn proxy_regressors(cfg: &OptimizerConfig, signal: &MultiSignal) -> Result<RegressorMatrix> {
    let proxy = cfg.proxy_model()?;
    let initial = cfg.initial_point()?;
    let init_state = proxy.steady_state(&initial.inputs)?;
    let out = proxy.simulate(signal, &init_state)?;
    let n = out.len();
    let mut aligned = Vec::with_capacity(n);
    if n > 0 {
        aligned.push(initial.output);
        aligned.extend_from_slice(&out.samples()[..n - 1]);
    }
    let y = Signal::new(aligned, signal.sampling_time())?;
    build_regressor_matrix(signal, &y, &cfg.regressor_config(), &initial)
}
