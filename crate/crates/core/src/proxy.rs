//! First-order, unit-gain proxy models standing in for the unknown process
//! while a design is optimized.
//!
//! Each input drives its own filter discretized with a zero-order hold,
//! `y_i(k) = a_i y_i(k-1) + g_i (1 - a_i) u_i(k-1)` with `a_i = exp(-T0 / T_i)`,
//! and the proxy output is the sum of the filter states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{MultiSignal, Signal};

/// Time constant giving the discrete pole `pole` at sampling time `t0`.
pub fn time_constant_for_pole(pole: f64, t0: f64) -> f64 {
    -t0 / pole.ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyModel {
    time_constants: Vec<f64>,
    gains: Vec<f64>,
    sampling_time: f64,
    poles: Vec<f64>,
}

impl ProxyModel {
    /// Unit-gain proxy with one time constant per input.
    pub fn new(time_constants: Vec<f64>, sampling_time: f64) -> Result<Self> {
        let gains = vec![1.0; time_constants.len()];
        Self::with_gains(time_constants, gains, sampling_time)
    }

    pub fn with_gains(
        time_constants: Vec<f64>,
        gains: Vec<f64>,
        sampling_time: f64,
    ) -> Result<Self> {
        if time_constants.is_empty() {
            return Err(Error::config(
                "time_constants",
                "at least one input is required",
            ));
        }
        if gains.len() != time_constants.len() {
            return Err(Error::DimensionMismatch {
                expected: time_constants.len(),
                got: gains.len(),
            });
        }
        if !(sampling_time.is_finite() && sampling_time > 0.0) {
            return Err(Error::config("sampling_time", "must be finite and > 0"));
        }
        if let Some(j) = time_constants
            .iter()
            .position(|t| !(t.is_finite() && *t > 0.0))
        {
            return Err(Error::config(
                format!("time_constants[{j}]"),
                "must be finite and > 0",
            ));
        }
        if let Some(j) = gains.iter().position(|g| !g.is_finite()) {
            return Err(Error::config(format!("gains[{j}]"), "must be finite"));
        }
        let poles = time_constants
            .iter()
            .map(|t| (-sampling_time / t).exp())
            .collect();
        Ok(Self {
            time_constants,
            gains,
            sampling_time,
            poles,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.poles.len()
    }

    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn time_constants(&self) -> &[f64] {
        &self.time_constants
    }

    pub fn sampling_time(&self) -> f64 {
        self.sampling_time
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.num_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.num_inputs(),
                got,
            });
        }
        Ok(())
    }

    /// One step forward, returning the new state.
    pub fn step(&self, state: &ProxyState, u: &[f64]) -> Result<ProxyState> {
        self.check_dim(u.len())?;
        self.check_dim(state.components.len())?;
        let mut next = state.clone();
        self.advance(&mut next, u);
        Ok(next)
    }

    /// In-place step; dimensions are assumed to match.
    pub(crate) fn advance(&self, state: &mut ProxyState, u: &[f64]) {
        for (i, y) in state.components.iter_mut().enumerate() {
            let a = self.poles[i];
            *y = a * *y + self.gains[i] * (1.0 - a) * u[i];
        }
    }

    /// Proxy outputs `y(1..=N)` for the input record, starting from `init`.
    pub fn simulate(&self, u: &MultiSignal, init: &ProxyState) -> Result<Signal> {
        self.check_dim(u.num_inputs())?;
        self.check_dim(init.components.len())?;
        let n = u.len().ok_or(Error::LengthMismatch {
            what: "input channels",
            left: u.min_len(),
            right: u.lengths().into_iter().max().unwrap_or(0),
        })?;
        let mut state = init.clone();
        let mut sample = vec![0.0; u.num_inputs()];
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            for (j, s) in sample.iter_mut().enumerate() {
                *s = u.input(j)[k];
            }
            self.advance(&mut state, &sample);
            out.push(state.output());
        }
        Signal::new(out, u.sampling_time())
    }

    /// Equilibrium for a constant input: `y_i = g_i u_i`.
    pub fn steady_state(&self, u: &[f64]) -> Result<ProxyState> {
        self.check_dim(u.len())?;
        Ok(ProxyState {
            components: u.iter().zip(&self.gains).map(|(u, g)| g * u).collect(),
        })
    }
}

/// Per-input filter states; the proxy output is their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyState {
    components: Vec<f64>,
}

impl ProxyState {
    pub fn new(components: Vec<f64>) -> Self {
        Self { components }
    }

    pub fn zero(p: usize) -> Self {
        Self {
            components: vec![0.0; p],
        }
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn output(&self) -> f64 {
        self.components.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn model_with_pole(a: f64) -> ProxyModel {
        ProxyModel::new(vec![time_constant_for_pole(a, 1.0)], 1.0).unwrap()
    }

    #[test]
    fn evaluation_time_constant() {
        let t = time_constant_for_pole(0.8, 1.0);
        assert_abs_diff_eq!(t, 4.4814, epsilon = 1e-4);
        assert_abs_diff_eq!(model_with_pole(0.8).poles()[0], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn step_response_by_hand() {
        let m = model_with_pole(0.8);
        let s1 = m.step(&ProxyState::zero(1), &[1.0]).unwrap();
        assert_abs_diff_eq!(s1.output(), 0.2, epsilon = 1e-12);
        let s2 = m.step(&s1, &[1.0]).unwrap();
        assert_abs_diff_eq!(s2.output(), 0.36, epsilon = 1e-12);

        let u = MultiSignal::new(vec![vec![1.0, 1.0]], 1.0).unwrap();
        let y = m.simulate(&u, &ProxyState::zero(1)).unwrap();
        assert_abs_diff_eq!(y.samples()[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(y.samples()[1], 0.36, epsilon = 1e-12);
    }

    #[test]
    fn zero_input_stays_zero() {
        let m = model_with_pole(0.8);
        let u = MultiSignal::new(vec![vec![0.0; 50]], 1.0).unwrap();
        let y = m.simulate(&u, &ProxyState::zero(1)).unwrap();
        assert!(y.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equilibrium_is_kept() {
        let m = model_with_pole(0.8);
        let init = m.steady_state(&[0.37]).unwrap();
        let u = MultiSignal::new(vec![vec![0.37; 40]], 1.0).unwrap();
        let y = m.simulate(&u, &init).unwrap();
        for v in y.samples() {
            assert_abs_diff_eq!(*v, 0.37, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_inputs_superpose() {
        let t = time_constant_for_pole(0.8, 1.0);
        let m = ProxyModel::new(vec![t, t], 1.0).unwrap();
        let ss = m.steady_state(&[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(ss.output(), 1.0, epsilon = 1e-15);
        let u = MultiSignal::new(vec![vec![0.5; 400], vec![0.5; 400]], 1.0).unwrap();
        let y = m.simulate(&u, &ProxyState::zero(2)).unwrap();
        assert_abs_diff_eq!(*y.samples().last().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn steady_state_sums_components() {
        let m = ProxyModel::new(vec![2.0, 7.0], 1.0).unwrap();
        assert_eq!(m.steady_state(&[0.0, 0.0]).unwrap().output(), 0.0);
        let ss = m.steady_state(&[0.3, 0.7]).unwrap();
        assert_abs_diff_eq!(ss.output(), 1.0, epsilon = 1e-15);
        let u = MultiSignal::new(vec![vec![0.3; 600], vec![0.7; 600]], 1.0).unwrap();
        let y = m.simulate(&u, &ProxyState::zero(2)).unwrap();
        assert_abs_diff_eq!(*y.samples().last().unwrap(), ss.output(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_dimensions_and_params() {
        let m = model_with_pole(0.8);
        assert!(matches!(
            m.step(&ProxyState::zero(1), &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let ragged = MultiSignal::new(vec![vec![1.0], vec![]], 1.0).unwrap();
        let m2 = ProxyModel::new(vec![1.0, 1.0], 1.0).unwrap();
        assert!(m2.simulate(&ragged, &ProxyState::zero(2)).is_err());
        assert!(ProxyModel::new(vec![0.0], 1.0).is_err());
        assert!(ProxyModel::new(vec![1.0], -1.0).is_err());
    }

    proptest! {
        #[test]
        fn pole_in_unit_interval(t in 1e-3f64..1e3, t0 in 1e-3f64..10.0) {
            let m = ProxyModel::new(vec![t], t0).unwrap();
            let a = m.poles()[0];
            prop_assert!(a > 0.0 && a < 1.0);
            let s = m.step(&ProxyState::zero(1), &[1.0]).unwrap();
            prop_assert!((s.output() - (1.0 - a)).abs() < 1e-15);
        }

        #[test]
        fn converges_monotonically_to_steady_state(c in -2.0f64..2.0, t in 0.5f64..20.0) {
            let m = ProxyModel::new(vec![t], 1.0).unwrap();
            let u = MultiSignal::new(vec![vec![c; 200]], 1.0).unwrap();
            let y = m.simulate(&u, &ProxyState::zero(1)).unwrap();
            let target = m.steady_state(&[c]).unwrap().output();
            let gaps: Vec<f64> = y.samples().iter().map(|v| (v - target).abs()).collect();
            for w in gaps.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-15);
            }
        }

        #[test]
        fn linear_from_zero_state(
            alpha in -3.0f64..3.0,
            u in prop::collection::vec(-1.0f64..1.0, 1..60),
        ) {
            let m = model_with_pole(0.8);
            let base = m.simulate(&MultiSignal::new(vec![u.clone()], 1.0).unwrap(), &ProxyState::zero(1)).unwrap();
            let scaled: Vec<f64> = u.iter().map(|v| alpha * v).collect();
            let ys = m.simulate(&MultiSignal::new(vec![scaled], 1.0).unwrap(), &ProxyState::zero(1)).unwrap();
            for (a, b) in base.samples().iter().zip(ys.samples()) {
                prop_assert!((alpha * a - b).abs() < 1e-12);
            }
        }
    }
}
