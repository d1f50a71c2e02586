//! Experiment plans: which signals train the models, which signals test them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmn::LmnConfig;
use crate::optimizer::{generate, OptimizerConfig};
use crate::reference::{
    generate_aprbs, generate_multisine, generate_ramp, AprbsConfig, MultisineConfig,
};
use crate::signal::Signal;

fn unit_range() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Idsfid {
        lambda: f64,
        #[serde(default = "unit_range")]
        range: [f64; 2],
        /// Proxy time constant in seconds; the optimizer default when absent.
        #[serde(default)]
        time_constant: Option<f64>,
        #[serde(default)]
        levels: Option<usize>,
        #[serde(default)]
        max_length: Option<usize>,
    },
    Aprbs {
        hold_time: f64,
        #[serde(default = "unit_range")]
        range: [f64; 2],
    },
    Multisine {
        band: [f64; 2],
        #[serde(default = "unit_range")]
        range: [f64; 2],
    },
    Ramp {
        #[serde(default = "unit_range")]
        range: [f64; 2],
    },
}

impl SignalSpec {
    pub fn idsfid(lambda: f64) -> Self {
        SignalSpec::Idsfid {
            lambda,
            range: unit_range(),
            time_constant: None,
            levels: None,
            max_length: None,
        }
    }

    /// Whether a fresh realization is drawn for every repetition.
    pub fn varies_per_repetition(&self) -> bool {
        matches!(self, SignalSpec::Aprbs { .. })
    }

    pub fn optimizer_config(
        &self,
        n_samples: usize,
        sampling_time: f64,
        seed: u64,
    ) -> Option<OptimizerConfig> {
        let SignalSpec::Idsfid {
            lambda,
            range,
            time_constant,
            levels,
            max_length,
        } = self
        else {
            return None;
        };
        let mut cfg = OptimizerConfig::single_input(n_samples, *lambda);
        cfg.sampling_time = sampling_time;
        cfg.seed = seed;
        let input = &mut cfg.inputs[0];
        input.range = *range;
        if let Some(t) = time_constant {
            input.time_constant = *t;
        }
        input.levels = *levels;
        input.max_length = *max_length;
        Some(cfg)
    }

    /// Input value the process rests at before the first sample.
    pub fn initial_input(&self, signal: &Signal) -> f64 {
        match self {
            SignalSpec::Idsfid { range, .. } => range[0],
            _ => signal.samples().first().copied().unwrap_or(0.0),
        }
    }

    pub fn generate(&self, n_samples: usize, sampling_time: f64, seed: u64) -> Result<Signal> {
        match self {
            SignalSpec::Idsfid { .. } => {
                let cfg = self
                    .optimizer_config(n_samples, sampling_time, seed)
                    .expect("idsfid spec");
                Ok(generate(&cfg)?.channel(0))
            }
            SignalSpec::Aprbs { hold_time, range } => generate_aprbs(&AprbsConfig {
                hold_time: *hold_time,
                range: *range,
                n_samples,
                sampling_time,
                seed,
            }),
            SignalSpec::Multisine { band, range } => generate_multisine(&MultisineConfig {
                band: *band,
                range: *range,
                n_samples,
                sampling_time,
                seed,
            }),
            SignalSpec::Ramp { range } => generate_ramp(*range, n_samples, sampling_time),
        }
    }

    pub fn validate(&self, n_samples: usize, sampling_time: f64) -> Result<()> {
        match self {
            SignalSpec::Idsfid { .. } => self
                .optimizer_config(n_samples, sampling_time, 0)
                .expect("idsfid spec")
                .validate(),
            SignalSpec::Aprbs { hold_time, range } => AprbsConfig {
                hold_time: *hold_time,
                range: *range,
                n_samples,
                sampling_time,
                seed: 0,
            }
            .validate(),
            SignalSpec::Multisine { band, range } => {
                let cfg = MultisineConfig {
                    band: *band,
                    range: *range,
                    n_samples,
                    sampling_time,
                    seed: 0,
                };
                cfg.validate()?;
                if cfg.bins().is_empty() {
                    return Err(Error::EmptyBand {
                        lo: band[0],
                        hi: band[1],
                    });
                }
                Ok(())
            }
            SignalSpec::Ramp { range } => {
                if !(range[0].is_finite() && range[1].is_finite() && range[0] < range[1]) {
                    return Err(Error::config("range", "need lo < hi"));
                }
                if n_samples < 2 {
                    return Err(Error::config(
                        "n_samples",
                        "a ramp needs at least 2 samples",
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSignal {
    pub name: String,
    pub signal: SignalSpec,
}

impl NamedSignal {
    pub fn new(name: impl Into<String>, signal: SignalSpec) -> Self {
        Self {
            name: name.into(),
            signal,
        }
    }
}

fn default_n_train() -> usize {
    300
}

fn default_n_test() -> usize {
    500
}

fn default_sampling_time() -> f64 {
    1.0
}

fn default_noise() -> f64 {
    0.1
}

fn default_repetitions() -> usize {
    20
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_sampling_time")]
    pub sampling_time: f64,
    /// Standard deviation of the measurement noise on training outputs.
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub lmn: LmnConfig,
    /// Write every trained model as JSON next to the results.
    #[serde(default = "default_true")]
    pub save_models: bool,
    pub training: Vec<NamedSignal>,
    pub test: Vec<NamedSignal>,
}

impl ExperimentPlan {
    /// Training and test signals of the reference study at desk scale.
    pub fn desk() -> Self {
        let training = vec![
            NamedSignal::new("idsfid_l0", SignalSpec::idsfid(0.0)),
            NamedSignal::new("idsfid_l0.02", SignalSpec::idsfid(0.02)),
            NamedSignal::new("idsfid_l0.5", SignalSpec::idsfid(0.5)),
            NamedSignal::new("idsfid_l2", SignalSpec::idsfid(2.0)),
            NamedSignal::new(
                "aprbs_th5",
                SignalSpec::Aprbs {
                    hold_time: 5.0,
                    range: unit_range(),
                },
            ),
            NamedSignal::new(
                "multisine_0-0.5",
                SignalSpec::Multisine {
                    band: [0.0, 0.5],
                    range: unit_range(),
                },
            ),
        ];
        let test = vec![
            NamedSignal::new(
                "ramp",
                SignalSpec::Ramp {
                    range: unit_range(),
                },
            ),
            NamedSignal::new(
                "aprbs_th1",
                SignalSpec::Aprbs {
                    hold_time: 1.0,
                    range: unit_range(),
                },
            ),
            NamedSignal::new(
                "multisine_0.05-0.1",
                SignalSpec::Multisine {
                    band: [0.05, 0.1],
                    range: unit_range(),
                },
            ),
            NamedSignal::new(
                "multisine_0.25-0.3",
                SignalSpec::Multisine {
                    band: [0.25, 0.3],
                    range: unit_range(),
                },
            ),
        ];
        Self {
            n_train: default_n_train(),
            n_test: default_n_test(),
            sampling_time: default_sampling_time(),
            noise_sigma: default_noise(),
            repetitions: default_repetitions(),
            master_seed: 0,
            lmn: LmnConfig::default(),
            save_models: true,
            training,
            test,
        }
    }

    /// Every problem with the plan, so they can be reported together.
    pub fn problems(&self) -> Vec<Error> {
        let mut out = Vec::new();
        if self.repetitions < 1 {
            out.push(Error::config("repetitions", "must be >= 1"));
        }
        if self.n_train < 2 {
            out.push(Error::config("n_train", "must be >= 2"));
        }
        if self.n_test < 2 {
            out.push(Error::config("n_test", "must be >= 2"));
        }
        if !(self.sampling_time.is_finite() && self.sampling_time > 0.0) {
            out.push(Error::config("sampling_time", "must be finite and > 0"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            out.push(Error::config("noise_sigma", "must be finite and >= 0"));
        }
        if let Err(e) = self.lmn.validate() {
            out.push(e);
        }
        if self.lmn.dynamic_order != 1 {
            out.push(Error::config(
                "lmn.dynamic_order",
                "only first-order NARX models are supported",
            ));
        }
        if self.training.is_empty() {
            out.push(Error::config(
                "training",
                "at least one training signal is required",
            ));
        }
        if self.test.is_empty() {
            out.push(Error::config(
                "test",
                "at least one test signal is required",
            ));
        }
        let mut names = std::collections::HashSet::new();
        for (group, list, n) in [
            ("training", &self.training, self.n_train),
            ("test", &self.test, self.n_test),
        ] {
            for (i, s) in list.iter().enumerate() {
                let ok_name = !s.name.is_empty()
                    && s.name
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
                if !ok_name {
                    out.push(Error::config(
                        format!("{group}[{i}].name"),
                        "use letters, digits, '_', '-' or '.'",
                    ));
                }
                if !names.insert((group, s.name.as_str())) {
                    out.push(Error::config(
                        format!("{group}[{i}].name"),
                        format!("duplicate name `{}`", s.name),
                    ));
                }
                if let Err(e) = s.signal.validate(n, self.sampling_time) {
                    out.push(match e {
                        Error::InvalidConfig { field, reason } => Error::InvalidConfig {
                            field: format!("{group}[{i}].signal.{field}"),
                            reason,
                        },
                        other => Error::config(format!("{group}[{i}].signal"), other.to_string()),
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.problems().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}
