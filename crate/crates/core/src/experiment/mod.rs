//! Train local model networks on noisy excitation data and score their
//! free-run accuracy on clean test signals.
//!
//! Every (training signal, repetition) pair draws its randomness from a seed
//! derived from the master seed, the signal name and the repetition index, so
//! results are reproducible and independent of the repetition count and of
//! the thread schedule.

pub mod metrics;
pub mod plan;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hammerstein::HammersteinProcess;
use crate::lmn::{narx_training_data, train, LmnModel};
use crate::signal::{MultiSignal, Signal, SignalTable};

pub use metrics::{
    equilibrium_fraction, fill_distance, median, quantile, rmse, spectral_centroid, spectrum,
    SpectrumBin,
};
pub use plan::{ExperimentPlan, NamedSignal, SignalSpec};

/// Share of failed repetitions above which the experiment is aborted.
pub const FAILURE_BUDGET: f64 = 0.1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed for one labelled random stream of one repetition.
pub fn derive_seed(master: u64, label: &str, repetition: u64) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a(label)) ^ splitmix64(repetition.wrapping_add(1)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub train_signal: String,
    pub test_signal: String,
    pub repetition: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub train_signal: String,
    pub test_signal: String,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub train_signal: String,
    pub repetition: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub raw: Vec<RawRecord>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<Failure>,
}

impl ExperimentResults {
    pub fn rmse_values(&self, train: &str, test: &str) -> Vec<f64> {
        self.raw
            .iter()
            .filter(|r| r.train_signal == train && r.test_signal == test)
            .map(|r| r.rmse)
            .collect()
    }

    pub fn median_rmse(&self, train: &str, test: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.train_signal == train && s.test_signal == test)
            .map(|s| s.median)
    }
}

/// Medians, quartiles and extremes per (training, test) pair, in first-seen
/// order of the raw records.
pub fn summarize(raw: &[RawRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in raw {
        let k = (r.train_signal.as_str(), r.test_signal.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(train, test)| {
            let v: Vec<f64> = raw
                .iter()
                .filter(|r| r.train_signal == train && r.test_signal == test)
                .map(|r| r.rmse)
                .collect();
            SummaryRow {
                train_signal: train.to_string(),
                test_signal: test.to_string(),
                count: v.len(),
                median: quantile(&v, 0.5),
                q1: quantile(&v, 0.25),
                q3: quantile(&v, 0.75),
                min: quantile(&v, 0.0),
                max: quantile(&v, 1.0),
            }
        })
        .collect()
}

struct PreparedSignal {
    name: String,
    input: Signal,
    initial_input: f64,
}

struct Repetition {
    records: Vec<RawRecord>,
    model: LmnModel,
    signal: Option<SignalTable>,
}

fn prepare(spec: &NamedSignal, n: usize, t0: f64, seed: u64) -> Result<PreparedSignal> {
    let input = spec.signal.generate(n, t0, seed)?;
    let initial_input = spec.signal.initial_input(&input);
    Ok(PreparedSignal {
        name: spec.name.clone(),
        input,
        initial_input,
    })
}

fn clean_output(process: &HammersteinProcess, s: &PreparedSignal) -> Result<Signal> {
    let y0 = process.steady_state(s.initial_input);
    process.simulate(&s.input, Some(y0), None)
}

fn write_table(path: &Path, input: &Signal, output: Option<Signal>) -> Result<()> {
    SignalTable {
        inputs: MultiSignal::from_signal(input.clone()),
        output,
    }
    .write_path(path)
}

fn write_spectrum(path: &Path, signal: &Signal) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["frequency", "magnitude"])?;
    for b in spectrum(signal)? {
        w.write_record([
            format!("{:.16e}", b.frequency),
            format!("{:.16e}", b.magnitude),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw_csv(path: &Path) -> Result<Vec<RawRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|rec| rec.map_err(Error::from))
        .collect()
}

/// Runs the plan, writing artifacts below `out_dir` when given.
pub fn run_experiment(plan: &ExperimentPlan, out_dir: Option<&Path>) -> Result<ExperimentResults> {
    plan.validate()?;
    let t0 = plan.sampling_time;
    let clean = HammersteinProcess::default();
    let noisy = HammersteinProcess::with_noise(plan.noise_sigma);
    let order = plan.lmn.dynamic_order;

    if let Some(dir) = out_dir {
        for sub in ["signals", "spectra", "models", "results"] {
            fs::create_dir_all(dir.join(sub))?;
        }
        fs::write(dir.join("plan.json"), serde_json::to_string_pretty(plan)?)?;
    }

    let tests = plan
        .test
        .iter()
        .map(|spec| {
            let s = prepare(
                spec,
                plan.n_test,
                t0,
                derive_seed(plan.master_seed, &format!("test/{}", spec.name), 0),
            )?;
            let y = clean_output(&clean, &s)?;
            Ok((s, y))
        })
        .collect::<Result<Vec<_>>>()?;

    let fixed = plan
        .training
        .iter()
        .map(|spec| {
            if spec.signal.varies_per_repetition() {
                return Ok(None);
            }
            let seed = derive_seed(plan.master_seed, &format!("train/{}", spec.name), 0);
            prepare(spec, plan.n_train, t0, seed).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(dir) = out_dir {
        for (s, y) in &tests {
            write_table(
                &dir.join(format!("signals/test_{}.csv", s.name)),
                &s.input,
                Some(y.clone()),
            )?;
            write_spectrum(&dir.join(format!("spectra/test_{}.csv", s.name)), &s.input)?;
        }
        for s in fixed.iter().flatten() {
            write_table(
                &dir.join(format!("signals/train_{}.csv", s.name)),
                &s.input,
                Some(clean_output(&clean, s)?),
            )?;
            write_spectrum(&dir.join(format!("spectra/train_{}.csv", s.name)), &s.input)?;
        }
    }

    let jobs: Vec<(usize, usize)> = (0..plan.training.len())
        .flat_map(|i| (0..plan.repetitions).map(move |r| (i, r)))
        .collect();
    log::info!(
        "running {} training signals x {} repetitions against {} test signals",
        plan.training.len(),
        plan.repetitions,
        tests.len()
    );

    let outcomes: Vec<Result<Repetition>> = jobs
        .par_iter()
        .map(|&(i, rep)| {
            let spec = &plan.training[i];
            let label = format!("train/{}", spec.name);
            let fresh;
            let prepared = match &fixed[i] {
                Some(s) => s,
                None => {
                    let seed = derive_seed(plan.master_seed, &label, rep as u64);
                    fresh = prepare(spec, plan.n_train, t0, seed)?;
                    &fresh
                }
            };
            let noise_seed = derive_seed(
                plan.master_seed,
                &format!("noise/{}", spec.name),
                rep as u64,
            );
            let y0 = noisy.steady_state(prepared.initial_input);
            let y = noisy.simulate(&prepared.input, Some(y0), Some(noise_seed))?;
            let u = MultiSignal::from_signal(prepared.input.clone());
            let (x, targets) = narx_training_data(&u, &y, order)?;
            let model = train(&x, &targets, &plan.lmn)?;
            let mut records = Vec::with_capacity(tests.len());
            for (test, y_test) in &tests {
                let u_test = MultiSignal::from_signal(test.input.clone());
                let y_init = vec![y_test.samples()[0]; order];
                let y_hat = model.simulate_free_run(&u_test, &y_init)?;
                records.push(RawRecord {
                    train_signal: spec.name.clone(),
                    test_signal: test.name.clone(),
                    repetition: rep,
                    rmse: rmse(y_test.samples(), y_hat.samples())?,
                });
            }
            log::debug!("{} repetition {rep} done", spec.name);
            let signal = fixed[i].is_none().then_some(SignalTable {
                inputs: u,
                output: Some(y),
            });
            Ok(Repetition {
                records,
                model,
                signal,
            })
        })
        .collect();

    let mut raw = Vec::new();
    let mut failures = Vec::new();
    for (&(i, rep), outcome) in jobs.iter().zip(outcomes) {
        let name = &plan.training[i].name;
        match outcome {
            Ok(done) => {
                if let Some(dir) = out_dir {
                    if plan.save_models {
                        fs::write(
                            dir.join(format!("models/{name}_r{rep:03}.json")),
                            serde_json::to_string(&done.model)?,
                        )?;
                    }
                    if let Some(table) = &done.signal {
                        table
                            .write_path(dir.join(format!("signals/train_{name}_r{rep:03}.csv")))?;
                        if rep == 0 {
                            write_spectrum(
                                &dir.join(format!("spectra/train_{name}.csv")),
                                &table.inputs.channel(0),
                            )?;
                        }
                    }
                }
                raw.extend(done.records);
            }
            Err(e) => {
                log::warn!("{name} repetition {rep} failed: {e}");
                failures.push(Failure {
                    train_signal: name.clone(),
                    repetition: rep,
                    message: e.to_string(),
                });
            }
        }
    }
    if failures.len() as f64 > FAILURE_BUDGET * jobs.len() as f64 {
        return Err(Error::FailureBudget {
            failed: failures.len(),
            total: jobs.len(),
        });
    }

    let summary = summarize(&raw);
    if let Some(dir) = out_dir {
        write_csv(&dir.join("results/raw.csv"), &raw)?;
        write_csv(&dir.join("results/summary.csv"), &summary)?;
    }
    Ok(ExperimentResults {
        raw,
        summary,
        failures,
    })
}
