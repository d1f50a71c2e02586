use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use idsfid::experiment::{run_experiment, ExperimentPlan, SignalSpec};
use idsfid::hammerstein::HammersteinProcess;
use idsfid::optimizer::{generate_design, OptimizerConfig};
use idsfid::signal::{MultiSignal, SignalTable};

const DESK_PLAN: &str = include_str!("../plans/paper_desk.json");

#[derive(Parser)]
#[command(
    name = "idsfid",
    version,
    about = "Excitation signal design and evaluation for nonlinear system identification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an excitation or test signal.
    Generate(GenerateArgs),
    /// Run a signal through the Hammerstein test process.
    Simulate(SimulateArgs),
    /// Train and score models on a plan of training and test signals.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Idsfid,
    Aprbs,
    Multisine,
    Ramp,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    /// JSON generator configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum APRBS hold time in seconds.
    #[arg(long)]
    hold_time: Option<f64>,
    /// Multisine band in Hz.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    band: Option<Vec<f64>>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Signal CSV with columns u1 and optionally y.
    signal: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    /// Plan file; the bundled desk-scale plan when omitted.
    plan: Option<PathBuf>,
    #[arg(long, conflicts_with = "plan")]
    config: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn default_n() -> usize {
    300
}

fn default_t0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    #[serde(default = "default_n")]
    n_samples: usize,
    #[serde(default = "default_t0")]
    sampling_time: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    signal: Option<SignalSpec>,
    /// Full design settings, for several inputs or non-default proxies.
    #[serde(default)]
    optimizer: Option<OptimizerConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    #[serde(default = "default_t0")]
    sampling_time: f64,
    #[serde(default)]
    noise_sigma: f64,
    #[serde(default)]
    seed: u64,
    /// Initial output; the steady state of the first input sample when absent.
    #[serde(default)]
    y0: Option<f64>,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

type CmdResult<T> = Result<T, Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn runtime_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn classify(e: idsfid::Error) -> Failure {
    match e {
        idsfid::Error::InvalidConfig { .. } | idsfid::Error::EmptyBand { .. } => config_err(e),
        other => runtime_err(other),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(config_err)?;
    serde_json::from_str(&text)
        .with_context(|| format!("invalid configuration in {}", path.display()))
        .map_err(config_err)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(runtime_err)?;
    fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime_err)
}

fn prepare_dir(dir: &Path) -> CmdResult<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(runtime_err)
}

fn kind_of(spec: &SignalSpec) -> Kind {
    match spec {
        SignalSpec::Idsfid { .. } => Kind::Idsfid,
        SignalSpec::Aprbs { .. } => Kind::Aprbs,
        SignalSpec::Multisine { .. } => Kind::Multisine,
        SignalSpec::Ramp { .. } => Kind::Ramp,
    }
}

fn default_spec(kind: Kind) -> SignalSpec {
    match kind {
        Kind::Idsfid => SignalSpec::idsfid(0.0),
        Kind::Aprbs => SignalSpec::Aprbs {
            hold_time: 5.0,
            range: [0.0, 1.0],
        },
        Kind::Multisine => SignalSpec::Multisine {
            band: [0.0, 0.5],
            range: [0.0, 1.0],
        },
        Kind::Ramp => SignalSpec::Ramp { range: [0.0, 1.0] },
    }
}

fn resolve_generate(args: &GenerateArgs) -> CmdResult<GenerateConfig> {
    let mut cfg = match &args.config {
        Some(p) => read_json::<GenerateConfig>(p)?,
        None => GenerateConfig {
            n_samples: default_n(),
            sampling_time: default_t0(),
            seed: 0,
            signal: None,
            optimizer: None,
        },
    };
    if let Some(n) = args.n_samples {
        cfg.n_samples = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(opt) = &mut cfg.optimizer {
        if args.kind.is_some_and(|k| k != Kind::Idsfid) {
            return Err(config_err(anyhow!(
                "`optimizer` settings only apply to --kind idsfid"
            )));
        }
        opt.n_samples = cfg.n_samples;
        opt.seed = cfg.seed;
        opt.sampling_time = cfg.sampling_time;
        if let Some(l) = args.lambda {
            opt.quality.lambda = l;
        }
        if args.hold_time.is_some() || args.band.is_some() {
            return Err(config_err(anyhow!(
                "--hold-time and --band do not apply to idsfid"
            )));
        }
        opt.validate().map_err(classify)?;
        *opt = opt.resolved();
        return Ok(cfg);
    }

    let kind = args
        .kind
        .or(cfg.signal.as_ref().map(kind_of))
        .ok_or_else(|| {
            config_err(anyhow!(
                "no signal kind: pass --kind or set `signal` in the config"
            ))
        })?;
    let mut spec = match cfg.signal.take() {
        Some(s) if kind_of(&s) == kind => s,
        _ => default_spec(kind),
    };
    match (&mut spec, args.lambda, args.hold_time, &args.band) {
        (SignalSpec::Idsfid { lambda, .. }, l, None, None) => {
            if let Some(l) = l {
                *lambda = l;
            }
        }
        (SignalSpec::Aprbs { hold_time, .. }, None, h, None) => {
            if let Some(h) = h {
                *hold_time = h;
            }
        }
        (SignalSpec::Multisine { band, .. }, None, None, b) => {
            if let Some(b) = b {
                *band = [b[0], b[1]];
            }
        }
        (SignalSpec::Ramp { .. }, None, None, None) => {}
        _ => {
            return Err(config_err(anyhow!(
                "--lambda applies to idsfid, --hold-time to aprbs and --band to multisine only"
            )))
        }
    }
    spec.validate(cfg.n_samples, cfg.sampling_time)
        .map_err(classify)?;
    if let Some(opt) = spec.optimizer_config(cfg.n_samples, cfg.sampling_time, cfg.seed) {
        cfg.optimizer = Some(opt.resolved());
    } else {
        cfg.signal = Some(spec);
    }
    Ok(cfg)
}

fn cmd_generate(args: GenerateArgs) -> CmdResult<()> {
    let cfg = resolve_generate(&args)?;
    prepare_dir(&args.out_dir)?;
    write_json(&args.out_dir.join("config.json"), &cfg)?;
    let inputs = match (&cfg.optimizer, &cfg.signal) {
        (Some(opt), _) => {
            let design = generate_design(opt).map_err(classify)?;
            let path = args.out_dir.join("sequences.json");
            write_json(&path, &design.sequences)?;
            design.signal
        }
        (None, Some(spec)) => MultiSignal::from_signal(
            spec.generate(cfg.n_samples, cfg.sampling_time, cfg.seed)
                .map_err(classify)?,
        ),
        (None, None) => unreachable!("resolved configs carry a signal"),
    };
    let path = args.out_dir.join("signal.csv");
    SignalTable {
        inputs,
        output: None,
    }
    .write_path(&path)
    .map_err(runtime_err)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult<()> {
    let mut cfg = match &args.config {
        Some(p) => read_json::<SimulateConfig>(p)?,
        None => SimulateConfig {
            sampling_time: default_t0(),
            noise_sigma: 0.0,
            seed: 0,
            y0: None,
        },
    };
    if let Some(s) = args.noise_sigma {
        cfg.noise_sigma = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if !(cfg.noise_sigma.is_finite() && cfg.noise_sigma >= 0.0) {
        return Err(config_err(anyhow!(
            "invalid `noise_sigma`: must be finite and >= 0"
        )));
    }
    if !(cfg.sampling_time.is_finite() && cfg.sampling_time > 0.0) {
        return Err(config_err(anyhow!(
            "invalid `sampling_time`: must be finite and > 0"
        )));
    }
    let table = SignalTable::read_path(&args.signal, cfg.sampling_time)
        .with_context(|| format!("cannot load signal {}", args.signal.display()))
        .map_err(config_err)?;
    if table.inputs.num_inputs() != 1 {
        return Err(config_err(anyhow!(
            "the test process has one input, the file has {}",
            table.inputs.num_inputs()
        )));
    }
    if table.output.is_some() {
        log::warn!(
            "replacing the existing y column of {}",
            args.signal.display()
        );
    }
    let u = table.inputs.channel(0);
    let process = HammersteinProcess::with_noise(cfg.noise_sigma);
    let seed = (cfg.noise_sigma > 0.0).then_some(cfg.seed);
    let y = process.simulate(&u, cfg.y0, seed).map_err(classify)?;
    prepare_dir(&args.out_dir)?;
    write_json(&args.out_dir.join("config.json"), &cfg)?;
    let path = args.out_dir.join("simulated.csv");
    SignalTable {
        inputs: table.inputs,
        output: Some(y),
    }
    .write_path(&path)
    .map_err(runtime_err)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> CmdResult<()> {
    let mut plan: ExperimentPlan = match args.plan.as_ref().or(args.config.as_ref()) {
        Some(p) => read_json(p)?,
        None => serde_json::from_str(DESK_PLAN).map_err(runtime_err)?,
    };
    if let Some(r) = args.repetitions {
        plan.repetitions = r;
    }
    if let Some(s) = args.seed {
        plan.master_seed = s;
    }
    let problems = plan.problems();
    if !problems.is_empty() {
        let list: Vec<String> = problems.iter().map(|p| format!("  - {p}")).collect();
        return Err(config_err(anyhow!("invalid plan:\n{}", list.join("\n"))));
    }
    prepare_dir(&args.out_dir)?;
    let results = run_experiment(&plan, Some(&args.out_dir)).map_err(classify)?;
    println!(
        "{:<20} {:<20} {:>10} {:>10} {:>10}",
        "train", "test", "median", "q1", "q3"
    );
    for s in &results.summary {
        println!(
            "{:<20} {:<20} {:>10.5} {:>10.5} {:>10.5}",
            s.train_signal, s.test_signal, s.median, s.q1, s.q3
        );
    }
    if !results.failures.is_empty() {
        println!("{} repetitions failed (see log)", results.failures.len());
    }
    println!("artifacts in {}", args.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("IDSFID_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
