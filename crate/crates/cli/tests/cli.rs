use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn idsfid(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idsfid"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn generate_idsfid_signal() {
    let tmp = tempfile::tempdir().unwrap();
    let out = idsfid(
        &[
            "generate",
            "--kind",
            "idsfid",
            "--lambda",
            "0.5",
            "--n-samples",
            "300",
            "--seed",
            "7",
            "--out-dir",
            "g",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let u = column(&tmp.path().join("g/signal.csv"), "u1");
    assert_eq!(u.len(), 300);
    let cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("g/config.json")).unwrap())
            .unwrap();
    assert_eq!(cfg["optimizer"]["quality"]["lambda"], 0.5);
    assert_eq!(cfg["optimizer"]["inputs"][0]["max_length"], 13);
    assert_eq!(cfg["optimizer"]["inputs"][0]["levels"], 67);
    assert!(tmp.path().join("g/sequences.json").exists());
}

#[test]
fn generate_ramp_endpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let out = idsfid(
        &[
            "generate",
            "--kind",
            "ramp",
            "--n-samples",
            "500",
            "--out-dir",
            "r",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let u = column(&tmp.path().join("r/signal.csv"), "u1");
    assert_eq!(u.len(), 500);
    assert_eq!(u[0], 0.0);
    assert_eq!(u[499], 1.0);
}

#[test]
fn generate_from_config_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("gen.json"),
        r#"{"n_samples": 120, "seed": 3, "signal": {"kind": "multisine", "band": [0.05, 0.1]}}"#,
    )
    .unwrap();
    let out = idsfid(
        &[
            "generate",
            "--config",
            "gen.json",
            "--n-samples",
            "200",
            "--out-dir",
            "m",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(column(&tmp.path().join("m/signal.csv"), "u1").len(), 200);
}

#[test]
fn invalid_lambda_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = idsfid(
        &[
            "generate",
            "--kind",
            "idsfid",
            "--lambda",
            "-1",
            "--out-dir",
            "x",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("gen.json"),
        r#"{"n_samples": 100, "lamda": 0.5}"#,
    )
    .unwrap();
    let out = idsfid(
        &["generate", "--kind", "idsfid", "--config", "gen.json"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_zero_input() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: String = std::iter::once("u1\n".to_string())
        .chain((0..50).map(|_| "0\n".to_string()))
        .collect();
    fs::write(tmp.path().join("zero.csv"), rows).unwrap();
    let out = idsfid(&["simulate", "zero.csv", "--out-dir", "s"], tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let y = column(&tmp.path().join("s/simulated.csv"), "y");
    assert_eq!(y.len(), 50);
    assert!(y.iter().all(|&v| v == 0.0));
    assert!(tmp.path().join("s/config.json").exists());
}

#[test]
fn simulate_noise_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let out = idsfid(
        &[
            "generate",
            "--kind",
            "aprbs",
            "--seed",
            "1",
            "--out-dir",
            "a",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    for dir in ["n1", "n2"] {
        let out = idsfid(
            &[
                "simulate",
                "a/signal.csv",
                "--noise-sigma",
                "0.1",
                "--seed",
                "3",
                "--out-dir",
                dir,
            ],
            tmp.path(),
        );
        assert!(out.status.success());
    }
    let a = fs::read(tmp.path().join("n1/simulated.csv")).unwrap();
    let b = fs::read(tmp.path().join("n2/simulated.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn simulate_missing_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = idsfid(&["simulate", "nope.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_malformed_csv() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.csv"), "u1\n0.1\nabc\n").unwrap();
    let out = idsfid(&["simulate", "bad.csv"], tmp.path());
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn experiment_smoke_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["e1", "e2"] {
        let out = idsfid(
            &[
                "experiment",
                "--repetitions",
                "1",
                "--seed",
                "4",
                "--out-dir",
                dir,
            ],
            tmp.path(),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let root = tmp.path().join("e1");
    for f in [
        "plan.json",
        "results/raw.csv",
        "results/summary.csv",
        "signals/test_ramp.csv",
        "spectra/train_idsfid_l0.csv",
        "models/idsfid_l0_r000.json",
    ] {
        assert!(root.join(f).exists(), "missing {f}");
    }
    let raw = fs::read_to_string(root.join("results/raw.csv")).unwrap();
    assert_eq!(
        raw.lines().next().unwrap(),
        "train_signal,test_signal,repetition,rmse"
    );
    assert_eq!(raw.lines().count(), 1 + 6 * 4);
    assert_eq!(
        raw,
        fs::read_to_string(tmp.path().join("e2/results/raw.csv")).unwrap()
    );
    let plan: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["repetitions"], 1);
    assert_eq!(plan["master_seed"], 4);
}

#[test]
fn experiment_lists_every_plan_problem() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("plan.json"),
        r#"{"repetitions": 0, "training": [{"name": "a", "signal": {"kind": "idsfid", "lambda": -2}}],
            "test": [{"name": "t", "signal": {"kind": "multisine", "band": [0.101, 0.1015]}}]}"#,
    )
    .unwrap();
    let out = idsfid(&["experiment", "plan.json", "--out-dir", "e"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("repetitions") && err.contains("lambda") && err.contains("band"),
        "{err}"
    );
    assert!(!tmp.path().join("e").exists());
}
