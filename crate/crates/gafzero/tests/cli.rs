use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn gafzero(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gafzero"))
        .args(args)
        .current_dir(dir)
        .env_remove("GAFZERO_SEED")
        .output()
        .unwrap()
}

fn summary(dir: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let ok = gafzero(&["counts", "--trials", "20", "--out", "a"], d);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let bad_value = gafzero(&["counts", "--family", "elliptic", "--L", "2.5"], d);
    assert_eq!(bad_value.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_value.stderr).contains("`L`"));
    assert_eq!(
        gafzero(&["counts", "--no-such-flag"], d).status.code(),
        Some(2)
    );
    assert_eq!(gafzero(&["--help"], d).status.code(), Some(0));
    let leading_run = gafzero(&["run", "oracle", "--pv", "0", "0.5", "--out", "o"], d);
    assert_eq!(leading_run.status.code(), Some(0));
}

#[test]
fn oracle_prints_closed_form_pair_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gafzero(&["oracle", "--pv", "0", "0.5", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let value: f64 = text
        .lines()
        .find(|l| l.starts_with("pv_correlation"))
        .and_then(|l| l.rsplit('=').next())
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    let exact = 7.0 / (9.0 * std::f64::consts::PI.powi(2));
    assert!((value - exact).abs() < 1e-12, "{value} vs {exact}");
    let neg = gafzero(
        &["oracle", "--pv=-0.2+0.1i,0.3,-0.1", "--out", "n"],
        tmp.path(),
    );
    assert_eq!(
        neg.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&neg.stderr)
    );
    let spaced = gafzero(&["oracle", "--pv", "0.3", "-0.1", "--out", "n"], tmp.path());
    assert_eq!(
        spaced.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&spaced.stderr)
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for (w, out) in [("1", "w1"), ("2", "w2")] {
        let args = [
            "counts",
            "--family",
            "hyperbolic",
            "--rho",
            "0.6",
            "--trials",
            "200",
            "--seed",
            "9",
            "--workers",
            w,
            "--out",
            out,
        ];
        assert_eq!(gafzero(&args, d).status.code(), Some(0));
    }
    let a = summary(&d.join("w1"), "counts");
    let b = summary(&d.join("w2"), "counts");
    assert_eq!(a["estimates"], b["estimates"]);
    assert_eq!(a["config_hash"], b["config_hash"]);
    let csv_a = std::fs::read(d.join("w1/counts.csv")).unwrap();
    let csv_b = std::fs::read(d.join("w2/counts.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn summary_replays_from_embedded_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let first = [
        "hole", "--family", "flat", "--trials", "300", "--seed", "4", "--out", "first",
    ];
    assert_eq!(gafzero(&first, d).status.code(), Some(0));
    let replay = ["hole", "--config", "first/hole.json", "--out", "second"];
    let out = gafzero(&replay, d);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let a = summary(&d.join("first"), "hole");
    let b = summary(&d.join("second"), "hole");
    assert_eq!(a["estimates"], b["estimates"]);
    assert_eq!(a["config_hash"], b["config_hash"]);
}

#[test]
fn summaries_follow_the_schema() {
    let schema: Value = serde_json::from_str(gafzero::io::SUMMARY_SCHEMA).unwrap();
    let validator = jsonschema::JSONSchema::compile(&schema).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let runs: [&[&str]; 4] = [
        &["counts", "--trials", "30"],
        &["zeros", "--trials", "5"],
        &["akt", "--trials", "4", "--n", "6"],
        &["oracle", "--pv", "0", "0.3"],
    ];
    for args in runs {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", args[0]]);
        assert_eq!(gafzero(&full, d).status.code(), Some(0), "{args:?}");
        let s = summary(&d.join(args[0]), args[0]);
        assert!(validator.is_valid(&s), "{args:?}");
        for file in s["artifacts"].as_array().unwrap() {
            assert!(d.join(args[0]).join(file.as_str().unwrap()).exists());
        }
    }
    let mut broken = summary(&d.join("counts"), "counts");
    broken["extra"] = Value::Bool(true);
    assert!(!validator.is_valid(&broken));
}

#[test]
fn seed_environment_variable_is_the_default_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let with_env = |out: &str, extra: &[&str]| {
        let mut args = vec!["counts", "--trials", "50", "--out", out];
        args.extend(extra);
        Command::new(env!("CARGO_BIN_EXE_gafzero"))
            .args(&args)
            .current_dir(d)
            .env("GAFZERO_SEED", "77")
            .output()
            .unwrap()
    };
    assert!(with_env("env", &[]).status.success());
    assert!(with_env("flag", &["--seed", "5"]).status.success());
    assert_eq!(summary(&d.join("env"), "counts")["seed"], 77);
    assert_eq!(summary(&d.join("flag"), "counts")["seed"], 5);
}

#[test]
fn repeated_runs_write_identical_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for out in ["x", "y"] {
        let args = ["paircorr", "--trials", "100", "--seed", "3", "--out", out];
        assert_eq!(gafzero(&args, d).status.code(), Some(0));
    }
    let a = std::fs::read_to_string(d.join("x/paircorr.csv")).unwrap();
    let b = std::fs::read_to_string(d.join("y/paircorr.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.lines().count() > 1);
}
