use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bondtca(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bondtca"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn generated(dir: &Path) {
    let out = bondtca(&["generate", "--n-bonds", "12", "--n-events", "1500"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn error_body(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("json error on stderr");
    serde_json::from_str(line).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bondtca(
        &["pipeline", "--generate", "--n-bonds", "12", "--n-events", "1500"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "trace.csv",
        "reference.csv",
        "context.csv",
        "calendar.txt",
        "manifest.json",
        "clean_trades.csv",
        "filter_report.json",
        "signed_trades.csv",
        "spreads.csv",
        "weekly_spreads.csv",
        "one_sided_spreads.csv",
        "features.csv",
        "fit.json",
        "impact/kernels.json",
        "report.json",
        "stationarity.csv",
    ] {
        assert!(tmp.path().join(name).is_file(), "missing {name}");
    }
    let report = json(&tmp.path().join("report.json"));
    for section in [
        "meta",
        "filter",
        "classification",
        "spreads",
        "asymmetry",
        "fit",
        "impact",
    ] {
        assert!(report.get(section).is_some(), "report lacks {section}");
    }
}

#[test]
fn stages_run_one_at_a_time() {
    let tmp = tempfile::tempdir().unwrap();
    generated(tmp.path());
    for stage in ["ingest", "classify", "spread", "features", "fit", "impact", "report"] {
        let out = bondtca(&[stage], tmp.path());
        assert!(
            out.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn reversed_ranges_are_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    generated(tmp.path());
    for stage in ["ingest", "classify", "spread", "features"] {
        assert!(bondtca(&[stage], tmp.path()).status.success());
    }
    let out = bondtca(
        &[
            "fit",
            "--model",
            "lslasso",
            "--train-range",
            "2015-W30..2015-W40",
            "--test-range",
            "2015-W02..2015-W10",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let body = error_body(&out);
    assert_eq!(body["error"]["kind"], "config");
    assert_eq!(body["error"]["exit_code"], 2);
}

#[test]
fn top_k_limits_the_bonds_analysed() {
    let tmp = tempfile::tempdir().unwrap();
    generated(tmp.path());
    for stage in ["ingest", "classify"] {
        assert!(bondtca(&[stage], tmp.path()).status.success());
    }
    for k in ["1", "3"] {
        let out = bondtca(&["impact", "--top-k", k], tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let kernels = json(&tmp.path().join("impact/kernels.json"));
        assert_eq!(kernels["bonds"].as_array().unwrap().len(), k.parse::<usize>().unwrap());
    }
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bondtca(&["ingest"], tmp.path());
    assert!(!out.status.success());
    assert!(error_body(&out)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("trace.csv"));
}

#[test]
fn bad_flags_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(!bondtca(&["fit", "--no-such-flag"], tmp.path()).status.success());
    assert!(!bondtca(&["fit", "--model", "svm"], tmp.path()).status.success());
    let zero = bondtca(&["--threads", "0", "report"], tmp.path());
    assert_eq!(zero.status.code(), Some(2));
    let help = Command::new(env!("CARGO_BIN_EXE_bondtca"))
        .arg("--help")
        .output()
        .unwrap();
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("pipeline"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 5\n[synth]\nn_events = 300\n[synth.fixture]\nn_bonds = 2\n",
    )
    .unwrap();
    let out = bondtca(
        &["--config", cfg.to_str().unwrap(), "generate", "--n-bonds", "3"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let refs = std::fs::read_to_string(tmp.path().join("reference.csv")).unwrap();
    assert_eq!(refs.lines().filter(|l| l.starts_with("SY")).count(), 3);
    assert!(refs.starts_with("# bondtca") && refs.lines().next().unwrap().contains("seed=5"));

    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    let bad = bondtca(&["--config", cfg.to_str().unwrap(), "generate"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn same_seed_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let dir = tmp.path().join(name);
        let out = bondtca(
            &[
                "pipeline",
                "--generate",
                "--n-bonds",
                "12",
                "--n-events",
                "1500",
                "--seed",
                "3",
            ],
            &dir,
        );
        assert!(out.status.success());
        ["features.csv", "fit.json", "impact/kernels.json", "report.json"].map(|f| std::fs::read(dir.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}
