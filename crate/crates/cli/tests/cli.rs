use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
    "input": {"kind": "ar1", "pole": 0.9},
    "total_samples": 2000,
    "taps": 32,
    "subbands": 4,
    "snr_db": 30,
    "runs": 2,
    "algorithms": [
        {"kind": "nsaf", "name": "NSAF", "mu": 0.5, "delta": 1.0},
        {"kind": "josr", "name": "JOSR"}
    ]
}"#;

fn nsaf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsaf")).args(args).output().unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("exp.json");
    std::fs::write(&path, CONFIG).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_is_deterministic_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = nsaf(&["run", "--config", &cfg]);
    let b = nsaf(&["run", "--config", &cfg]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    assert!(text.starts_with("iteration,NSAF,JOSR\n"));
    assert_eq!(text.lines().count(), 501);

    let reseeded = nsaf(&["run", "--config", &cfg, "--seed", "9", "--runs", "1"]);
    assert!(reseeded.status.success());
    assert_ne!(reseeded.stdout, a.stdout);
}

#[test]
fn run_writes_requested_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let csv = dir.path().join("out.csv");
    let svg = dir.path().join("out.svg");
    let out = nsaf(&[
        "run", "--config", &cfg,
        "--out-csv", csv.to_str().unwrap(),
        "--out-svg", svg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(csv).unwrap().starts_with("iteration,"));
    assert!(std::fs::read_to_string(svg).unwrap().contains("<polyline"));
}

#[test]
fn theory_uses_the_same_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = nsaf(&["theory", "--config", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("iteration,NSAF,JOSR\n"));
    assert_eq!(text.lines().count(), 501);
}

#[test]
fn banks_dump_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.txt");
    let out = nsaf(&["banks", "--n", "4", "--k", "8", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let bank = nsaf_core::AnalysisBank::from_text(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(bank.subbands(), 4);
    assert_eq!(bank.filter_len(), 64);
}

#[test]
fn errors_are_reported_without_panicking() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, CONFIG.replace("\"runs\": 2", "\"runs\": 2, \"colour\": 1")).unwrap();
    for args in [
        vec!["run", "--config", bad.to_str().unwrap()],
        vec!["run", "--config", "/no/such/file.json"],
        vec!["banks", "--n", "0", "--out", "/tmp/never"],
    ] {
        let out = nsaf(&args);
        assert!(!out.status.success());
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with("Error:"), "{err}");
        assert!(!err.contains("panicked"));
    }
}
