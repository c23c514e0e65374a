use std::path::Path;
use std::process::{Command, Output};

fn driftbandit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftbandit")).args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = driftbandit(&["run", "--task", "lb", "--T", "10", "--trials", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(out.join("traces.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "task,algorithm,trial,t,inst_regret,cum_regret");
    assert_eq!(lines.len(), 1 + 2 * 10);
    assert!(!csv.contains('\r'));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["T"], 10);
    assert_eq!(summary["algorithms"].as_array().unwrap().len(), 2);
    assert!(summary["git_describe"].is_string());
    assert!(text(&o.stdout).contains("weighted"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"task": "glb", "T": 150, "trials": 3, "base_seed": 11, "algorithms": ["weighted", "restart"]}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = driftbandit(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", text(&o.stderr));
    }
    let (x, y) = (std::fs::read(a.join("traces.csv")).unwrap(), std::fs::read(b.join("traces.csv")).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"task": "lb", "T": 500, "trials": 7, "gamma": 0.5, "base_seed": 3}"#);
    let out = dir.path().join("o");
    let o = driftbandit(&["run", "--config", &cfg, "--T", "20", "--trials", "2", "--gamma", "auto", "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["config"]["T"], 20);
    assert_eq!(s["config"]["trials"], 2);
    assert_eq!(s["config"]["gamma"], "auto");
    assert_eq!(s["seeds"], serde_json::json!([9, 10]));
}

#[test]
fn config_errors_are_reported() {
    let o = driftbandit(&["run", "--task", "lb", "--gamma", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("gamma"));
    let o = driftbandit(&["run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("--config"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"task": "lb", "trails": 3}"#);
    let o = driftbandit(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("trails"));
    let o = driftbandit(&["run", "--task", "bandit"]);
    assert!(!o.status.success());
}

#[test]
fn sweep_fits_a_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = driftbandit(&["sweep", "--task", "lb", "--T", "200,400,800", "--trials", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("slope"));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(s["points"].as_array().unwrap().len(), 3);
    assert!(s["fit"]["slope"].as_f64().unwrap().is_finite());
    let o = driftbandit(&["sweep", "--task", "lb", "--T", "200,400"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let o = driftbandit(&["selftest"]);
    assert!(o.status.success(), "{}", text(&o.stdout));
    let stdout = text(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 8, "{stdout}");
}
