use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scorebucket"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn synth(dir: &Path, dates: &str) {
    let out = run(dir, &["synth", "--out-dir", "data", "--dates", dates, "--assets", "40", "--zero-score", "8", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(
        dir.join("run.cfg"),
        "returns = data/returns.csv\nscores = data/scores.csv\ncaps = data/caps.csv\nk = 3\nws = 60\nresamples = 99\n",
    )
    .unwrap();
}

#[test]
fn full_run_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "200");
    let out = run(dir.path(), &["all", "--config", "run.cfg", "--seed", "5", "--out-dir", "out"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(dir.path().join("out/metrics_ws60.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 3 * 4);
    assert!(dir.path().join("out/run_manifest").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("PT"));
}

#[test]
fn stages_match_full_run() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "150");
    let common = ["--config", "run.cfg", "--seed", "5"];
    let all = run(dir.path(), &[&["all", "--out-dir", "a"], &common[..]].concat());
    assert!(all.status.success());
    for stage in ["bucket", "backtest", "test", "report"] {
        let out = run(dir.path(), &[&[stage, "--out-dir", "b"], &common[..]].concat());
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["metrics_ws60.csv", "tests_ws60.csv", "wealth_ws60_MV.csv", "buckets.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn window_longer_than_panel_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "50");
    let out = run(dir.path(), &["all", "--config", "run.cfg", "--seed", "1", "--ws", "84"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("window size 84"));
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "100");
    let out = run(dir.path(), &["all", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_returns_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "100");
    std::fs::write(dir.path().join("data/returns.csv"), "date,A\n2020-01-01,abc\n").unwrap();
    let out = run(dir.path(), &["describe", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(3));
}
