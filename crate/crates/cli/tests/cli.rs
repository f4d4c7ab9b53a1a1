use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use irsbeam::montecarlo::{read_aggregates, read_raw, AGG_HEADER, RAW_HEADER};

fn irsbeam(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irsbeam"))
        .args(args)
        .current_dir(dir)
        .env("IRSBEAM_THREADS", "2")
        .output()
        .unwrap()
}

const SMALL: &str = r#"
methods = ["proposed-rzf", "random", "no-irs"]

[dims]
M = 4
N = 12
K = 2

[sweep]
values = [0, 20]
trials = 4
master_seed = 11
"#;

#[test]
fn run_writes_csvs_and_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let out = irsbeam(&["run", "--scenario", "small.toml", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("proposed-rzf"));

    let raw = fs::read_to_string(dir.path().join("res/small_raw.csv")).unwrap();
    assert_eq!(raw.lines().next().unwrap(), RAW_HEADER.join(","));
    assert_eq!(raw.lines().count(), 1 + 3 * 2 * 4);
    let agg = fs::read_to_string(dir.path().join("res/small_agg.csv")).unwrap();
    assert_eq!(agg.lines().next().unwrap(), AGG_HEADER.join(","));

    let (_, records) = read_raw(&dir.path().join("res/small_raw.csv")).unwrap();
    assert!(records.iter().all(|r| r.min_rate.is_some_and(|v| v > 0.0)));
    let aggregates = read_aggregates(&dir.path().join("res/small_agg.csv")).unwrap();
    assert_eq!(aggregates.len(), 3 * 2);
    assert!(aggregates.iter().all(|a| a.trials == 4));
}

#[test]
fn identical_flags_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    for out in ["a", "b"] {
        let o = irsbeam(
            &["run", "--scenario", "small.toml", "--out", out, "--seed", "3"],
            dir.path(),
        );
        assert!(o.status.success());
    }
    for file in ["small_raw.csv", "small_agg.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let o = irsbeam(
        &["run", "--scenario", "small.toml", "--out", "c", "--seed", "4"],
        dir.path(),
    );
    assert!(o.status.success());
    assert_ne!(
        fs::read(dir.path().join("a/small_raw.csv")).unwrap(),
        fs::read(dir.path().join("c/small_raw.csv")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    for (threads, out) in [("1", "one"), ("0", "auto")] {
        let o = Command::new(env!("CARGO_BIN_EXE_irsbeam"))
            .args(["run", "--scenario", "small.toml", "--out", out])
            .current_dir(dir.path())
            .env("IRSBEAM_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success());
    }
    assert_eq!(
        fs::read(dir.path().join("one/small_raw.csv")).unwrap(),
        fs::read(dir.path().join("auto/small_raw.csv")).unwrap()
    );
}

#[test]
fn sweep_n_uses_irs_axis() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let o = irsbeam(
        &[
            "sweep-n",
            "--scenario",
            "small.toml",
            "--values",
            "0,8",
            "--trials",
            "2",
            "--out",
            ".",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let raw = fs::read_to_string(dir.path().join("irs_size_raw.csv")).unwrap();
    assert!(raw.lines().skip(1).all(|l| l.split(',').nth(1) == Some("irs_elements")));
    assert!(raw.contains(",irs_elements,8,"));
}

#[test]
fn missing_scenario_fails_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = irsbeam(
        &["run", "--scenario", "nowhere/absent.toml", "--out", "res"],
        dir.path(),
    );
    assert!(!o.status.success());
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.contains("nowhere/absent.toml"), "{stderr}");
    assert!(!dir.path().join("res").exists());
}

#[test]
fn invalid_scenario_names_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[dims]\nK = 0\n").unwrap();
    let o = irsbeam(&["run", "--scenario", "bad.toml"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().contains("dims.K"));
}

#[test]
fn bad_flags_and_env_fail() {
    let dir = tempfile::tempdir().unwrap();
    let o = irsbeam(&["run"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().contains("Usage"));

    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_irsbeam"))
        .args(["run", "--scenario", "small.toml"])
        .current_dir(dir.path())
        .env("IRSBEAM_THREADS", "many")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().contains("IRSBEAM_THREADS"));
}
