//! End-to-end tests of the `neuropong` binary: artifact layout, exit
//! codes, determinism, and the replay round trip.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn neuropong(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neuropong"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = neuropong(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

/// The iterations CSV with its wall-time column (the one timing-derived
/// field) removed.
fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|line| line.rsplit_once(',').expect("wall-time column").0)
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn run_writes_the_full_artifact_set() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    run_ok(&["run", "--iterations", "100", "--out", out.to_str().unwrap()]);
    for name in [
        "manifest.toml",
        "iterations.csv",
        "run.ndjson",
        "weights.txt",
        "metrics/catch_fraction.csv",
        "metrics/mean_reward.csv",
        "metrics/summary.txt",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let manifest = read(&out, "manifest.toml");
    assert!(manifest.contains("status = \"complete\""));
    assert!(manifest.contains("[config.plasticity]"));
}

#[test]
fn missing_config_file_names_the_path_and_exits_1() {
    let out = neuropong(&["run", "--config", "does/not/exist.toml"]);
    assert_eq!(exit_code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("does/not/exist.toml"), "{err}");
}

#[test]
fn same_seed_twice_is_byte_identical_up_to_wall_time() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(&[
            "run",
            "--seed",
            "7",
            "--iterations",
            "150",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(
        strip_wall_time(&read(&a, "iterations.csv")),
        strip_wall_time(&read(&b, "iterations.csv"))
    );
    for name in [
        "weights.txt",
        "metrics/catch_fraction.csv",
        "metrics/mean_reward.csv",
        "metrics/summary.txt",
    ] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs");
    }
}

#[test]
fn catch_curve_has_iterations_over_eval_every_rows() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    run_ok(&[
        "run",
        "--iterations",
        "2000",
        "--out",
        out.to_str().unwrap(),
    ]);
    let curve = read(&out, "metrics/catch_fraction.csv");
    // Header plus 2000 / eval_every (default 100) data rows.
    assert_eq!(curve.lines().count(), 1 + 2000 / 100);
    assert!(curve.starts_with("iteration,catch_fraction\n"));
}

#[test]
fn rerunning_from_the_manifest_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&[
        "run",
        "--seed",
        "5",
        "--iterations",
        "120",
        "--snn.rate_hi=60",
        "--out",
        a.to_str().unwrap(),
    ]);
    let manifest = a.join("manifest.toml");
    run_ok(&[
        "run",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(
        strip_wall_time(&read(&a, "iterations.csv")),
        strip_wall_time(&read(&b, "iterations.csv"))
    );
    assert_eq!(read(&a, "weights.txt"), read(&b, "weights.txt"));
}

#[test]
fn unknown_config_keys_exit_1_with_the_field_named() {
    let out = neuropong(&["run", "--snn.tau=3"]);
    assert_eq!(exit_code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tau"), "{err}");
}

#[test]
fn quiet_mode_emits_one_json_line() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let stdout = run_ok(&[
        "run",
        "--quiet",
        "--iterations",
        "60",
        "--out",
        out.to_str().unwrap(),
    ]);
    let mut lines = stdout.lines();
    let line = lines.next().expect("one line");
    assert!(lines.next().is_none(), "extra stdout: {stdout}");
    let value: serde_json::Value = serde_json::from_str(line).expect("valid JSON");
    assert_eq!(value["command"], "run");
    assert_eq!(value["status"], "complete");
    assert!(value["final_catch_fraction"].is_number());
}

#[test]
fn single_seed_sweep_aggregate_equals_that_seeds_curve() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep");
    run_ok(&[
        "sweep",
        "--seeds",
        "9",
        "--iterations",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    let aggregate = read(&out, "aggregate.csv");
    let curve = read(&out, "seed_9/metrics/catch_fraction.csv");
    let curve_rows: Vec<(&str, &str)> = curve
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap())
        .collect();
    let aggregate_rows: Vec<Vec<&str>> = aggregate
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(aggregate.lines().next(), Some("iteration,median,q25,q75"));
    assert_eq!(aggregate_rows.len(), curve_rows.len());
    for (agg, (iteration, fraction)) in aggregate_rows.iter().zip(&curve_rows) {
        assert_eq!(agg[0], *iteration);
        // One seed: median and both quartiles are that seed's value.
        assert_eq!(agg[1], *fraction);
        assert_eq!(agg[2], *fraction);
        assert_eq!(agg[3], *fraction);
    }
}

#[test]
fn parallel_and_serial_sweeps_agree_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let (serial, parallel) = (dir.path().join("serial"), dir.path().join("parallel"));
    for (out, jobs) in [(&serial, "1"), (&parallel, "3")] {
        run_ok(&[
            "sweep",
            "--seeds",
            "1..3",
            "--iterations",
            "120",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(read(&serial, "aggregate.csv"), read(&parallel, "aggregate.csv"));
    for seed in 1..=3 {
        let name = format!("seed_{seed}/weights.txt");
        assert_eq!(read(&serial, &name), read(&parallel, &name), "{name}");
    }
}

#[test]
fn default_bench_reports_both_modes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench");
    run_ok(&[
        "bench",
        "--sizes",
        "8x8",
        "--iterations",
        "10",
        "--warmup",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let report = read(&out, "bench_report.csv");
    assert!(report.contains("\nno-plasticity,8,8,"));
    assert!(report.contains("\nwith-plasticity,8,8,"));
    let samples = read(&out, "bench_samples.csv");
    // Two modes, eight measured iterations each (warmup is part of the
    // iteration budget).
    assert_eq!(samples.lines().count(), 1 + 2 * 8);
}

#[test]
fn bench_mode_filter_yields_a_single_mode_report() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench");
    run_ok(&[
        "bench",
        "--modes",
        "no-plasticity",
        "--sizes",
        "8x8",
        "--iterations",
        "5",
        "--warmup",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    let report = read(&out, "bench_report.csv");
    assert!(report.contains("no-plasticity"));
    assert!(!report.contains("with-plasticity"));
}

#[test]
fn malformed_bench_lists_exit_1() {
    for args in [
        ["bench", "--sizes", "8y8"],
        ["bench", "--modes", "sometimes-plasticity"],
    ] {
        let out = neuropong(&args);
        assert_eq!(exit_code(&out), 1, "{args:?}");
    }
}

#[test]
fn replay_reproduces_the_runs_metrics_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let (run_dir, replay_dir) = (dir.path().join("run"), dir.path().join("replay"));
    run_ok(&[
        "run",
        "--iterations",
        "200",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    let log = run_dir.join("run.ndjson");
    run_ok(&[
        "replay",
        log.to_str().unwrap(),
        "--out",
        replay_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        read(&run_dir, "metrics/catch_fraction.csv"),
        read(&replay_dir, "catch_fraction.csv")
    );
    assert_eq!(
        read(&run_dir, "metrics/mean_reward.csv"),
        read(&replay_dir, "mean_reward.csv")
    );
    // Default 32x32 network: one heat-map row per synapse plus header.
    let heatmap = read(&replay_dir, "weights_heatmap.csv");
    assert_eq!(heatmap.lines().count(), 1 + 32 * 32);
    let ma = read(&replay_dir, "reward_ma.csv");
    // Trailing window of 100 over 200 iterations: rows 99..=199.
    assert_eq!(ma.lines().count(), 1 + 101);
}

#[test]
fn replay_of_an_iterations_csv_yields_the_moving_average() {
    let dir = TempDir::new().unwrap();
    let (run_dir, replay_dir) = (dir.path().join("run"), dir.path().join("replay"));
    run_ok(&[
        "run",
        "--iterations",
        "150",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    let log = run_dir.join("iterations.csv");
    run_ok(&[
        "replay",
        log.to_str().unwrap(),
        "--window",
        "50",
        "--out",
        replay_dir.to_str().unwrap(),
    ]);
    let ma = read(&replay_dir, "reward_ma.csv");
    assert!(ma.starts_with("iteration,reward_ma\n"));
    assert_eq!(ma.lines().count(), 1 + 101);
    assert!(!replay_dir.join("catch_fraction.csv").exists());
}

#[test]
fn replay_error_paths_use_the_right_exit_codes() {
    let dir = TempDir::new().unwrap();
    // Missing input: a usage error.
    let out = neuropong(&["replay", "no/such/log.ndjson"]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no/such/log.ndjson"));

    // Empty log: a data error.
    let empty = dir.path().join("empty.ndjson");
    fs::write(&empty, "").unwrap();
    let out = neuropong(&[
        "replay",
        empty.to_str().unwrap(),
        "--out",
        dir.path().join("r1").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);

    // Truncated log: a data error naming the last valid record.
    let truncated = dir.path().join("truncated.ndjson");
    let header = r#"{"type":"header","version":"0","seed":1,"n_iterations":1,"eval_every":1,"n_input":2,"n_output":2,"n_columns":2,"weight_levels":4,"w_min":0.0,"w_max":3.0}"#;
    fs::write(&truncated, format!("{header}\n{{\"type\":\"ev")).unwrap();
    let out = neuropong(&[
        "replay",
        truncated.to_str().unwrap(),
        "--out",
        dir.path().join("r2").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("last valid record is line 1"), "{err}");
}

#[test]
fn failed_commands_leave_a_failed_manifest() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.ndjson");
    fs::write(&empty, "").unwrap();
    let out_dir = dir.path().join("replay");
    let out = neuropong(&[
        "replay",
        empty.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    let manifest = read(&out_dir, "manifest.toml");
    assert!(manifest.contains("status = \"failed\""), "{manifest}");
    assert!(manifest.contains("error = "), "{manifest}");
}

#[test]
fn help_and_version_exit_0() {
    for flag in ["--help", "--version"] {
        let out = neuropong(&[flag]);
        assert_eq!(exit_code(&out), 0, "{flag}");
    }
    let out = neuropong(&["run", "--definitely-not-a-flag"]);
    assert_eq!(exit_code(&out), 1);
}
