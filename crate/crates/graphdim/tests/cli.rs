//! End-to-end checks of the command-line surface: subcommands, file
//! formats, and exit codes (0 success, 1 usage, 2 data, 3 estimation).

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphdim"))
}

fn work_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("graphdim-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn synth_then_estimate_roundtrip() {
    let dir = work_dir("roundtrip");
    let cloud = dir.join("cloud.csv");
    let report = dir.join("report.json");

    let status = bin()
        .args([
            "synth", "--kind", "sphere", "--d", "2", "--p", "5", "--n", "300", "--seed", "7",
            "--out",
        ])
        .arg(&cloud)
        .status()
        .unwrap();
    assert!(status.success());

    let status = bin()
        .args(["estimate", "--in"])
        .arg(&cloud)
        .args(["--method", "qe", "--k", "30", "--out"])
        .arg(&report)
        .status()
        .unwrap();
    assert!(status.success());

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let d_hat = report["d_hat"].as_f64().unwrap();
    assert!((d_hat - 2.0).abs() < 0.2, "d_hat={d_hat}");
    assert_eq!(report["d_rounded"].as_u64(), Some(2));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn estimate_with_k_grid_reports_stability() {
    let dir = work_dir("grid");
    let cloud = dir.join("cloud.csv");
    let report = dir.join("report.json");

    assert!(bin()
        .args([
            "synth", "--kind", "sphere", "--d", "2", "--p", "5", "--n", "400", "--seed", "11",
            "--out",
        ])
        .arg(&cloud)
        .status()
        .unwrap()
        .success());

    assert!(bin()
        .args(["estimate", "--in"])
        .arg(&cloud)
        .args(["--method", "tls", "--k-grid", "20:60:10", "--window", "3", "--out"])
        .arg(&report)
        .status()
        .unwrap()
        .success());

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["per_k"].as_array().unwrap().len(), 5);
    assert!(report["stability"].is_object());

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bench_writes_csv_and_json() {
    let dir = work_dir("bench");
    let config = dir.join("bench.json");
    std::fs::write(
        &config,
        r#"{
  "manifolds": [{"id": "round", "kind": "sphere", "d": 2, "p": 4}],
  "methods": ["qe", "local-pca"],
  "n": 150,
  "replicates": 2,
  "k_grid": [15, 25],
  "window": 2,
  "master_seed": 5,
  "noise_sigma": 0.0
}"#,
    )
    .unwrap();
    let out = dir.join("results");
    assert!(bin()
        .args(["bench", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());

    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("manifold,method,k,mean,std,stable,window"));
    assert!(csv.contains("round,qe,"));
    assert!(csv.contains("round,local-pca,"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn thread_cap_env_does_not_change_results() {
    let dir = work_dir("threads");
    let config = dir.join("bench.json");
    std::fs::write(
        &config,
        r#"{
  "manifolds": [{"id": "round", "kind": "sphere", "d": 2, "p": 4}],
  "methods": ["tls"],
  "n": 150,
  "replicates": 3,
  "k_grid": [15, 25],
  "window": 2,
  "master_seed": 6,
  "noise_sigma": 0.0
}"#,
    )
    .unwrap();

    let mut normalized = Vec::new();
    for workers in ["1", "4"] {
        let out = dir.join(format!("results-{workers}"));
        assert!(bin()
            .env("GRAPHDIM_THREADS", workers)
            .args(["bench", "--config"])
            .arg(&config)
            .args(["--out"])
            .arg(&out)
            .status()
            .unwrap()
            .success());
        let mut json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap())
                .unwrap();
        for result in json.as_array_mut().unwrap() {
            result["wall_secs"] = 0.0.into();
        }
        normalized.push(json);
    }
    assert_eq!(normalized[0], normalized[1]);

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn usage_errors_exit_one() {
    // Unknown method value.
    let status = bin()
        .args([
            "estimate",
            "--in",
            "/nonexistent.csv",
            "--method",
            "bogus",
            "--k",
            "10",
            "--out",
            "/tmp/x.json",
        ])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));

    // Missing required K arguments.
    let dir = work_dir("usage");
    let cloud = dir.join("c.csv");
    std::fs::write(&cloud, "1.0,2.0\n3.0,4.0\n5.0,6.0\n9.0,1.0\n").unwrap();
    let out = bin()
        .args(["estimate", "--in"])
        .arg(&cloud)
        .args(["--method", "qe", "--out", "/tmp/x.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn data_errors_exit_two() {
    // Missing input file.
    let out = bin()
        .args([
            "estimate",
            "--in",
            "/nonexistent-graphdim.csv",
            "--method",
            "qe",
            "--k",
            "10",
            "--out",
            "/tmp/x.json",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Ragged CSV names the offending row.
    let dir = work_dir("data");
    let cloud = dir.join("ragged.csv");
    std::fs::write(&cloud, "1.0,2.0\n3.0\n").unwrap();
    let out = bin()
        .args(["estimate", "--in"])
        .arg(&cloud)
        .args(["--method", "qe", "--k", "10", "--out", "/tmp/x.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 2"), "stderr: {stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn estimation_failures_exit_three() {
    // A cloud of identical points: every neighborhood is degenerate.
    let dir = work_dir("est");
    let cloud = dir.join("flat.csv");
    let mut text = String::new();
    for _ in 0..30 {
        text.push_str("1.0,1.0\n");
    }
    std::fs::write(&cloud, text).unwrap();
    let out = bin()
        .args(["estimate", "--in"])
        .arg(&cloud)
        .args(["--method", "qe", "--k", "10", "--out", "/tmp/x.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn synth_rejects_invalid_combination() {
    // Helix has fixed intrinsic dimension 1.
    let out = bin()
        .args([
            "synth",
            "--kind",
            "helix",
            "--d",
            "3",
            "--p",
            "5",
            "--n",
            "100",
            "--seed",
            "1",
            "--out",
            "/tmp/x.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
