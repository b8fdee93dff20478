use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bandedge(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandedge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BANDEDGE_THREADS")
        .output()
        .expect("binary runs")
}

fn error_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn edge_writes_manifest_and_tables() {
    let dir = TempDir::new().unwrap();
    let args = [
        "edge",
        "--n-sites",
        "1000",
        "--w",
        "500",
        "--beta",
        "1",
        "--replicates",
        "10",
        "--seed",
        "42",
    ];
    let o = bandedge(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let manifest: Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "edge");
    assert_eq!(manifest["master_seed"], 42);
    assert_eq!(manifest["config"]["n-sites"], "1000");
    assert!(manifest["rng"].as_str().unwrap().contains("ChaCha8"));

    let extremes = read(dir.path(), "extremes.csv");
    let mut lines = extremes.lines();
    assert_eq!(
        lines.next(),
        Some("replicate,alpha_max,alpha_min,scaled_right,scaled_left,norm_ratio")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 10);
    for row in &rows {
        assert!(row[1] > 0.8 && row[1] < 1.2, "alpha_max {}", row[1]);
        assert!(row[2] < -0.8 && row[2] > -1.2, "alpha_min {}", row[2]);
        assert_eq!(row[5], row[1].abs().max(row[2].abs()));
    }

    let curves = read(dir.path(), "curves.csv");
    assert_eq!(
        curves.lines().next(),
        Some("lambda,sigma_R_mean,sigma_L_mean,sigma_R_std")
    );
    assert_eq!(curves.lines().count(), 122);

    let again = TempDir::new().unwrap();
    let o = bandedge(&[&args[..], &["--threads", "3"]].concat(), again.path());
    assert!(o.status.success());
    assert_eq!(extremes, read(again.path(), "extremes.csv"));
    assert_eq!(curves, read(again.path(), "curves.csv"));
}

#[test]
fn oracle_double_check() {
    let dir = TempDir::new().unwrap();
    let o = bandedge(
        &[
            "oracle",
            "--n-sites",
            "7",
            "--w",
            "2",
            "--beta",
            "1",
            "--lengths",
            "4",
            "--check-exhaustive",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&read(dir.path(), "oracle.json")).unwrap();
    assert_eq!(report["exhaustive"]["agrees"], true);
    assert_eq!(report["joint_moment"], report["exhaustive"]["joint_moment"]);
    assert_eq!(report["exhaustive"]["matrices"], 1 << 14);
    assert_eq!(report["lengths"], serde_json::json!([4]));
    assert!(report["diagram_census"].is_array());
}

#[test]
fn oracle_exhaustive_check_needs_signs() {
    let dir = TempDir::new().unwrap();
    let o = bandedge(
        &[
            "oracle",
            "--n-sites",
            "7",
            "--w",
            "2",
            "--beta",
            "2",
            "--lengths",
            "4",
            "--check-exhaustive",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["field"], "check-exhaustive");
}

#[test]
fn walk_columns_agree() {
    let dir = TempDir::new().unwrap();
    let o = bandedge(
        &["walk", "--n-sites", "64", "--w", "4", "--lengths", "1..3,32"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(dir.path(), "walk.csv");
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,R,count_exact,count_fourier,gaussian,uniform,upper_bound")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4 * 64);
    for n in [1.0, 2.0, 3.0, 32.0] {
        let total: f64 = rows.iter().filter(|r| r[0] == n).map(|r| r[2]).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    for r in &rows {
        assert!((r[2] - r[3]).abs() <= 1e-12 * r[2].max(1e-3), "{r:?}");
    }
    // One step reaches each of the 8 neighbours with probability 1/8.
    assert_eq!(rows[1][2], 0.125);
}

#[test]
fn walk_budget_exit_code() {
    let dir = TempDir::new().unwrap();
    let o = bandedge(
        &[
            "walk",
            "--n-sites",
            "1000",
            "--w",
            "4",
            "--lengths",
            "100",
            "--dp-budget",
            "1000",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"]["kind"], "budget");
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn moments_exact_vs_hutchinson() {
    let dir = TempDir::new().unwrap();
    let base = [
        "moments",
        "--n-sites",
        "40",
        "--w",
        "3",
        "--max-length",
        "4",
        "--seed",
        "5",
    ];
    let o = bandedge(&base, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let exact = read(dir.path(), "moments.csv");
    assert_eq!(
        exact.lines().next(),
        Some("n,trace_mean,trace_std_error,method,replicates")
    );
    let exact: Vec<Vec<String>> = exact
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(exact.len(), 4);
    assert_eq!(exact[0][3], "exact");
    // tr H^(2) = tr H² − 2W·N = 0 for any sign matrix.
    assert_eq!(exact[1][1].parse::<f64>().unwrap(), 0.0);

    let o = bandedge(
        &[&base[..], &["--method", "hutchinson", "--probes", "400"]].concat(),
        dir.path(),
    );
    assert!(o.status.success());
    let hutch = read(dir.path(), "moments.csv");
    for (e, h) in exact.iter().zip(hutch.lines().skip(1)) {
        let h: Vec<&str> = h.split(',').collect();
        assert_eq!(h[3], "hutchinson");
        let (x, y, se): (f64, f64, f64) = (e[1].parse().unwrap(), h[1].parse().unwrap(), h[2].parse().unwrap());
        assert!((x - y).abs() <= 5.0 * se + 1e-9, "exact {x}, estimate {y} ± {se}");
    }
}

#[test]
fn norm_table() {
    let dir = TempDir::new().unwrap();
    let o = bandedge(
        &["norm", "--n-sites", "64", "--ws", "1,4", "--replicates", "3"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(dir.path(), "norm.csv");
    assert_eq!(text.lines().next(), Some("w,replicate,alpha_max,alpha_min,norm_ratio"));
    assert_eq!(text.lines().count(), 7);
    for line in text.lines().skip(1).filter(|l| l.starts_with("1,")) {
        // The W = 1 matrix has norm at most 2, i.e. at most 1/√2 after scaling.
        let ratio: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(ratio <= 0.5f64.sqrt() + 1e-12);
    }
}

#[test]
fn validate_sampled_and_broken_matrices() {
    let dir = TempDir::new().unwrap();
    let o = bandedge(
        &["validate", "--n-sites", "9", "--w", "2", "--beta", "2", "--seed", "3"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&read(dir.path(), "validate.json")).unwrap();
    assert_eq!(report["valid"], true);
    assert_eq!(report["entries"], 18);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "u,v,re,im\n0,1,1,0\n0,4,1,0\n").unwrap();
    let o = bandedge(
        &[
            "validate",
            "--n-sites",
            "9",
            "--w",
            "2",
            "--matrix",
            bad.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_str(&read(dir.path(), "validate.json")).unwrap();
    assert_eq!(report["valid"], false);
    assert_eq!(report["violations"].as_array().unwrap().len(), 1);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# norm sweep\nn_sites = 32\nws = 2\nreplicates = 2\nseed = 1\n").unwrap();
    let o = bandedge(&["norm", "--config", cfg.to_str().unwrap(), "--seed", "9"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["master_seed"], 9);
    assert_eq!(manifest["config"]["n-sites"], "32");

    fs::write(&cfg, "n_sites = 32\nws = two\n").unwrap();
    let o = bandedge(
        &["norm", "--config", cfg.to_str().unwrap(), "--replicates", "2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let err = error_json(&o);
    assert_eq!(err["error"]["line"], 2);
    assert_eq!(err["error"]["field"], "ws");

    fs::write(&cfg, "n_sites = 32\nwidth = 2\n").unwrap();
    let o = bandedge(&["norm", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["field"], "width");
}

#[test]
fn bad_flags_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let o = bandedge(
        &["edge", "--n-sites", "10", "--w", "9", "--replicates", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["field"], "w");

    let o = bandedge(&["edge", "--no-such-flag"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "config");
}

#[test]
fn threads_from_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_bandedge"))
        .args(["norm", "--n-sites", "16", "--ws", "2", "--replicates", "2", "--out"])
        .arg(dir.path())
        .env("BANDEDGE_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["threads"], 2);

    let o = Command::new(env!("CARGO_BIN_EXE_bandedge"))
        .args(["norm", "--n-sites", "16", "--ws", "2", "--replicates", "2", "--out"])
        .arg(dir.path())
        .env("BANDEDGE_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
