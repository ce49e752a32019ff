use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_superatom"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("superatom-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn theory_writes_the_requested_grid() {
    let dir = scratch("theory");
    ok(&["theory", "--n", "400", "--tmax-tau", "20", "--points", "101", "--out", dir.to_str().unwrap()]);
    let header = fs::read_to_string(dir.join("theory.csv")).unwrap();
    assert_eq!(header.lines().next(), Some("s,chi,chi_sq,p_analytic"));
    let r = rows(&dir.join("theory.csv"));
    assert_eq!(r.len(), 101);
    assert_eq!(r[0], vec![0.0, 1.0, 1.0, 1.0]);
    assert!((r[100][0] - 20.0).abs() < 1e-12);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "theory");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn ensemble_output_is_reproducible() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    let common = ["ensemble", "--n", "40", "--realizations", "12", "--tmax-tau", "4pi", "--points", "50", "--seed", "9"];
    ok(&[&common[..], &["--out", a.to_str().unwrap()]].concat());
    ok(&[&["--threads", "2"][..], &common[..], &["--out", b.to_str().unwrap()]].concat());
    let ca = fs::read(a.join("curve.csv")).unwrap();
    assert_eq!(ca, fs::read(b.join("curve.csv")).unwrap());
    let r = rows(&a.join("curve.csv"));
    assert_eq!(r.len(), 50);
    assert_eq!(r[0][2], 1.0);
    for d in [a, b] {
        fs::remove_dir_all(d).unwrap();
    }
}

#[test]
fn config_file_and_flag_override() {
    let dir = scratch("config");
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "profile.kind = uniform_box\nprofile.size_k = 60\nmean_n = 30\nrealizations = 5\ntime.points = 20\n").unwrap();
    let out = dir.join("out");
    ok(&["ensemble", "--config", cfg.to_str().unwrap(), "--points", "30", "--out", out.to_str().unwrap()]);
    assert_eq!(rows(&out.join("curve.csv")).len(), 30);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_config_key_fails_without_output() {
    let dir = scratch("badkey");
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "mean_n = 30\nprofile.colour = red\n").unwrap();
    let out = dir.join("out");
    let o = run(&["ensemble", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("profile.colour"));
    assert!(!out.join("curve.csv").exists());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = scratch("usage");
    let d = dir.to_str().unwrap();
    for args in [
        vec!["stats", "--sweep", "h", "--sweep-values", "", "--out", d],
        vec!["--threads", "0", "theory", "--out", d],
        vec!["ensemble", "--realizations", "0", "--out", d],
        vec!["ensemble", "--which", "Hx", "--out", d],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!dir.exists());
}

#[test]
fn rates_for_a_single_atom() {
    let dir = scratch("rates");
    ok(&["rates", "--n", "1", "--realizations", "3", "--out", dir.to_str().unwrap()]);
    let r = rows(&dir.join("rates.csv"));
    assert_eq!(r.len(), 3);
    for row in &r {
        assert_eq!(row[1], 1.0);
        assert!((row[2] - 1.0).abs() < 1e-12 && (row[3] - 1.0).abs() < 1e-12, "{row:?}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("rates_summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn stats_writes_histogram_and_ks() {
    let dir = scratch("stats");
    ok(&["stats", "--n", "50", "--realizations", "300", "--bins", "20", "--out", dir.to_str().unwrap()]);
    for f in ["w_samples.csv", "w_histogram.csv", "ks.json", "manifest.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let ks: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("ks.json")).unwrap()).unwrap();
    assert_eq!(ks["ks"]["n"], 300);
    assert_eq!(ks["samples"], 300);
    fs::remove_dir_all(&dir).unwrap();
}
