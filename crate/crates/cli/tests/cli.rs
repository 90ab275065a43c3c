use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lwa-orient"))
}

fn run(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = bin();
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("spawn lwa-orient")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn manifest(dir: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{command}_manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn radiation_defaults_span_the_scan_range() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["radiation"], None, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("radiation_summary.csv"));
    assert_eq!(header[2], "theta0_deg");
    assert_eq!(rows.len(), 11);
    let first: f64 = rows[0][2].parse().unwrap();
    let last: f64 = rows[10][2].parse().unwrap();
    assert!((first + 47.5).abs() < 0.1, "{first}");
    assert!((last - 54.9).abs() < 0.1, "{last}");
    let m = manifest(tmp.path(), "radiation");
    assert_eq!(m["complete"], Value::Bool(true));
}

#[test]
fn single_subcarrier_gives_one_gain_column() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "one.toml", "[signal]\nsubcarriers = 1\n");
    let out = run(&["radiation"], Some(&cfg), tmp.path());
    assert!(out.status.success());
    let (header, _) = read_csv(&tmp.path().join("radiation.csv"));
    assert_eq!(header, ["theta_deg", "abs_r_1", "arg_r_1"]);
}

#[test]
fn infeasible_grating_period_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[antenna]\ngrating_period_mm = 3\n");
    let out = run(&["radiation"], Some(&cfg), tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("grating period") && err.contains("<= d'"), "{err}");
    assert_eq!(manifest(tmp.path(), "radiation")["complete"], Value::Bool(false));
}

#[test]
fn missing_config_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere.toml");
    let out = run(&["radiation"], Some(&missing), tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.toml"));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "typo.toml", "[scene]\nsigma = 3\n");
    let out = run(&["radiation"], Some(&cfg), tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
}

#[test]
fn heatmap_smoke_grid_has_25_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "small.toml",
        "[run]\ntrials = 1\n[estimators]\nselect = [\"pmle\", \"rpa\"]\ngrid_size = 100\n",
    );
    let out = run(&["sweep", "heatmap", "--grid", "5"], Some(&cfg), tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("sweep_heatmap.csv"));
    assert_eq!(rows.len(), 25);
    assert!(header.contains(&"rpa_deg".to_string()));
    let m = manifest(tmp.path(), "sweep_heatmap");
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn unknown_sweep_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["sweep", "banana"], None, tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("banana"));
}

#[test]
fn loglik_rejects_empty_and_rpa_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "empty.toml", "[loglik]\nestimators = []\n");
    let out = run(&["loglik"], Some(&cfg), tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));

    let out = run(&["loglik", "--estimators", "rpa"], None, tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

fn loglik_peaks(tmp: &Path, subcarriers: usize) -> (f64, u64) {
    let cfg = write_config(
        tmp,
        &format!("ideal{subcarriers}.toml"),
        &format!("[signal]\nsubcarriers = {subcarriers}\nnoise = false\n[scene]\nsigma_cm = 0\nphi_deg = 45\n"),
    );
    let out_dir = tmp.join(format!("f{subcarriers}"));
    let out = run(&["loglik", "--estimators", "pmle"], Some(&cfg), &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&out_dir, "loglik");
    (
        m["summary"]["pmle"]["error_deg"].as_f64().unwrap(),
        m["summary"]["pmle"]["peaks_above_90pct"].as_u64().unwrap(),
    )
}

#[test]
fn loglik_ideal_curve_peaks_at_truth_and_sharpens_with_subcarriers() {
    let tmp = tempfile::tempdir().unwrap();
    let (err16, peaks16) = loglik_peaks(tmp.path(), 16);
    let (_, peaks6) = loglik_peaks(tmp.path(), 6);
    assert!(err16 <= 0.18, "{err16}");
    assert!(peaks6 > peaks16, "F=6 {peaks6} peaks, F=16 {peaks16}");
    let (header, rows) = read_csv(&tmp.path().join("f16").join("loglik.csv"));
    assert_eq!(header, ["phi_deg", "pmle_norm"]);
    let max = rows
        .iter()
        .map(|r| r[1].parse::<f64>().unwrap())
        .fold(f64::MIN, f64::max);
    assert_eq!(max, 1.0);
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sigma.toml",
        "[run]\ntrials = 3\n[estimators]\nselect = [\"amle\", \"rpa\"]\ngrid_size = 200\n[sweep.sigma]\nvalues_cm = [0, 10]\nsubcarriers = [4, 8]\n",
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = run(&["sweep", "sigma", "--seed", "11"], Some(&cfg), dir);
        assert!(out.status.success());
    }
    let read = |d: &Path| std::fs::read(d.join("sweep_sigma.csv")).unwrap();
    assert_eq!(read(&a), read(&b));

    let c = tmp.path().join("c");
    assert!(run(&["sweep", "sigma", "--seed", "12"], Some(&cfg), &c)
        .status
        .success());
    assert_ne!(read(&a), read(&c));
}

#[test]
fn selftest_writes_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["selftest", "--draws", "20000"], None, tmp.path());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("selftest.json")).unwrap()).unwrap();
    let checks = report.as_array().unwrap();
    assert_eq!(checks.len(), 6);
    let all = checks.iter().all(|c| c["passed"] == Value::Bool(true));
    assert_eq!(out.status.success(), all);
}
