use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn zeno(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeno"))
        .args(args)
        .env("ZENO_OUTPUT_DIR", dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find(|l| l.starts_with(key))
        .and_then(|l| l.split_whitespace().last())
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
}

#[test]
fn rates_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = zeno(&["rates", "3.14159"], dir.path());
    assert!(o.status.success());
    let t = stdout(&o);
    assert!((value(&t, "gamma_A ") - 0.5).abs() < 1e-4);
    assert!((value(&t, "gamma_Pi*") - 1.0).abs() < 1e-4);
    assert!((value(&t, "gamma_Pi ") - 1.5).abs() < 1e-4);

    let t = stdout(&zeno(&["rates", "0"], dir.path()));
    for k in ["gamma_A ", "gamma_Pi*", "gamma_Pi "] {
        assert_eq!(value(&t, k), 0.0);
    }
    let t = stdout(&zeno(&["rates", "2", "--pi"], dir.path()));
    assert!(value(&t, "gamma_A ").abs() < 1e-12);
    assert_eq!(value(&t, "gamma_Pi*"), 2.0);
    assert_eq!(value(&t, "gamma_Pi "), 4.0);
}

#[test]
fn defaults_are_a_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = zeno(&["defaults"], dir.path());
    assert!(o.status.success());
    let cfg = dir.path().join("defaults.toml");
    fs::write(&cfg, o.stdout).unwrap();
    let o = zeno(&["--config", cfg.to_str().unwrap(), "rates", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_configs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let o = zeno(&["--config", "/definitely/missing.toml", "simulate"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.toml"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[protocol]\nphi = 1.0\n").unwrap();
    let o = zeno(&["--config", cfg.to_str().unwrap(), "simulate"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn uncoupled_simulation_has_no_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let o = zeno(&["simulate", "--beta", "0.25", "--phi2-pi", "0", "--sub-samples", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = stdout(&o);
    assert!(value(&t, "final S_L").abs() < 1e-9);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("time,p0,p1,p2,p3,s_l,p_escape"));
}

#[test]
fn simulation_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--beta", "0.2", "--phi2-pi", "2", "--phi1-pi", "0.25", "--n-max", "40"];
    assert!(zeno(&args, a.path()).status.success());
    assert!(zeno(&args, b.path()).status.success());
    let x = fs::read(a.path().join("trajectory.csv")).unwrap();
    let y = fs::read(b.path().join("trajectory.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn lindblad_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let o = zeno(&["simulate", "--engine", "lindblad", "--beta", "0.2", "--phi2-pi", "1", "--n-max", "40"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(value(&stdout(&o), "final S_L") > 0.0);
}

fn small_sweep_config(dir: &Path) -> String {
    let cfg = dir.join("sweep.toml");
    fs::write(
        &cfg,
        "jobs = 2\n[sweep]\nbeta_grid = [0.2, 0.25]\nphi2_grid_pi = [0.0, 2.0]\nsub_samples = 2\n",
    )
    .unwrap();
    cfg.to_str().unwrap().to_string()
}

#[test]
fn sweep_writes_csv_manifest_and_script() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sweep_config(dir.path());
    let o = zeno(&["--config", &cfg, "sweep"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 4);
    let manifest = fs::read_to_string(dir.path().join("sweep_manifest.toml")).unwrap();
    assert!(manifest.contains("beta_grid"));
    assert!(fs::read_to_string(dir.path().join("plot_sweep.py")).unwrap().contains("matplotlib"));

    // flags override config keys, and the output is the same for any worker count
    let other = tempfile::tempdir().unwrap();
    let o = zeno(&["--config", &cfg, "--jobs", "1", "sweep"], other.path());
    assert!(o.status.success());
    assert_eq!(csv, fs::read_to_string(other.path().join("sweep.csv")).unwrap());
}

#[test]
fn compare_reports_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sweep_config(dir.path());
    let o = zeno(&["--config", &cfg, "compare"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("corr(|dS_L|, phi2*beta)"));
    assert!(dir.path().join("sweep_compare.csv").exists());
}

#[test]
fn bloch_scan_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["scan-bloch", "--beta", "0.25", "--phi2-pi", "2", "--sub-samples", "3", "--theta-points", "3", "--phi-points", "4"];
    let o = zeno(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("bloch_scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 12);
    assert!(stdout(&o).contains("max N_BLP"));
}
