use std::path::Path;
use std::process::{Command, Output};

use qbm_core::bath::BathSpec;
use qbm_core::dump::{DumpKind, DumpReader};
use qbm_core::noise::NoiseStatistics;
use qbm_core::reference::stationary_p2;

fn qbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbm"))
        .args(args)
        .env_remove("QBM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

// Thermal free particle, equilibrated long enough for <p^2> to settle.
fn small_config(gamma: f64, kt: f64, n_traj: usize) -> String {
    format!(
        r#"[bath]
gamma = {gamma:?}
eps = 0.5
kt = {kt:?}

[schedule]
t_end = 1.0
dt = 0.025
t_eq = 15.0
record_stride = 8

[[observable]]
name = "p2"
symbol = {{ form = "p2" }}

[run]
n_traj = {n_traj}
seed = 11

[noise_check]
n_paths = 2000
n_lags = 8
max_lag = 1.0
n_times = 128
"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_series(path: &Path) -> Vec<(f64, f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,estimate,standard_error,effective_n"));
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect()
}

#[test]
fn presets_list_and_show() {
    let o = qbm(&["presets", "list"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    for name in ["fig1", "fig2", "fig2-white", "fig3", "fig3-classical"] {
        assert!(out.lines().any(|l| l.starts_with(name)), "{out}");
    }
    let o = qbm(&["presets", "show", "fig1"]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("sigma_analytical"));
    assert_eq!(qbm(&["presets", "show", "nope"]).status.code(), Some(1));
}

#[test]
fn zero_trajectories_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &small_config(1.0, 1.0, 10));
    let o = qbm(&["run", &cfg, "--n-traj", "0", "-q", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("n_traj"), "{}", stderr(&o));
}

#[test]
fn missing_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config(1.0, 1.0, 10).replace("gamma = 1.0\n", "");
    let cfg = write(dir.path(), "c.toml", &text);
    let o = qbm(&["run", &cfg, "-q"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma"), "{}", stderr(&o));
}

#[test]
fn missing_file_is_an_io_error() {
    let o = qbm(&["run", "/nonexistent/cfg.toml", "-q"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn noise_check_without_friction_warns_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &small_config(0.0, 1.0, 10));
    let o = qbm(&["noise-check", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
}

#[test]
fn noise_check_detects_wrong_temperature() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let good = write(dir.path(), "good.toml", &small_config(1.0, 1.0, 10));
    let o = qbm(&["noise-check", &good, "--out-dir", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("noise_check.csv").exists());
    assert!(dir.path().join("noise_check.json").exists());

    let text = small_config(1.0, 1.0, 10) + "target_kt = 3.0\n";
    let bad = write(dir.path(), "bad.toml", &text);
    let o = qbm(&["noise-check", &bad, "--out-dir", out]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("FAIL"));
}

#[test]
fn run_writes_outputs_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(dir.path(), "c.toml", &small_config(1.0, 1.0, 40));
    let o = qbm(&[
        "run",
        &cfg,
        "-q",
        "--out-dir",
        out.to_str().unwrap(),
        "--dump-noise",
        "--dump-trajectories",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["p2.csv", "manifest.json", "noise.bin", "trajectories.bin"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 11);
    assert_eq!(manifest["n_traj"], 40);

    let series = read_series(&out.join("p2.csv"));
    let trajs = DumpReader::open(out.join("trajectories.bin")).unwrap();
    assert_eq!(trajs.header.kind, DumpKind::Trajectory);
    assert_eq!(trajs.header.n_times, series.len());
    let n = trajs.header.n_times;
    let recs = trajs.read_all().unwrap();
    assert_eq!(recs.len(), 40);
    // Recompute the last estimate from the dumped p and weights.
    let k = n - 1;
    let (num, den) = recs.iter().fold((0.0, 0.0), |(a, b), (_, r)| {
        let (p, w) = (r[n + k], r[2 * n + k]);
        (a + w * p * p, b + w)
    });
    let rel = (num / den - series[k].1).abs() / series[k].1;
    assert!(rel < 1e-12, "{rel}");

    let noise = DumpReader::open(out.join("noise.bin")).unwrap();
    assert_eq!(noise.header.kind, DumpKind::Noise);
    assert_eq!(noise.read_all().unwrap().len(), 40);
}

#[test]
fn equilibrated_momentum_matches_stationary_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &small_config(1.0, 1.0, 4000));
    let o = qbm(&["run", &cfg, "-q", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let spec = BathSpec::ohmic(1.0, 0.5, 1.0, 1.0, 1.0).unwrap();
    let target = stationary_p2(&spec, NoiseStatistics::Quantum).unwrap();
    for (t, est, se) in read_series(&dir.path().join("p2.csv")) {
        let z = (est - target) / se;
        assert!(z.abs() < 4.5, "t = {t}: {est} +- {se} vs {target}");
    }
}

#[test]
fn seed_fixes_output_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &small_config(1.0, 1.0, 30));
    let run = |sub: &str, workers: &str| {
        let out = dir.path().join(sub);
        let o = qbm(&["run", &cfg, "-q", "--workers", workers, "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("p2.csv")).unwrap()
    };
    assert_eq!(run("a", "1"), run("b", "4"));
}
