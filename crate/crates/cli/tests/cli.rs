use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use exb_barrier::diagnostics::ContourGrid;

fn exbctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exbctl"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn exbctl")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_grid(path: &Path) -> ContourGrid {
    ContourGrid::read_from(BufReader::new(fs::File::open(path).unwrap())).unwrap()
}

#[test]
fn validate_passes_on_defaults_and_skips_norm_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = exbctl(&["-o", dir.path().to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report = stdout(&out);
    assert!(!report.contains("FAIL"), "{report}");
    assert!(report
        .lines()
        .any(|l| l.starts_with("SKIP norm bound at configured amplitude")));
    assert!(report.lines().filter(|l| l.starts_with("PASS")).count() >= 8);
    let saved = fs::read_to_string(dir.path().join("validate.txt")).unwrap();
    assert!(saved.starts_with("# exbctl validate"));
}

#[test]
fn validate_below_threshold_runs_norm_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = exbctl(&["-o", dir.path().to_str().unwrap(), "--epsilon", "0.005", "validate"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out)
        .lines()
        .any(|l| l.starts_with("PASS norm bound at configured amplitude")));
}

#[test]
fn broken_control_fails_barrier_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = exbctl(&[
        "-o",
        dir.path().to_str().unwrap(),
        "--control-scale",
        "0.99",
        "validate",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let report = stdout(&out);
    let line = report.lines().find(|l| l.contains("barrier invariance")).unwrap();
    assert!(line.starts_with("FAIL"), "{line}");
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    assert_eq!(
        exbctl(&["-o", o, "--epsilon", "-0.5", "validate"]).status.code(),
        Some(2)
    );
    let cfg = write_config(dir.path(), "[ensemble]\nn_traj = 0\n");
    assert_eq!(exbctl(&["-o", o, "-c", &cfg, "portrait"]).status.code(), Some(2));
    assert_eq!(
        exbctl(&["-c", "/nonexistent/run.toml", "validate"]).status.code(),
        Some(2)
    );
}

#[test]
fn unwritable_output_fails_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub");
    let started = std::time::Instant::now();
    // Full-size defaults: only an early failure returns quickly.
    let out = exbctl(&["-o", target.to_str().unwrap(), "portrait"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(started.elapsed().as_secs() < 10);
}

#[test]
fn contour_writes_grids_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[diagnostics]\ncontour_nodes = 64\n");
    let o = dir.path().to_str().unwrap();
    let out = exbctl(&["-o", o, "-c", &cfg, "--epsilon", "0.6", "contour"]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["contour_potentials.png", "contour_control.png", "contour.config.toml"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let v = read_grid(&dir.path().join("contour_v.grid"));
    let vt = read_grid(&dir.path().join("contour_v_tilde.grid"));
    let f = read_grid(&dir.path().join("contour_f.grid"));
    let ftr = read_grid(&dir.path().join("contour_f_tr.grid"));
    assert_eq!((v.nx, v.ny), (64, 64));
    assert!((v.t - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    let v_max = v.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let sup = v
        .values
        .iter()
        .zip(&vt.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(sup / v_max <= 0.5, "relative difference {}", sup / v_max);
    for ((a, b), c) in v.values.iter().zip(&vt.values).zip(&f.values) {
        assert!((b - a - c).abs() < 1e-12);
    }
    assert!(ftr.values.iter().any(|x| *x != 0.0));
    let header = fs::read_to_string(dir.path().join("contour_v.grid")).unwrap();
    assert!(header.contains("# epsilon = 0.6"));
}

#[test]
fn portrait_writes_both_ensembles() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let out = exbctl(&["-o", o, "--n-traj", "4", "--t-final", "40", "portrait"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "portrait.png",
        "portrait_none.csv",
        "portrait_exact.csv",
        "portrait_none.json",
        "portrait_exact.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let csv = fs::read_to_string(dir.path().join("portrait_exact.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "traj_id,k,x,y"));
    assert!(csv.contains("# seed = 1"));
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    // Samples at k = 0..=6 for each trajectory.
    assert_eq!(rows, 4 * 7);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("portrait_exact.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "exact");
    assert_eq!(report["n_escaped"], 0);
}

#[test]
fn portrait_at_zero_amplitude_is_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let out = exbctl(&[
        "-o",
        o,
        "--epsilon",
        "0",
        "--n-traj",
        "3",
        "--t-final",
        "20",
        "--no-plots",
        "portrait",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!dir.path().join("portrait.png").exists());
    let csv = fs::read_to_string(dir.path().join("portrait_none.csv")).unwrap();
    let mut first: std::collections::HashMap<String, (String, String)> = Default::default();
    for line in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let e = first
            .entry(f[0].to_string())
            .or_insert((f[2].to_string(), f[3].to_string()));
        assert_eq!((e.0.as_str(), e.1.as_str()), (f[2], f[3]));
    }
}

#[test]
fn truncated_portrait_at_low_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let out = exbctl(&[
        "-o",
        o,
        "--mode",
        "truncated",
        "--epsilon",
        "0.3",
        "--n-traj",
        "3",
        "--t-final",
        "30",
        "portrait",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("portrait_truncated.csv").exists());
    assert!(dir.path().join("portrait.png").exists());
}

#[test]
fn energy_tables_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[diagnostics]\nresolution = 16\neps_sweep = [0.3]\nseeds = [1, 2]\n",
    );
    let o = dir.path().join("out");
    let run = || {
        let out = exbctl(&["-o", o.to_str().unwrap(), "-c", &cfg, "tables", "--energy-only"]);
        assert_eq!(out.status.code(), Some(0));
        ["table1_seed1.csv", "table1_seed2.csv", "table1_mean.csv"].map(|n| fs::read(o.join(n)).unwrap())
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    for bytes in &first {
        let text = String::from_utf8_lossy(bytes);
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 2, "header plus one row");
    }
    let a = o;
    assert!(!a.join("table2_seed1.csv").exists());
}

#[test]
fn escape_and_comparison_tables_join() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[ensemble]\nn_traj = 3\nt_final = 40.0\n[diagnostics]\nresolution = 16\neps_sweep = [0.5]\nescape_eps = [0.5]\nseeds = [1]\n",
    );
    let o = dir.path().to_str().unwrap();
    let out = exbctl(&["-o", o, "-c", &cfg, "tables"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let row = |name: &str| -> Vec<f64> {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        let line = text.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap().to_string();
        line.split(',').map(|c| c.parse().unwrap()).collect()
    };
    let energy = row("table1_seed1.csv");
    let joined = row("table3_seed1.csv");
    let escape = row("table2_seed1.csv");
    assert_eq!(escape[0], 0.5);
    assert_eq!(joined.len(), 3);
    assert_eq!(joined[1], escape[1] - escape[3]);
    let (eta_ex, eta_tr) = (energy[3], energy[4]);
    assert!((joined[2] - (eta_ex - eta_tr)).abs() < 1e-12);
    assert!(dir.path().join("table2_mean.csv").exists());
    assert!(dir.path().join("table3_mean.csv").exists());
}
