//! CLI plumbing: exit codes, schema rejection, file outputs, reproducibility.

use std::process::Command;

fn riesz() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riesz"))
}

fn run_in(dir: &std::path::Path, args: &[&str]) -> (i32, String, String) {
    let out = riesz()
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let out = riesz().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "stderr: {err}");
}

#[test]
fn alpha_out_of_range_exits_2_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run_in(
        dir.path(),
        &["capacity", "--region", "ball", "--n", "3", "--alpha", "2.5", "--points", "100"],
    );
    assert_eq!(code, 2, "stderr: {err}");
    assert!(err.contains("alpha"));
    // Nothing was computed or written.
    assert!(!dir.path().join("capacity_report.json").exists());
}

#[test]
fn config_file_with_bad_radii_ordering_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{
  "schemaVersion": 1,
  "params": {"n": 3, "alpha": 2.0},
  "region": {"kind": "annulus_clip",
             "inner": {"kind": "ball", "center": {"coords": [0,0,0]}, "radius": 1.0},
             "center": {"coords": [0,0,0]}, "r_lo": 4.0, "r_hi": 2.0}
}"#,
    )
    .unwrap();
    let (code, _, err) = run_in(
        dir.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "capacity",
            "--points",
            "100",
        ],
    );
    assert_eq!(code, 2, "stderr: {err}");
    assert!(err.contains("r_lo") || err.contains("invalid config"));
}

#[test]
fn config_file_with_unknown_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"schemaVersion": 1, "params": {"n": 3, "alpha": 2.0}, "surprise": true}"#,
    )
    .unwrap();
    let (code, _, _) = run_in(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "capacity", "--points", "100"],
    );
    assert_eq!(code, 2);
}

#[test]
fn wrong_schema_version_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("v2.json");
    std::fs::write(&cfg, r#"{"schemaVersion": 2, "params": {"n": 3, "alpha": 2.0}}"#).unwrap();
    let (code, _, err) = run_in(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "capacity", "--points", "100"],
    );
    assert_eq!(code, 2);
    assert!(err.contains("schemaVersion"));
}

#[test]
fn capacity_writes_report_and_prints_value() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run_in(
        dir.path(),
        &[
            "capacity", "--region", "ball", "--radius", "1", "--n", "3", "--alpha", "2",
            "--points", "400",
        ],
    );
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("capacity = 1.0"), "stdout: {out}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("capacity_report.json")).unwrap())
            .unwrap();
    let cap = report["capacity"].as_f64().unwrap();
    assert!((cap - 1.0).abs() < 0.05);
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{
  "schemaVersion": 1,
  "params": {"n": 3, "alpha": 2.0},
  "region": {"kind": "ball", "center": {"coords": [0,0,0]}, "radius": 2.0},
  "resolution": 500,
  "seed": 7
}"#,
    )
    .unwrap();
    let (code, out, err) = run_in(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "capacity"],
    );
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("capacity = 2.0"), "stdout: {out}");
}

#[test]
fn identical_seed_gives_byte_identical_outputs() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let args = [
        "equilibrium", "--region", "ball", "--radius", "1", "--n", "3", "--alpha", "2",
        "--points", "300", "--seed", "11",
    ];
    let (c1, _, _) = run_in(d1.path(), &args);
    let (c2, _, _) = run_in(d2.path(), &args);
    assert_eq!((c1, c2), (0, 0));
    for f in ["equilibrium_report.json", "equilibrium_measure.csv"] {
        let a = std::fs::read(d1.path().join(f)).unwrap();
        let b = std::fs::read(d2.path().join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn sweep_kelvin_pom_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    // Sweep a Dirac onto the ball; the swept measure lands in a CSV.
    let (code, out, err) = run_in(
        dir.path(),
        &[
            "sweep", "--region", "ball", "--radius", "1", "--source", "2,0,0", "--n", "3",
            "--alpha", "2", "--points", "500",
        ],
    );
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("swept mass = 0.5"), "stdout: {out}");
    let swept_csv = dir.path().join("swept_measure.csv");
    assert!(swept_csv.exists());

    // Kelvin-transform the swept measure.
    let (code, out, _) = run_in(
        dir.path(),
        &[
            "kelvin", "--measure", swept_csv.to_str().unwrap(), "--center", "0,0,0", "--n",
            "3", "--alpha", "2",
        ],
    );
    assert_eq!(code, 0);
    assert!(out.contains("transformed"));
    assert!(dir.path().join("kelvin_measure.csv").exists());

    // Source measure file for pom: mu = the source Dirac, nu = something
    // bigger; probes on a far shell.
    let mu_csv = dir.path().join("mu.csv");
    std::fs::write(
        &mu_csv,
        "x1,x2,x3,delta,weight\n2.0,0.0,0.0,1.0e-2,1.0\n",
    )
    .unwrap();
    let nu_csv = dir.path().join("nu.csv");
    std::fs::write(
        &nu_csv,
        "x1,x2,x3,delta,weight\n2.0,0.0,0.0,1.0e-2,2.0\n",
    )
    .unwrap();
    let probes_csv = dir.path().join("probes.csv");
    let mut probes = String::from("x1,x2,x3,delta\n");
    for k in 0..24 {
        let a = std::f64::consts::TAU * k as f64 / 24.0;
        probes.push_str(&format!("{:.17e},{:.17e},0.0,1.0e-2\n", 5.0 * a.cos(), 5.0 * a.sin()));
    }
    std::fs::write(&probes_csv, probes).unwrap();
    let (code, out, err) = run_in(
        dir.path(),
        &[
            "pom", "--mu", mu_csv.to_str().unwrap(), "--nu", nu_csv.to_str().unwrap(),
            "--probes", probes_csv.to_str().unwrap(), "--n", "3", "--alpha", "2",
        ],
    );
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("pointwiseHolds = true"), "stdout: {out}");
    assert!(out.contains("massInequalityHolds = true"));
}

#[test]
fn wiener_cli_prints_the_thin_classification() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run_in(
        dir.path(),
        &["wiener", "--body", "f2", "--s", "1", "--q", "2", "--jmax", "5", "--points", "300"],
    );
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("convergent (thin)"), "stdout: {out}");
    assert!(dir.path().join("wiener_series.csv").exists());
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("wiener_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["classification"], "convergent");
}

#[test]
fn experiment_exit_codes_follow_the_conclusion() {
    let dir = tempfile::tempdir().unwrap();
    // A fast preset that passes.
    let (code, out, err) = run_in(
        dir.path(),
        &["experiment", "kelvin-identities", "--seed", "5"],
    );
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("pass") || out.contains("Pass"), "stdout: {out}");
    assert!(dir.path().join("experiment_kelvin-identities.json").exists());
    assert!(dir
        .path()
        .join("experiment_kelvin-identities_summary.csv")
        .exists());

    // Unknown experiment name: configuration error.
    let (code, _, _) = run_in(dir.path(), &["experiment", "astrology"]);
    assert_eq!(code, 2);
}

#[test]
fn wos_oracle_estimates_the_grounded_sphere_charge() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run_in(
        dir.path(),
        &[
            "oracle", "wos", "--target", "ball", "--radius", "1", "--mode", "hitprob",
            "--source", "2,0,0", "--walks", "30000", "--seed", "3",
        ],
    );
    assert_eq!(code, 0, "stderr: {err}");
    let value: f64 = out
        .split_whitespace()
        .nth(2)
        .and_then(|v| v.parse().ok())
        .expect("parse estimate");
    assert!((value - 0.5).abs() < 0.02, "estimate {value}");
    assert!(dir.path().join("wos_report.json").exists());

    // Capacity mode on the same target.
    let (code, out, _) = run_in(
        dir.path(),
        &[
            "oracle", "wos", "--target", "ball", "--radius", "1", "--mode", "capacity",
            "--walks", "30000", "--seed", "4",
        ],
    );
    assert_eq!(code, 0);
    let value: f64 = out.split_whitespace().nth(2).and_then(|v| v.parse().ok()).unwrap();
    assert!((value - 1.0).abs() < 0.04, "estimate {value}");
}

#[test]
fn compute_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // A gram-cache path inside a nonexistent directory: the computation
    // itself starts (config is valid) but the cache write fails.
    let bad = dir.path().join("no_such_dir").join("cache.bin");
    let (code, _, err) = run_in(
        dir.path(),
        &[
            "capacity", "--region", "ball", "--n", "3", "--alpha", "2", "--points", "64",
            "--gram-cache", bad.to_str().unwrap(),
        ],
    );
    assert_eq!(code, 1, "stderr: {err}");
}
