use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ghb_core::inference::{synthetic_counts, JointDistribution};
use ghb_core::io::{write_joint_distributions, write_rate_table};
use ghb_core::sources::ExperimentParams;

fn ghb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn qfi_curve_single_point_matches_closed_form() {
    let o = ghb(&["qfi-curve", "--photons", "2", "--grid", "1", "--no-header-timestamp"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row = data_rows(&text)
        .into_iter()
        .find(|r| r.starts_with("1,0,1,1,"))
        .unwrap();
    let q: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert_eq!(q, 4.0);
}

#[test]
fn outputs_are_byte_identical_without_timestamp() {
    let args = [
        "fringes",
        "--probe",
        "2,1",
        "--grid",
        "-1:1:0.5",
        "--no-header-timestamp",
    ];
    let a = ghb(&args);
    let b = ghb(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let with_time = ghb(&args[..5]);
    assert!(stdout(&with_time).contains("# generated-unix:"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"probe": [2, 1], "grid": "0:1:0.5", "postselect": true}"#).unwrap();
    let o = ghb(&[
        "fisher",
        "--config",
        cfg.to_str().unwrap(),
        "--probe",
        "1,1",
        "--no-header-timestamp",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let config_line = text.lines().find(|l| l.starts_with("# config:")).unwrap();
    assert!(config_line.contains(r#""probe":[1,1]"#), "{config_line}");
    assert!(config_line.contains(r#""postselect":true"#));
    assert_eq!(data_rows(&text).len(), 3);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"photons": 0}"#).unwrap();
    let o = ghb(&["qfi-curve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`photons`"));

    fs::write(&cfg, r#"{"unknown": 1}"#).unwrap();
    assert_eq!(
        ghb(&["fringes", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(ghb(&["fringes", "--grid", "1:0:0.1"]).status.code(), Some(2));
    assert_eq!(ghb(&["fit"]).status.code(), Some(2));
    assert_eq!(
        ghb(&["calibrate", "--data", "/nonexistent/file.csv"]).status.code(),
        Some(2)
    );
    assert_eq!(ghb(&["optimal-state", "--eta", "0"]).status.code(), Some(2));
}

fn write_counts(path: &Path) {
    let truth = ExperimentParams {
        lambda1: 0.3,
        lambda2: 0.3,
        eta_h1: 0.6,
        eta_h2: 0.6,
        eta_s1: 0.7,
        eta_s2: 0.7,
        eta_d1: 1.0,
        eta_d2: 1.0,
        overlap: 0.9,
        cutoff: 30,
    };
    let grid = [0.3, 0.8, 1.3, 1.8, 2.3];
    let table = synthetic_counts(&truth, &[(0, 0), (1, 0), (0, 1), (1, 1)], &grid, 2, 1_000_000, true, 4).unwrap();
    let mut f = fs::File::create(path).unwrap();
    write_rate_table(&mut f, &table).unwrap();
}

#[test]
fn fit_then_bootstrap_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("counts.csv");
    write_counts(&data);
    let cfg = dir.path().join("fit.json");
    fs::write(
        &cfg,
        r#"{"params": {"lambda1": 0.3, "lambda2": 0.3, "eta_h1": 0.6, "eta_h2": 0.6, "eta_s1": 0.7,
            "eta_s2": 0.7, "eta_d1": 1.0, "eta_d2": 1.0, "overlap": 0.9, "cutoff": 30},
            "fixed": {"lambda1": false, "lambda2": true, "eta_h1": false, "eta_h2": true, "eta_s1": false,
            "eta_s2": true, "eta_d1": true, "eta_d2": true, "overlap": false}}"#,
    )
    .unwrap();
    let fit_out = dir.path().join("result.json");
    let o = ghb(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        fit_out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(&fit_out).unwrap()).unwrap();
    assert_eq!(fit["converged"], true);
    assert!((fit["params"]["eta_s1"].as_f64().unwrap() - 0.7).abs() < 0.02);

    let run = || {
        ghb(&[
            "bootstrap",
            "--data",
            data.to_str().unwrap(),
            "--fit",
            fit_out.to_str().unwrap(),
            "--n-sets",
            "3",
            "--seed",
            "17",
            "--grid",
            "0.5:1.5:0.5",
            "--no-header-timestamp",
        ])
    };
    let (a, b) = (run(), run());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("# bootstrap: "));
    for row in data_rows(&text) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 5);
        let (lo, hi): (f64, f64) = (cols[3].parse().unwrap(), cols[4].parse().unwrap());
        assert!(lo <= hi);
    }
}

#[test]
fn calibrate_recovers_efficiencies() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("joint.csv");
    let dists: Vec<JointDistribution> = [0.2, 0.35]
        .iter()
        .map(|&l| JointDistribution::model(l, l, 0.47, 0.56, 6))
        .collect();
    write_joint_distributions(&mut fs::File::create(&data).unwrap(), &dists).unwrap();
    let o = ghb(&["calibrate", "--data", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cal: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((cal["eta_h"]["mean"].as_f64().unwrap() - 0.47).abs() < 1e-4);
    assert!((cal["eta_sd"]["mean"].as_f64().unwrap() - 0.56).abs() < 1e-4);
}

#[test]
fn phase_map_marks_dark_points() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("coupler.csv");
    fs::write(&data, "x,r10,r01\n0,98,2\n1,50,50\n2,0,0\n3,2,98\n").unwrap();
    let o = ghb(&["phase-map", "--data", data.to_str().unwrap(), "--no-header-timestamp"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows = data_rows(&text);
    assert_eq!(rows[2], "2,,,");
    let phi: f64 = rows[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!((phi - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn threshold_map_lossless_point_matches_qfi() {
    let o = ghb(&[
        "threshold-map",
        "--lambda",
        "0.35",
        "--grid",
        "1",
        "--overlap-grid",
        "1",
        "--no-header-timestamp",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row = data_rows(&text)[0];
    let value: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    // (7,1) probe: Q / N = (2*7*1 + 8) / 8
    assert!((value - 2.75).abs() < 1e-6, "{value}");
}

#[test]
fn oracle_check_passes() {
    let o = ghb(&["oracle-check", "--cases", "5", "--seed", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["cases"], 5);
}

#[test]
fn optimal_state_without_loss_is_noon() {
    let o = ghb(&["optimal-state", "--photons", "4"]);
    assert!(o.status.success());
    let res: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((res["qfi"].as_f64().unwrap() - 16.0).abs() < 1e-6);
}
