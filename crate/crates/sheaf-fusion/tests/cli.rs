//! End-to-end tests of the command-line binary: the simulate → fuse →
//! filtration pipeline, the convert and lag subcommands, and the exit-code
//! contract (0 success, 1 bad input, 2 internal).

use std::f64::consts::TAU;
use std::path::Path;
use std::process::{Command, Output};

use sheaf_fusion::emissions::EmissionFactorTable;
use sheaf_fusion::ingest::read_readings;
use sheaf_fusion::simulation::{inverse_guidebook, DEFAULT_COUNT_RATIO};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheaf-fusion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let output = run(args);
    assert!(
        output.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr),
    );
    output
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

fn file_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).expect("file is JSON")
}

#[test]
fn simulate_fuse_filtration_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let readings = dir.path().join("readings.csv");
    let report = dir.path().join("report.json");
    let series = dir.path().join("series.csv");
    let snapshot = dir.path().join("filtration.json");

    let out = run_ok(&[
        "simulate",
        "--out",
        readings.to_str().unwrap(),
        "--seed",
        "3",
        "--duration-s",
        "7200",
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("wrote"));
    let text = std::fs::read_to_string(&readings).unwrap();
    assert!(text.starts_with("timestamp_s,sensor_id,v1,v2\n"));
    let records = read_readings(&readings).unwrap();
    // Two dust sensors every 15 s and two cameras every 600 s.
    assert_eq!(records.len(), 2 * (7200 / 15) + 2 * (7200 / 600));

    let out = run_ok(&[
        "fuse",
        "--readings",
        readings.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--series",
        series.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("fused"));
    let report = file_json(&report);
    let steps = report["steps"].as_u64().unwrap();
    assert!(steps > 0);
    assert!(report["mean_radius"].as_f64().unwrap() > 0.0);
    assert!(report["mean_epsilon_c"].as_f64().unwrap() > 0.0);
    // No reference stream, so no score.
    assert!(report["score"].is_null());
    let series = std::fs::read_to_string(&series).unwrap();
    let mut lines = series.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t_s,truth,naive,fused,without_cutoff,epsilon_c,radius,naive_err_ma_pct,fused_err_ma_pct",
    );
    assert_eq!(lines.count() as u64, steps);

    let out = run_ok(&[
        "filtration",
        "--readings",
        readings.to_str().unwrap(),
        "--at",
        "3600",
        "--out",
        snapshot.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("filtration at 3600 s"));
    let snapshot = file_json(&snapshot);
    assert_eq!(snapshot["t_s"], 3600);
    assert_eq!(snapshot["entries"].as_array().unwrap().len(), 9);
    assert!(snapshot["radius"].as_f64().unwrap() >= 0.0);
    assert!(!snapshot["selected"].as_array().unwrap().is_empty());
    // Four vertices is far below the exact-cover cap, so landmarks are
    // included.
    assert!(snapshot["landmarks"].is_array());

    // Without --out the same report goes to stdout.
    let out = run_ok(&[
        "filtration",
        "--readings",
        readings.to_str().unwrap(),
        "--at",
        "3600",
    ]);
    let inline = stdout_json(&out);
    assert_eq!(inline["t_s"], snapshot["t_s"]);
    assert_eq!(inline["radius"], snapshot["radius"]);
}

#[test]
fn fuse_scores_against_a_reference_stream() {
    let dir = tempfile::tempdir().unwrap();
    let readings = dir.path().join("readings.csv");
    let report = dir.path().join("report.json");

    // Four snapshots of perfectly agreeing data plus a REF truth stream.
    let mut text = String::from("timestamp_s,sensor_id,v1,v2\n");
    for step in 0..4 {
        let t = step * 600;
        text.push_str(&format!("{t},C1,200,30\n"));
        text.push_str(&format!("{t},C2,200,30\n"));
        text.push_str(&format!("{t},S1,12.91\n"));
        text.push_str(&format!("{t},S2,12.91\n"));
        text.push_str(&format!("{t},REF,12.91\n"));
    }
    std::fs::write(&readings, text).unwrap();

    let out = run_ok(&[
        "fuse",
        "--readings",
        readings.to_str().unwrap(),
        "--reference",
        "REF",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("vs REF"));
    let report = file_json(&report);
    assert_eq!(report["steps"], 4);
    let score = &report["score"];
    assert_eq!(score["reference"], "REF");
    // Everything agrees exactly, so both estimators are error-free and the
    // relative improvement is undefined.
    assert!(score["naive_mape_pct"].as_f64().unwrap() <= 1e-9);
    assert!(score["sheaf_mape_pct"].as_f64().unwrap() <= 1e-9);
    assert!(score["improvement_pct"].is_null());

    // A vertex cannot serve as its own reference.
    let out = run(&[
        "fuse",
        "--readings",
        readings.to_str().unwrap(),
        "--reference",
        "S1",
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("network vertex"));
}

#[test]
fn convert_reports_mass_and_concentration() {
    let out = run_ok(&[
        "convert",
        "--count",
        "two-wheeled=200",
        "--count",
        "four-wheeled=30",
    ]);
    let value = stdout_json(&out);
    assert_eq!(value["mode"], "mass");
    assert_eq!(value["total_g"].as_f64().unwrap(), 12.91);
    assert!((value["per_type_g"]["two-wheeled"].as_f64().unwrap() - 9.4).abs() <= 1e-12);
    assert!((value["per_type_g"]["four-wheeled"].as_f64().unwrap() - 3.51).abs() <= 1e-12);
    assert!(value.get("concentration_ug_m3").is_none());

    let out = run_ok(&[
        "convert",
        "--count",
        "two-wheeled=200",
        "--count",
        "four-wheeled=30",
        "--vkt-km",
        "2",
        "--mode",
        "concentration",
    ]);
    let value = stdout_json(&out);
    assert_eq!(value["mode"], "concentration");
    assert!((value["total_g"].as_f64().unwrap() - 25.82).abs() <= 1e-12);
    let expected = 25.82e6 / 2000f64.powi(3);
    assert!((value["concentration_ug_m3"].as_f64().unwrap() - expected).abs() <= 1e-15);

    let out = run(&["convert", "--count", "two-wheeled=1", "--count", "two-wheeled=2"]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("twice"));

    let out = run(&["convert", "--count", "two-wheeled=200", "--mode", "volume"]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad mode"));
}

#[test]
fn lag_recovers_a_planted_shift() {
    let dir = tempfile::tempdir().unwrap();
    let vehicle_csv = dir.path().join("vehicle.csv");
    let sensor_csv = dir.path().join("sensor.csv");
    let base_csv = dir.path().join("base.csv");

    // The vehicle file carries hourly count pairs whose guidebook image is
    // a daily sinusoid; the sensor file carries that profile shifted five
    // hours and read directly as PM.
    let factors = EmissionFactorTable::default();
    let profile: [f64; 24] = std::array::from_fn(|h| 30.0 + 20.0 * (TAU * h as f64 / 24.0).sin());
    let mut vehicle = String::from("timestamp_s,sensor_id,v1,v2\n");
    let mut sensor = String::from("timestamp_s,sensor_id,v1\n");
    let lag = 5usize;
    for h in 0..24usize {
        let t = h * 3600;
        let counts = inverse_guidebook(profile[h], DEFAULT_COUNT_RATIO, &factors).unwrap();
        let two = counts.get("two-wheeled").unwrap();
        let four = counts.get("four-wheeled").unwrap();
        vehicle.push_str(&format!("{t},V,{two},{four}\n"));
        sensor.push_str(&format!("{t},S,{}\n", profile[(h + 24 - lag) % 24]));
    }
    std::fs::write(&vehicle_csv, vehicle).unwrap();
    std::fs::write(&sensor_csv, sensor).unwrap();

    let out = run_ok(&[
        "lag",
        "--vehicle",
        vehicle_csv.to_str().unwrap(),
        "--sensor",
        sensor_csv.to_str().unwrap(),
        "--base",
        base_csv.to_str().unwrap(),
    ]);
    let estimate = stdout_json(&out);
    assert_eq!(estimate["lag_hours"], 5);
    assert_eq!(estimate["degenerate"], false);
    assert!(estimate["correlation"].as_f64().unwrap() > 0.99);

    let base = std::fs::read_to_string(&base_csv).unwrap();
    let mut lines = base.lines();
    assert_eq!(lines.next().unwrap(), "hour,base");
    let values: Vec<f64> = lines
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 24);
    // The sensor profile is exactly the shifted vehicle profile, so the
    // non-traffic base is zero everywhere.
    for v in values {
        assert!(v.abs() <= 1e-9, "base entry {v}");
    }
}

#[test]
fn bad_input_exits_one_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();

    let out = run(&["fuse", "--readings", dir.path().join("absent.csv").to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let malformed = dir.path().join("malformed.csv");
    std::fs::write(&malformed, "timestamp_s,sensor_id,v1,v2\nabc,S1,1.0\n").unwrap();
    let out = run(&["fuse", "--readings", malformed.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("line 2"),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr),
    );

    let stray = dir.path().join("stray.csv");
    std::fs::write(&stray, "timestamp_s,sensor_id,v1,v2\n0,X9,1.0\n").unwrap();
    let out = run(&["fuse", "--readings", stray.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown sensor"));

    // A snapshot before any sensor has reported names the missing sensor.
    let late = dir.path().join("late.csv");
    let mut text = String::from("timestamp_s,sensor_id,v1,v2\n");
    for t in [600, 1200] {
        text.push_str(&format!("{t},C1,200,30\n"));
        text.push_str(&format!("{t},C2,200,30\n"));
        text.push_str(&format!("{t},S1,12.91\n"));
        text.push_str(&format!("{t},S2,12.91\n"));
    }
    std::fs::write(&late, text).unwrap();
    let out = run(&["filtration", "--readings", late.to_str().unwrap(), "--at", "300"]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warming up"));
}

#[test]
fn usage_errors_and_help() {
    let out = run(&[]);
    assert_eq!(exit_code(&out), 1);

    let out = run(&["frobnicate"]);
    assert_eq!(exit_code(&out), 1);

    let out = run(&["simulate"]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));

    let out = run_ok(&["--help"]);
    let help = String::from_utf8_lossy(&out.stdout);
    for subcommand in ["simulate", "fuse", "filtration", "convert", "lag"] {
        assert!(help.contains(subcommand), "help lacks {subcommand}");
    }
}
