use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rogue_walk::output::{read_manifest, RunStatus};

fn rogue_walk(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rogue-walk"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![rdr.headers().unwrap().iter().map(String::from).collect()];
    for rec in rdr.records() {
        rows.push(rec.unwrap().iter().map(String::from).collect());
    }
    rows
}

#[test]
fn run_without_disorder_writes_no_events() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = rogue_walk(
        &["run", "--theta-pi", "0.25", "--w", "0", "--sites", "12", "--seed", "1"],
        &out,
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let events = read_csv(&out.join("events.csv"));
    assert_eq!(events.len(), 1, "header only");
    assert_eq!(events[0], ["realization", "t", "site", "probability", "exceedance"]);

    let probs = read_csv(&out.join("probabilities.csv"));
    assert_eq!(probs.len(), 1 + 12 * 1200);
    for row in &probs[1..] {
        let p: f64 = row[2].parse().unwrap();
        assert!((p - 1.0 / 12.0).abs() < 1e-12);
    }
    let manifest = read_manifest(&out).unwrap();
    assert_eq!(manifest.status, RunStatus::Complete);
    assert!(manifest.timings.is_none());
    assert!(manifest.files.iter().any(|f| f == "events.csv"));
}

#[test]
fn theta_pi_matches_theta_in_radians() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--w", "0.3", "--sites", "10", "--steps", "80", "--seed", "5"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let mut args_a = vec!["run", "--theta-pi", "0.25"];
    args_a.extend(common);
    let pi4 = std::f64::consts::FRAC_PI_4.to_string();
    let mut args_b = vec!["run", "--theta", pi4.as_str()];
    args_b.extend(common);
    assert!(rogue_walk(&args_a, &a).status.success());
    assert!(rogue_walk(&args_b, &b).status.success());
    for file in ["probabilities.csv", "events.csv", "field.csv", "threshold.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn csv_values_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = rogue_walk(
        &["run", "--theta", "0.7", "--w", "0.2", "--sites", "9", "--steps", "40", "--seed", "2"],
        &out,
    );
    assert!(res.status.success());
    let text = fs::read_to_string(out.join("probabilities.csv")).unwrap();
    for line in text.lines().skip(1) {
        let field = line.rsplit(',').next().unwrap();
        let value: f64 = field.parse().unwrap();
        assert_eq!(value.to_string(), field);
    }
}

#[test]
fn sweep_writes_one_row_per_grid_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let res = rogue_walk(
        &[
            "sweep", "--theta-pi-grid", "0.1,0.3", "--w-grid", "0.1:0.2:2", "--sites", "10",
            "--steps", "50", "--realizations", "3", "--seed", "4",
        ],
        &out,
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = read_csv(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][..3], ["theta", "w", "n"]);
    assert!(out.join("sweep.json").exists());
}

#[test]
fn scaling_hook_recovers_inverse_square_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scaling");
    let res = rogue_walk(
        &[
            "scaling", "--theta-pi", "0.25", "--sizes", "50,100,200,400",
            "--synthetic-prefactor", "0.2", "--seed", "0",
        ],
        &out,
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let exponent = fit["fit"]["exponent"].as_f64().unwrap();
    assert!((exponent + 0.5).abs() < 1e-9, "{exponent}");
    assert!((fit["fit"]["r_squared"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn scaling_refuses_two_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let res = rogue_walk(
        &[
            "scaling", "--theta-pi", "0.25", "--sizes", "50,100", "--w-scan", "0.01:0.1:3",
            "--seed", "0",
        ],
        &dir.path().join("s"),
    );
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("error"));
}

#[test]
fn invalid_inputs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let cases: [&[&str]; 5] = [
        &["run", "--theta", "2.0", "--w", "0.1", "--sites", "10", "--seed", "1"],
        &["run", "--theta", "0.5", "--w", "-0.1", "--sites", "10", "--seed", "1"],
        &["run", "--theta", "0.5", "--w", "0.1", "--sites", "0", "--seed", "1"],
        &["run", "--w", "0.1", "--sites", "10", "--seed", "1"],
        &[
            "ensemble", "--theta", "0.5", "--w", "0.1", "--sites", "10", "--seed", "1",
            "--fraction-mode", "bogus",
        ],
    ];
    for args in cases {
        let res = rogue_walk(args, &out);
        assert_eq!(res.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn ensemble_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ens");
    let res = rogue_walk(
        &[
            "ensemble", "--theta", "0.8", "--w", "0.15", "--sites", "16", "--realizations", "6",
            "--fraction-mode", "cell", "--seed", "9", "--record-timings",
        ],
        &out,
    );
    assert!(res.status.success());
    let manifest = read_manifest(&out).unwrap();
    assert_eq!(manifest.status, RunStatus::Complete);
    assert_eq!(manifest.fraction_mode, "cell");
    assert_eq!(manifest.master_seed, 9);
    assert!(manifest.timings.is_some());
    let summary = read_csv(&out.join("summary.csv"));
    assert_eq!(summary.len(), 2);
    assert_eq!(summary[1][4], "6");
    let hist = read_csv(&out.join("histogram.csv"));
    assert_eq!(hist[0], ["bin_lo", "bin_hi", "count"]);
    assert_eq!(hist.len(), 201);
}
