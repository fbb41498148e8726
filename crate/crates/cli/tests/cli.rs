use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dcmmd::error_model::HmmSpec;

fn dcmmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcmmd")).args(args).output().expect("spawn dcmmd")
}

fn ok(args: &[&str]) -> Output {
    let out = dcmmd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_is_deterministic_and_honours_length() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["simulate", "--preset", "highway_car_following", "--length", "777", "--modes", "--seed", "9", "--out", p(d)]);
    }
    let ea = fs::read(a.join("errors.csv")).unwrap();
    assert_eq!(ea, fs::read(b.join("errors.csv")).unwrap());
    let text = String::from_utf8(ea).unwrap();
    assert_eq!(text.lines().next(), Some("t,e,mode"));
    assert_eq!(text.lines().count(), 778);
    ok(&["simulate", "--preset", "highway_car_following", "--length", "777", "--seed", "10", "--out", p(&b)]);
    assert_ne!(fs::read(a.join("errors.csv")).unwrap(), fs::read(b.join("errors.csv")).unwrap());
    assert!(a.join("config.resolved.json").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(dcmmd(&["simulate", "--preset", "no_such_scene", "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(dcmmd(&["simulate", "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(dcmmd(&["simulate", "--preset", "highway_car_following", "--b", "calibrate:x"]).status.code(), Some(2));
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"scenario":"highway_car_following","m":1}"#).unwrap();
    assert_eq!(dcmmd(&["simulate", "--config", p(&cfg), "--out", p(&out)]).status.code(), Some(2));
    fs::write(&cfg, r#"{"scenario":"highway_car_following","bogus":1}"#).unwrap();
    assert_eq!(dcmmd(&["simulate", "--config", p(&cfg), "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(dcmmd(&["calibrate", "--preset", "highway_car_following", "--detector", "nope"]).status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("e.csv");
    fs::write(&log, "t,e\n1,0.5\n1,0.7\n").unwrap();
    assert_eq!(dcmmd(&["fit", p(&log), "--out", p(dir.path())]).status.code(), Some(3));
    let constant: String = std::iter::once("t,e\n".to_string()).chain((1..=200).map(|t| format!("{t},0.5\n"))).collect();
    fs::write(&log, constant).unwrap();
    assert_eq!(dcmmd(&["fit", p(&log), "--out", p(dir.path())]).status.code(), Some(3));
    fs::write(&log, "t,e\n1,0.5\n2,0.5\n3,0.5\n").unwrap();
    assert_eq!(dcmmd(&["fit", p(&log), "--out", p(dir.path())]).status.code(), Some(3));
    let missing = dir.path().join("missing.csv");
    assert_eq!(dcmmd(&["fit", p(&missing), "--out", p(dir.path())]).status.code(), Some(3));
}

#[test]
fn fit_writes_round_trippable_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["simulate", "--preset", "highway_stop_and_go", "--length", "4000", "--seed", "3", "--out", p(out)]);
    ok(&["fit", p(&out.join("errors.csv")), "--out", p(out)]);
    let text = fs::read_to_string(out.join("hmm.json")).unwrap();
    let spec: HmmSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::from_str::<HmmSpec>(&serde_json::to_string(&spec).unwrap()).unwrap(), spec);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let modes = fs::read_to_string(out.join("modes.csv")).unwrap();
    assert_eq!(modes.lines().next(), Some("t,e,mode,posterior_h"));
    assert_eq!(modes.lines().count(), 4001);

    let fitted = dir.path().join("fitted.json");
    let cfg = serde_json::json!({
        "scenario": { "label": "fitted", "pre": v, "post": v, "changepoint_grid": [1] },
    });
    fs::write(&fitted, cfg.to_string()).unwrap();
    // identical pre and post are rejected as indistinguishable
    assert_eq!(dcmmd(&["simulate", "--config", p(&fitted), "--out", p(out)]).status.code(), Some(2));
}

#[test]
fn dcmmd_trace_moves_only_on_block_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let common = ["--preset", "highway_car_following", "--m", "10", "--b", "1e9", "--seed", "4", "--out", p(out)];
    let mut sim = vec!["simulate", "--length", "600", "--changepoint", "301"];
    sim.extend(common);
    ok(&sim);
    let log = out.join("errors.csv");
    let mut det = vec!["detect", p(&log), "--detector", "dc_mmd", "--detector", "nll"];
    det.extend(common);
    ok(&det);
    let trace = fs::read_to_string(out.join("trace_dc_mmd.csv")).unwrap();
    let steps: Vec<u64> = trace.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(steps, (1..=60).map(|k| 10 * k).collect::<Vec<_>>());
    let nll = fs::read_to_string(out.join("trace_nll.csv")).unwrap();
    assert_eq!(nll.lines().count(), 601);
    let alarm: serde_json::Value = serde_json::from_slice(&fs::read(out.join("alarm_dc_mmd.json")).unwrap()).unwrap();
    assert_eq!(alarm["censored"], 600);
}
