use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};

use serde_json::{json, Value};

fn hamdelay(args: &[&str], config: Option<Value>, out: &Path) -> (i32, Option<Value>) {
    fs::create_dir_all(out).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hamdelay"));
    cmd.args(args)
        .arg("--out")
        .arg(out)
        .env("HAMDELAY_LOG", "off")
        .stdout(Stdio::null())
        .stderr(Stdio::null());
    if let Some(c) = config {
        let path = out.join("config.json");
        fs::write(&path, c.to_string()).unwrap();
        cmd.arg("--config").arg(path);
    }
    let status = cmd.status().unwrap();
    let report = fs::read_to_string(out.join("report.json"))
        .ok()
        .map(|s| serde_json::from_str(&s).unwrap());
    (status.code().unwrap(), report)
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(
        hamdelay(&["solve"], Some(json!({"system": "example9"})), out).0,
        2
    );
    assert_eq!(
        hamdelay(&["solve"], Some(json!({"sytem": "example2-harmonic"})), out).0,
        2
    );
    assert_eq!(
        hamdelay(&["solve"], Some(json!({"params": {"k": 1.5}})), out).0,
        2
    );
    assert_eq!(
        hamdelay(&["solve"], Some(json!({"system": "example3-helium"})), out).0,
        2
    );
    assert_eq!(hamdelay(&["transmogrify"], None, out).0, 2);
    assert_eq!(hamdelay(&["solve", "--grid", "many"], None, out).0, 2);
    assert!(!out.join("report.json").exists());
}

#[test]
fn solver_failure_exits_3_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"solver": {"max_outer": 1, "max_inner": 1}});
    let (code, report) = hamdelay(&["solve"], Some(cfg), dir.path());
    assert_eq!(code, 3);
    assert!(report.is_none());
    let err: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("error.json")).unwrap()).unwrap();
    assert_eq!(err["exit_code"], 3);
    assert!(err["error"].as_str().unwrap().contains("solver failed"));
}

#[test]
fn solve_writes_loop_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = hamdelay(&["solve", "--grid", "128", "--seed", "9"], None, dir.path());
    assert_eq!(code, 0);
    let report = report.unwrap();
    assert_eq!(report["seed"], 9);
    assert_eq!(report["config"]["solver"]["grid"], 128);
    let r = &report["results"];
    assert!((r["radius"].as_f64().unwrap() - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-6);
    assert_eq!(
        r["gradient_probe"]["derivatives"].as_array().unwrap().len(),
        20
    );
    let csv = fs::read_to_string(dir.path().join("loop.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,q1,p1");
    assert_eq!(lines.len(), 129);
    // 17 significant digits in scientific notation
    let first = lines[1].split(',').nth(1).unwrap();
    assert_eq!(first.split('e').next().unwrap().len(), 18);
    assert!(dir.path().join("timing.json").exists());
}

#[test]
fn nullity_of_a_loaded_loop() {
    let dir = tempfile::tempdir().unwrap();
    let solved = dir.path().join("solve");
    assert_eq!(hamdelay(&["solve"], None, &solved).0, 0);
    let loop_csv = solved.join("loop.csv").display().to_string();
    let (code, report) = hamdelay(
        &["nullity"],
        Some(json!({"loop_csv": loop_csv})),
        &dir.path().join("nullity"),
    );
    assert_eq!(code, 0);
    let r = &report.unwrap()["results"];
    assert_eq!(r["report"]["nullity_direct"], 1);
    assert_eq!(r["report"]["nullity_reduced"], 1);
    assert_eq!(r["source"], loop_csv);

    // a perturbed loop is not critical: a failed check, not a crash
    let text = fs::read_to_string(&loop_csv).unwrap();
    let mut rows: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = rows[5].split(',').map(String::from).collect();
    cells[1] = format!("{:.16e}", cells[1].parse::<f64>().unwrap() + 1e-3);
    rows[5] = cells.join(",");
    let bent = dir.path().join("bent.csv");
    fs::write(&bent, rows.join("\n") + "\n").unwrap();
    let (code, _) = hamdelay(
        &["nullity"],
        Some(json!({"loop_csv": bent.display().to_string()})),
        &dir.path().join("bent"),
    );
    assert_eq!(code, 1);
}

#[test]
fn empty_ensemble_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = hamdelay(
        &["operator-ensemble"],
        Some(json!({"trials": 0})),
        dir.path(),
    );
    assert_eq!(code, 0);
    assert_eq!(report.unwrap()["results"]["instances"], 0);
    let csv = fs::read_to_string(dir.path().join("ensemble.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("index,seed,n,m,nullity,bound"));
}

#[test]
fn ensemble_is_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"trials": 4, "grid": 32, "n_values": [1, 2], "m_values": [1, 3]});
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        hamdelay(&["operator-ensemble", "--jobs", "1"], Some(cfg.clone()), &a).0,
        0
    );
    assert_eq!(
        hamdelay(&["operator-ensemble", "--jobs", "3"], Some(cfg), &b).0,
        0
    );
    for f in ["report.json", "ensemble.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn kepler_flags_a_coarse_grid() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = hamdelay(&["kepler", "--grid", "16"], None, dir.path());
    assert_eq!(code, 1);
    let r = &report.unwrap()["results"];
    assert_eq!(r["refinement"]["passed"], false);
    assert_eq!(r["kepler_ok"], false);
}

#[test]
fn symmetry_time_shift_and_reversal() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = hamdelay(
        &["symmetry"],
        Some(json!({"n": 1, "r": 0.5})),
        &dir.path().join("shift"),
    );
    assert_eq!(code, 0);
    assert_eq!(report.unwrap()["results"]["proposition"]["agreement"], true);
    let (code, report) = hamdelay(
        &["symmetry"],
        Some(json!({"n": -1, "r": 0.0})),
        &dir.path().join("reverse"),
    );
    assert_eq!(code, 0);
    let r = &report.unwrap()["results"];
    assert_eq!(r["report_only"], true);
    assert!(r["proposition"]["agreement"].is_boolean());
}
