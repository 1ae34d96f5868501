use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridloc"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn simulate_fit_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), r#"{"length": 30, "grid_step": 1.0}"#).unwrap();
    let out = run(d, &["simulate", "--config", "cfg.json", "--out", "fp.csv", "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.join("fp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 32);

    let out = run(d, &["fit", "--input", "fp.csv", "--penalty", "p2", "--sections", "3", "--mode", "rfid_oracle", "--out", "model.json", "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["mode"], "rfid_oracle");
    assert_eq!(model["sections"].as_array().unwrap().len(), 3);

    let out = run(d, &["eval", "--model", "model.json", "--input", "fp.csv", "--metric", "mse", "--seed", "7"]);
    assert!(out.status.success());
    let line = String::from_utf8(out.stdout).unwrap();
    let value: f64 = line.trim().strip_prefix("mse,").unwrap().parse().unwrap();
    assert!(value >= 0.0);
}

#[test]
fn simulate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (name, seed) in [("a.csv", "1"), ("b.csv", "1"), ("c.csv", "2")] {
        assert!(run(d, &["simulate", "--out", name, "--seed", seed]).status.success());
    }
    let read = |n: &str| std::fs::read(d.join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn experiment_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("exp.json"),
        r#"{"dataset": {"simulate": {}}, "methods": ["global", "rfid_oracle", "individual"], "sections": 3, "repetitions": 5}"#,
    )
    .unwrap();
    let out = run(d, &["experiment", "--config", "exp.json", "--out", "report.csv", "--seed", "7", "--per-rep", "reps.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(d.join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap(), "method,sections,metric,value,flags");
    assert_eq!(lines.count(), 5);
    let reps = std::fs::read_to_string(d.join("reps.csv")).unwrap();
    assert_eq!(reps.lines().count(), 1 + 5 * 5);
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "point_id,x\n1,2\n").unwrap();
    assert_eq!(run(d, &["fit", "--input", "bad.csv", "--out", "m.json"]).status.code(), Some(2));
    assert_eq!(run(d, &["fit", "--input", "missing.csv", "--out", "m.json"]).status.code(), Some(2));
    assert_eq!(run(d, &["simulate", "--out", "x.csv", "--seed", "abc"]).status.code(), Some(2));
    std::fs::write(d.join("cfg.json"), r#"{"grid_step": -1}"#).unwrap();
    assert_eq!(run(d, &["simulate", "--config", "cfg.json", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(run(d, &["fit", "--input", "bad.csv", "--penalty", "p0.5", "--out", "m.json"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("huge.csv"),
        "point_id,true_x,true_y,true_z,est_x_a,est_y_a,est_z_a,est_x_b,est_y_b,est_z_b\n\
         p0,0,0,0,1e200,0,0,2e200,0,0\n\
         p1,1,0,0,3e200,0,0,1e200,0,0\n",
    )
    .unwrap();
    let out = run(d, &["fit", "--input", "huge.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
