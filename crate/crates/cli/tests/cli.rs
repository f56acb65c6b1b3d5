use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn treeflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treeflow"))
        .args(args)
        .env("TREEFLOW_LOG", "error")
        .output()
        .expect("run treeflow")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn solve_reports_a_tight_optimum() {
    let net = fixture("two_bus.json");
    let out = treeflow(&["solve", "--network", path_str(&net)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "optimal");
    assert_eq!(v["verdict"], "tight_optimal");
    // Loss of one line carrying 0.3 p.u. into a fixed-magnitude load.
    let flows = &v["flows"][0];
    let loss = flows["p_fwd"].as_f64().unwrap() + flows["p_rev"].as_f64().unwrap();
    assert!((loss - v["objective"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn solve_exits_2_on_an_infeasible_network() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("infeasible.json");
    // The load exceeds the largest transferable power of the line.
    std::fs::write(
        &path,
        r#"{
  "buses": [
    {"id": 1, "v_min": 1.0, "v_max": 1.0, "v_fixed": 1.0},
    {"id": 2, "v_min": 1.0, "v_max": 1.0, "v_fixed": 1.0, "p_min": -5.0, "p_max": -5.0}
  ],
  "lines": [{"from": 1, "to": 2, "g": 1.0, "b": 5.0, "theta_min": -0.2, "theta_max": 0.2}]
}"#,
    )
    .unwrap();
    let out = treeflow(&["solve", "--network", path_str(&path)]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_input_is_a_usage_error() {
    assert_eq!(code(&treeflow(&["solve", "--network", "/nonexistent/net.json"])), 1);
    assert_eq!(code(&treeflow(&["solve"])), 1);
    assert_eq!(code(&treeflow(&["no-such-command"])), 1);
}

#[test]
fn case_study_with_no_trials_prints_the_header() {
    let net = fixture("feeder8.json");
    let out = treeflow(&["case-study", "--network", path_str(&net), "--trials", "0"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().collect::<Vec<_>>(),
        ["trial,seed,verdict,objective,min_lmp,max_rank_ratio"]
    );
}

#[test]
fn case_study_is_reproducible_from_its_seed() {
    let net = fixture("feeder8.json");
    let run = |seed: &str| {
        let out = treeflow(&[
            "case-study",
            "--network",
            path_str(&net),
            "--trials",
            "4",
            "--seed",
            seed,
            "--method",
            "b",
        ]);
        assert_eq!(code(&out), 0);
        out.stdout
    };
    let first = run("17");
    assert_eq!(first, run("17"));
    assert_ne!(first, run("18"));
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 5);
}

#[test]
fn oracle_compare_flags_the_counterexample() {
    let net = fixture("two_bus_counterexample.json");
    let out = treeflow(&["oracle-compare", "--network", path_str(&net)]);
    assert_eq!(code(&out), 4);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("angle condition: violated"), "{text}");
}

#[test]
fn oracle_compare_agrees_on_a_well_posed_line() {
    let net = fixture("two_bus.json");
    let out = treeflow(&["oracle-compare", "--network", path_str(&net)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

fn plot_metadata(extra: &[&str]) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("region.svg");
    let csv = dir.path().join("arc.csv");
    let mut args = vec!["plot-region", "--out", path_str(&svg), "--csv", path_str(&csv)];
    args.extend_from_slice(extra);
    let out = treeflow(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("theta,p_fwd,p_rev,feasible,pareto"));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn plot_region_reports_the_ellipse_shape() {
    let v = plot_metadata(&["--g", "1", "--b", "5"]);
    assert!((v["axis_ratio"].as_f64().unwrap() - 5.0).abs() < 1e-9);
    assert!((v["major_axis_angle_deg"].as_f64().unwrap() + 45.0).abs() < 1e-9);
    assert_eq!(v["segment"], false);
}

#[test]
fn plot_region_of_a_lossless_line_is_a_segment() {
    let v = plot_metadata(&["--g", "0", "--b", "4"]);
    assert_eq!(v["segment"], true);
    assert!(v["axis_ratio"].is_null());
}

#[test]
fn plot_region_marks_a_dominated_arc() {
    let v = plot_metadata(&["--g", "1", "--b", "1", "--theta-min", "-2.2", "--theta-max", "2.2"]);
    assert_eq!(v["angle_condition"], false);
    assert_eq!(v["dominated_arc"], true);
}

#[test]
fn validate_summarizes_the_tree() {
    let net = fixture("feeder8.json");
    let out = treeflow(&["validate", "--network", path_str(&net)]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("8 buses, 7 lines"), "{text}");
}
