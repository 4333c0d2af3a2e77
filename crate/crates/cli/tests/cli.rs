//! End-to-end tests of the `steinitz-lab` binary.

use std::path::Path;
use std::process::{Command, Output};

use steinitz_core::koethe::{build_hs_scale, KoetheMatrix};
use steinitz_core::rearrange::PermutationStream;
use steinitz_core::series::{Component, ScalarStream, SeriesSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_steinitz-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.display().to_string()
}

const R2_SPEC: &str = r#"{
  "dimension": 2,
  "components": [
    { "direction": [1.0, 0.0], "stream": { "family": "alternating_power", "alpha": 1.0, "scale": 1.0 } },
    { "direction": [0.0, 1.0], "stream": { "family": "power", "alpha": 2.0, "scale": 1.0 } }
  ]
}"#;

#[test]
fn analyze_reports_r2_domain() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "r2.json", R2_SPEC);
    let out = run(&["analyze", "--input", &input]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["tool"], "steinitz-lab");
    assert_eq!(report["seed"], 0);
    let offset = report["domain"]["offset"].as_array().unwrap();
    assert!((offset[0].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 1e-5);
    assert!((offset[1].as_f64().unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-5);
    let directions = report["domain"]["directions"].as_array().unwrap();
    assert_eq!(directions.len(), 1);
    assert_eq!(directions[0], serde_json::json!([1.0, 0.0]));
}

#[test]
fn analyze_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "r2.json", R2_SPEC);
    let first = run(&["analyze", "--input", &input]);
    let second = run(&["analyze", "--input", &input]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn analyze_malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.json", "{ \"dimension\": 2, ");
    let out = run(&["analyze", "--input", &input]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line"), "no position diagnostics: {stderr}");
}

#[test]
fn analyze_divergent_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{
      "dimension": 1,
      "components": [
        { "direction": [1.0], "stream": { "family": "power", "alpha": 0.5, "scale": 1.0 } }
      ]
    }"#;
    let input = write(dir.path(), "divergent.json", spec);
    let out = run(&["analyze", "--input", &input]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn rearrange_stream_replays() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "r2.json", R2_SPEC);
    let stream_path = dir.path().join("stream.txt");
    let out = run(&[
        "rearrange",
        "--input",
        &input,
        "--target",
        "0,1.6449340668482264",
        "--stages",
        "3",
        "--output",
        stream_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&stream_path).unwrap();
    assert!(text.starts_with("## steinitz-lab"));
    let stream = PermutationStream::<f64>::from_text(&text).unwrap();
    assert_eq!(stream.certificates.len(), 3);
    let spec = SeriesSpec::new(
        2,
        vec![
            Component {
                direction: vec![1.0, 0.0],
                stream: ScalarStream::AlternatingPower { alpha: 1.0, scale: 1.0 },
            },
            Component {
                direction: vec![0.0, 1.0],
                stream: ScalarStream::Power { alpha: 2.0, scale: 1.0 },
            },
        ],
    )
    .unwrap();
    let scale = build_hs_scale(&KoetheMatrix::Power, 2, 4).unwrap();
    stream
        .verify(&spec, &[0.0, 1.6449340668482264], Some(&scale))
        .unwrap();
}

#[test]
fn rearrange_off_domain_exits_4_with_functional() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "r2.json", R2_SPEC);
    let out = run(&["rearrange", "--input", &input, "--target", "0,0"]);
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("separating functional"), "{stderr}");
}

#[test]
fn rearrange_zero_stages_emits_empty_stream() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "r2.json", R2_SPEC);
    let out = run(&[
        "rearrange",
        "--input",
        &input,
        "--target",
        "0,1.6449340668482264",
        "--stages",
        "0",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let stream = PermutationStream::<f64>::from_text(&text).unwrap();
    assert!(stream.emitted.is_empty());
    assert!(stream.certificates.is_empty());
}

#[test]
fn diagnose_power_grid_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "power.json", r#"{ "family": "power" }"#);
    let out = run(&["diagnose", "--input", &input]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("n,delta_n,v_n,n_eps_v_n"));
    assert!(text.contains("# verdict nuclear witness 1->3 2->4 3->5 4->6 5->7 6->8"));
}

#[test]
fn diagnose_constant_grid_not_nuclear() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "const.json", r#"{ "family": "constant", "c": 2.0 }"#);
    let out = run(&["diagnose", "--input", &input]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# verdict notNuclearWithin(6,12)"), "{text}");
}

#[test]
fn diagnose_table_grid_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "table.json",
        r#"{ "family": "table", "grid": [[1.0, 2.0], [2.0, 3.0]] }"#,
    );
    let out = run(&["diagnose", "--input", &input]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn diagnose_diagonal_map_volume_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "map.json",
        r#"{ "matrix": [[2.0, 0.0], [0.0, 0.5]] }"#,
    );
    let out = run(&["diagnose", "--input", &input, "--epsilon", "0.5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('n'))
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    // v_n is the geometric mean of the leading singular values
    assert!((rows[0][2] - 2.0).abs() < 1e-12);
    assert!((rows[1][2] - 1.0).abs() < 1e-12);
}

#[test]
fn diagnose_trials_check_respects_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "map.json",
        r#"{ "matrix": [[2.0, 0.0], [0.0, 0.5]] }"#,
    );
    let single = bin()
        .args(["diagnose", "--input", &input, "--trials", "500"])
        .env("STEINITZ_LAB_THREADS", "1")
        .output()
        .unwrap();
    let pooled = bin()
        .args(["diagnose", "--input", &input, "--trials", "500"])
        .env("STEINITZ_LAB_THREADS", "4")
        .output()
        .unwrap();
    assert!(single.status.success());
    // the pool size must not change the merged output
    assert_eq!(single.stdout, pooled.stdout);
    let text = String::from_utf8(single.stdout).unwrap();
    assert!(text.contains("# check n=1"), "{text}");
}

#[test]
fn counterexample_build_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let built = dir.path().join("cert.json");
    let out = run(&[
        "counterexample",
        "--dim",
        "4",
        "--levels",
        "3",
        "--output",
        built.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let first: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&built).unwrap()).unwrap();
    assert_eq!(first["verdict"]["nonconvex"], true);
    assert!(first["verdict"]["group_bound"].as_f64().unwrap() >= 1.125);

    let replay = run(&["counterexample", "--input", built.to_str().unwrap()]);
    assert!(replay.status.success());
    let second: serde_json::Value = serde_json::from_slice(&replay.stdout).unwrap();
    assert_eq!(first["verdict"], second["verdict"]);
    assert_eq!(first["certificate"], second["certificate"]);
}

#[test]
fn counterexample_tampered_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let built = dir.path().join("cert.json");
    let out = run(&["counterexample", "--output", built.to_str().unwrap()]);
    assert!(out.status.success());
    let mut full: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&built).unwrap()).unwrap();
    full["certificate"]["tail_subsets"][1][0] = serde_json::json!(2);
    std::fs::write(&built, serde_json::to_string(&full).unwrap()).unwrap();
    let replay = run(&["counterexample", "--input", built.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(6));
}
