use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use rlen::pipeline::{read_matrix_csv, run_pipeline, InputSource, RunConfig};
use rlen::simulate::{CaseMatrixSpec, ModelSpec};

fn rlen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlen")).args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = rlen(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulated_csv_through_the_binary_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("case3.csv");
    let report = dir.path().join("report.json");
    let spec = dir.path().join("spec.json");
    let small = CaseMatrixSpec {
        spec1: ModelSpec::case3_model1(),
        spec2: ModelSpec::case3_model2(),
        p1: 8,
        p2: 8,
        n: 150,
        seed: 0,
    };
    std::fs::write(&spec, serde_json::to_string(&small).unwrap()).unwrap();
    let st = rlen(&["simulate", "--simulate", s(&spec), "--seed", "5", "--output", s(&csv)]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let matrix = read_matrix_csv(&csv).unwrap();
    assert_eq!((matrix.n_rows(), matrix.n_cols()), (150, 16));

    let st = rlen(&["pipeline", "--input", s(&csv), "--m", "1", "--output", s(&report)]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let cli: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();

    let lib = run_pipeline(&RunConfig {
        m: Some(1),
        ..RunConfig::new(InputSource::Csv(csv.clone()))
    })
    .unwrap();
    assert_eq!(cli["values"], serde_json::to_value(&lib.values).unwrap());
    assert_eq!(cli["changepoints"], serde_json::to_value(&lib.changepoints).unwrap());

    // rerunning from the saved report's configuration reproduces it byte for byte
    let again = dir.path().join("again.json");
    assert!(rlen(&["pipeline", "--config", s(&report), "--output", s(&again)]).status.success());
    assert_eq!(std::fs::read(&report).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn exit_codes_follow_the_error_class() {
    // usage
    assert_eq!(rlen(&["pipeline"]).status.code(), Some(2));
    assert_eq!(rlen(&["detect", "--input", "x.csv", "--min-seg", "many"]).status.code(), Some(2));
    // input / domain
    assert_eq!(rlen(&["detect", "--input", "/nonexistent/file.csv"]).status.code(), Some(3));
    assert_eq!(rlen(&["oracle", "ar2", "--phi1", "1.2", "--phi2", "0.3"]).status.code(), Some(3));
    // numerical: a constant series leaves nothing to regress on
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    std::fs::write(&flat, "0.5,0.5\n".repeat(60)).unwrap();
    let out = rlen(&["select-lag", "--input", s(&flat), "--M", "2"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oracles_print_closed_forms() {
    let v = ok_json(&["oracle", "ar2", "--phi1", "0.8", "--phi2", "-0.3"]);
    let x = v.as_f64().or_else(|| v["value"].as_f64()).unwrap();
    assert!((x - 0.285_124_522_118_395_84).abs() < 1e-12);
    let v = ok_json(&["oracle", "matched-variance", "--phi-x", "0.8,-0.3,0.1", "--phi-y", "0.7,-0.3,0.1", "--sigma1-sq", "0.1"]);
    let x = v.as_f64().or_else(|| v["value"].as_f64()).unwrap();
    assert!((x - 0.1168).abs() < 1e-4);
}

#[test]
fn constants_of_the_default_kernel() {
    let v = ok_json(&["constants"]);
    assert!((v["kernel"]["kappa"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert!((v["kernel"]["tau"].as_f64().unwrap() - 0.88125).abs() < 1e-12);
    assert_eq!(v["theory"]["c2"].as_f64(), Some(0.0));
}

#[test]
fn column_commands_on_a_small_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let body: String = (0..80)
        .map(|i| {
            let t = i as f64;
            format!("{},{}\n", 0.5 + 0.4 * (t * 0.7).sin(), 0.5 + 0.3 * (t * 1.3).cos())
        })
        .collect();
    std::fs::write(&csv, format!("left,right\n{body}")).unwrap();

    let e = ok_json(&["entropy", "--input", s(&csv), "--m", "1"]);
    assert_eq!(e["values"].as_array().unwrap().len(), 2);
    let a = ok_json(&["apen", "--input", s(&csv)]);
    assert_eq!(a["values"].as_array().unwrap().len(), 2);

    let vals = dir.path().join("v.csv");
    std::fs::write(&vals, "0.1\n0.12\n0.11\n0.13\n0.9\n0.92\n0.91\n0.93\n").unwrap();
    let d = ok_json(&["detect", "--input", s(&vals), "--penalty", "0.01"]);
    assert_eq!(d["changepoints"], serde_json::json!([5]));
    assert_eq!(d["segments"].as_array().unwrap().len(), 2);
}
