use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kwprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kwprep")).args(args).env_remove("KWPREP_GROUP_CATALOG").output().unwrap()
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn nil2_prepare_reports_one_shot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = kwprep(&[
        "prepare",
        "--group",
        "D4",
        "--cell",
        "hexagon",
        "--protocol",
        "nil2",
        "--mode",
        "sample:42",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    let run = &r["runs"][0];
    assert_eq!(run["transcript"]["shots"], 1);
    let min = run["stabilizers"]["vertex"]
        .as_array()
        .unwrap()
        .iter()
        .chain(run["stabilizers"]["plaquette"].as_array().unwrap())
        .map(|x| x.as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(min >= 1.0 - 1e-9);
    assert_eq!(run["syndrome_deviation"], 0.0);
}

#[test]
fn toric_code_prepare_postselected() {
    let o = kwprep(&["prepare", "--group", "Z2", "--cell", "square:2x2", "--protocol", "abelian", "--oracle"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["runs"][0]["transcript"]["fidelity_vs_oracle"], 1.0);
    assert_eq!(r["runs"][0]["stabilizers"]["vertex"].as_array().unwrap().len(), 4);
}

#[test]
fn a5_is_rejected_with_its_perfect_core() {
    let o = kwprep(&["prepare", "--group", "A5", "--protocol", "solvable"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "not_solvable");
    assert_eq!(err["error"]["detail"]["core"], "A5");
}

#[test]
fn bad_arguments_are_precondition_failures() {
    assert_eq!(kwprep(&["prepare", "--group", "D4", "--mode", "sometimes"]).status.code(), Some(1));
    assert_eq!(kwprep(&["prepare", "--group", "Nope"]).status.code(), Some(1));
    assert_eq!(kwprep(&["prepare", "--group", "S3", "--protocol", "abelian"]).status.code(), Some(1));
    assert_eq!(kwprep(&["prepare", "--group", "S3", "--bogus"]).status.code(), Some(1));
    assert_eq!(kwprep(&["groups"]).status.code(), Some(1));
}

#[test]
fn tolerance_failures_exit_two() {
    // on the torus the one-shot nil-2 output lies in a different ground-state sector than the oracle
    let o = kwprep(&["prepare", "--group", "Q8", "--protocol", "nil2", "--mode", "sample:1", "--oracle"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_identities_for_s3() {
    let o = kwprep(&["verify", "--suite", "identities", "--group", "S3"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    for row in r["rows"].as_array().unwrap() {
        assert!(row["deviation"].as_f64().unwrap() <= 1e-10, "{row}");
    }
}

#[test]
fn verify_gsd_and_stabilizers() {
    let o = kwprep(&["verify", "--suite", "gsd", "--group", "Z2", "--group", "S3"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["rows"][0]["projector_rank"], 4);
    assert_eq!(r["rows"][1]["projector_rank"], 8);
    let o = kwprep(&["verify", "--suite", "stabilizers", "--group", "Q8"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn derived_series_queries() {
    let o = kwprep(&["groups", "--derived-series", "S4", "--center", "D4"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["derived_series"]["orders"], serde_json::json!([24, 12, 4, 1]));
    assert_eq!(r["derived_series"]["derived_length"], 3);
    assert_eq!(r["center"]["order"], 2);
    let o = kwprep(&["groups", "--derived-series", "Z6"]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["derived_series"]["derived_length"], 1);
    let o = kwprep(&["groups", "--derived-series", "A5"]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["derived_series"]["perfect_core"]["name"], "A5");
}

#[test]
fn factor_system_dump() {
    let o = kwprep(&["groups", "--factor-system", "Q8"]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let systems = r["factor_systems"]["systems"].as_array().unwrap();
    assert_eq!(systems[0]["source"], "definition");
    assert_eq!(systems[0]["factor_system"]["nil2"], true);
}

#[test]
fn catalog_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("catalog.json");
    std::fs::write(&path, r#"[{"name": "K4", "order": 4, "mult_table": [[0,1,2,3],[1,0,3,2],[2,3,0,1],[3,2,1,0]]}]"#)
        .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kwprep"))
        .args(["groups", "--center", "K4"])
        .env("KWPREP_GROUP_CATALOG", &path)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["center"]["order"], 4);
}

#[test]
fn forced_mode_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let forced = dir.path().join("forced.json");
    std::fs::write(&forced, r#"{"v0": 1, "v1": 2}"#).unwrap();
    let mode = format!("forced:{}", forced.display());
    let o = kwprep(&["prepare", "--group", "Z3", "--protocol", "abelian", "--mode", &mode, "--oracle"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let outcomes = r["runs"][0]["transcript"]["rounds"][0]["outcomes"].as_array().unwrap();
    assert_eq!(outcomes[0]["site"], "v0");
    assert_eq!(outcomes[1]["outcome"], 2);
    assert!(r["runs"][0]["transcript"]["fidelity_vs_oracle"].as_f64().unwrap() > 1.0 - 1e-9);
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    for workers in ["1", "4"] {
        let out = dir.path().join(format!("w{workers}.json"));
        let o = kwprep(&[
            "prepare",
            "--group",
            "S3",
            "--mode",
            "sample:5",
            "--runs",
            "4",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        seen.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(seen[0], seen[1]);
}
