use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gesturegen"))
        .current_dir(dir)
        .arg("--sessions-dir")
        .arg(dir.join("sessions"))
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scripted(name: &str) -> String {
    format!("scripted:{}", fixture(name).display())
}

#[test]
fn generate_refine_finalize() {
    let dir = tempfile::tempdir().unwrap();
    let backend = scripted("stop.txt");
    let rec = ok_json(&run(dir.path(), &["--json", "generate", "--gesture", "stop", "--backend", &backend]));
    assert_eq!(rec["gesture"], "stop");
    assert_eq!(rec["latest"]["index"], 1);
    let id = rec["session_id"].as_str().unwrap().to_string();

    let rec = ok_json(&run(dir.path(), &["--json", "refine", &id, "higher please"]));
    assert_eq!(rec["refinements"], 1);
    assert_eq!(rec["latest"]["index"], 2);
    assert!(rec["latest"]["feedback"].is_null());

    let exports = dir.path().join("out");
    let fin = ok_json(&run(
        dir.path(),
        &["--json", "finalize", &id, "--export-dir", exports.to_str().unwrap()],
    ));
    assert_eq!(fin["feasible"], true);
    assert_eq!(fin["finalized"]["samples"], 226);
    let session_dir = exports.join(&id);
    for f in ["stop.gesture", "trajectory.csv", "metrics.json"] {
        assert!(session_dir.join(f).is_file(), "{f} missing");
    }

    let shown = ok_json(&run(dir.path(), &["--json", "show", &id]));
    assert_eq!(shown["status"], "finalized");
    assert_eq!(shown["iterations"].as_array().unwrap().len(), 2);
    assert_eq!(shown["iterations"][0]["feedback"], "higher please");

    let listed = ok_json(&run(dir.path(), &["--json", "sessions"]));
    assert_eq!(listed.as_array().unwrap().len(), 1);

    let csv = session_dir.join("trajectory.csv");
    let m = ok_json(&run(dir.path(), &["--json", "metrics", csv.to_str().unwrap()]));
    assert_eq!(m["samples"], 226);
    assert!(m["metrics"]["right"]["path_length"].as_f64().unwrap() > 0.0);
}

#[test]
fn instruction_runs_analysis_then_generation() {
    let dir = tempfile::tempdir().unwrap();
    let backend = scripted("confusion.txt");
    let rec = ok_json(&run(
        dir.path(),
        &["--json", "generate", "--instruction", "Express confusion with only gestures", "--backend", &backend],
    ));
    assert_eq!(rec["gesture"], "spread-hands");
    assert_eq!(rec["novel_gesture"], false);
    assert!(rec["analysis"]["narrative"].as_str().unwrap().contains("confusion"));
    let stages: Vec<_> = rec["latest"]["calls"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["stage"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(stages, ["analyze", "generate"]);
}

#[test]
fn missing_api_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["generate", "--gesture", "okay"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("OPENAI_API_KEY"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["refine"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["generate"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["generate", "--backend", "nonsense", "--gesture", "okay"]).status.code(), Some(2));
}

#[test]
fn unknown_session_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["show", "00000000-0000-0000-0000-000000000000"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn export_then_validate_and_measure() {
    let dir = tempfile::tempdir().unwrap();
    let lib = dir.path().join("lib");
    assert!(run(dir.path(), &["export-gestures", lib.to_str().unwrap()]).status.success());
    let okay = lib.join("okay.gesture");
    assert!(okay.is_file());
    let out = run(dir.path(), &["validate", okay.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));

    let cols = dir.path().join("okay.csv");
    let m = ok_json(&run(
        dir.path(),
        &["--json", "metrics", okay.to_str().unwrap(), "--rate", "100", "--columns", cols.to_str().unwrap()],
    ));
    assert_eq!(m["samples"], 451);
    let text = std::fs::read_to_string(&cols).unwrap();
    assert_eq!(text.lines().count(), 452);
}

#[test]
fn validate_rejects_out_of_bounds_file() {
    let dir = tempfile::tempdir().unwrap();
    let lib = dir.path().join("lib");
    assert!(run(dir.path(), &["export-gestures", lib.to_str().unwrap()]).status.success());
    let path = lib.join("okay.gesture");
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    doc["sequence"]["states"][2]["left"]["position"][0] = 0.95.into();
    let bad_path = dir.path().join("bad.gesture");
    std::fs::write(&bad_path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    let out = run(dir.path(), &["validate", bad_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
