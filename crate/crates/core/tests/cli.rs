use std::path::PathBuf;
use std::process::Command;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_jetkcc")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn invariants_report_is_json_and_passes() {
    let (code, out) = run(&["invariants", &data("oscillator.json"), "--samples", "3"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["command"], "invariants");
}

#[test]
fn check_commands_pass_on_sample_problems() {
    assert_eq!(run(&["check", "jacobi", &data("sphere.json")]).0, 0);
    assert_eq!(run(&["check", "fd", &data("affine.json")]).0, 0);
    assert_eq!(run(&["check", "transform", &data("affine.json"), &data("change_affine.json")]).0, 0);
}

#[test]
fn malformed_input_exits_with_input_error() {
    assert_eq!(run(&["invariants", &data("duplicate.json")]).0, 2);
    assert_eq!(run(&["invariants", &data("does_not_exist.json")]).0, 2);
}
