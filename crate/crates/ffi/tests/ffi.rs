use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use jetkcc_ffi::*;

const OSCILLATOR: &str = r#"{"m": 1, "n": 1, "temporal_metric": [["1"]],
  "system": {"F": [{"i": 1, "alpha": 1, "beta": 1, "expr": "x1"}]}}"#;

fn load(json: &str) -> *mut JkProblem {
    let text = CString::new(json).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { jk_problem_from_json(text.as_ptr(), &mut p) }, JkStatus::Ok);
    p
}

fn last_error() -> String {
    let e = jk_last_error();
    assert!(!e.is_null());
    unsafe { CStr::from_ptr(e) }.to_string_lossy().into_owned()
}

#[test]
fn oscillator_through_the_c_abi() {
    let p = load(OSCILLATOR);
    let (mut m, mut n, mut len) = (0, 0, 0);
    unsafe {
        assert_eq!(jk_problem_dims(p, &mut m, &mut n), JkStatus::Ok);
        assert_eq!((m, n), (1, 1));
        assert_eq!(jk_invariant_len(p, JkInvariant::P, &mut len), JkStatus::Ok);
        assert_eq!(len, 1);
        let (t, x, v) = ([0.3], [0.7], [-1.1]);
        let mut out = [0.0];
        let s = jk_evaluate_invariant(p, JkInvariant::Epsilon, t.as_ptr(), x.as_ptr(), v.as_ptr(), out.as_mut_ptr(), 1);
        assert_eq!(s, JkStatus::Ok);
        assert_eq!(out[0], -0.7);
        let s = jk_evaluate_invariant(p, JkInvariant::P, t.as_ptr(), x.as_ptr(), v.as_ptr(), out.as_mut_ptr(), 1);
        assert_eq!(s, JkStatus::Ok);
        assert_eq!(out[0], -1.0);
        let s = jk_evaluate_invariant(p, JkInvariant::P, t.as_ptr(), x.as_ptr(), v.as_ptr(), out.as_mut_ptr(), 0);
        assert_eq!(s, JkStatus::BufferTooSmall);
        jk_problem_free(p);
    }
}

#[test]
fn reports_are_deterministic_strings() {
    let p = load(OSCILLATOR);
    unsafe {
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(jk_invariants_report(p, 3, 5, &mut a), JkStatus::Ok);
        assert_eq!(jk_invariants_report(p, 3, 5, &mut b), JkStatus::Ok);
        assert_eq!(CStr::from_ptr(a), CStr::from_ptr(b));
        assert!(CStr::from_ptr(a).to_str().unwrap().contains("\"invariants\""));
        jk_string_free(a);
        jk_string_free(b);
        jk_problem_free(p);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let bad = CString::new(r#"{"m": 1, "n": 1, "temporal_metric": [["1"]], "system": {"F": []}}"#).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { jk_problem_from_json(bad.as_ptr(), &mut p) }, JkStatus::InvalidInput);
    assert!(last_error().contains("missing F component"));
    assert!(p.is_null());
    assert_eq!(unsafe { jk_problem_from_json(ptr::null(), &mut p) }, JkStatus::NullPointer);

    let singular = load(r#"{"m": 1, "n": 1, "temporal_metric": [["t1"]],
      "system": {"F": [{"i": 1, "alpha": 1, "beta": 1, "expr": "0"}]}}"#);
    let mut out = [0.0];
    let z = [0.0];
    let s = unsafe { jk_evaluate_invariant(singular, JkInvariant::P, z.as_ptr(), z.as_ptr(), z.as_ptr(), out.as_mut_ptr(), 1) };
    assert_eq!(s, JkStatus::Numeric, "{}", last_error());
    unsafe { jk_problem_free(singular) };
}

#[test]
fn nullspace_dimension_for_flat_metrics() {
    for m in 2..=4usize {
        let h: Vec<f64> = (0..m * m).map(|k| if k % (m + 1) == 0 { 1.0 } else { 0.0 }).collect();
        let mut dim = 0;
        assert_eq!(unsafe { jk_nullspace_dimension(h.as_ptr(), m, &mut dim) }, JkStatus::Ok);
        assert_eq!(dim, m * (m - 1) / 2);
    }
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/jetkcc.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["jk_problem_load", "jk_evaluate_invariant", "jk_last_error", "JK_STATUS_NUMERIC", "typedef struct JkProblem"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
