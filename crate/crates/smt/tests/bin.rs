//! Drives the solver binary over stdin/stdout the way a client process would.

use std::io::Write;
use std::process::{Command, Stdio};

fn run(script: &str) -> String {
    let mut child = Command::new(env!("CARGO_BIN_EXE_wana-smt"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .expect("spawn solver binary");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(script.as_bytes())
        .expect("write script");
    let output = child.wait_with_output().expect("collect output");
    assert!(output.status.success(), "solver exited with {:?}", output.status);
    String::from_utf8(output.stdout).expect("utf8 output")
}

#[test]
fn answers_check_sat_over_pipes() {
    let out = run(
        "(set-option :produce-models true)(set-logic QF_BV)\
         (declare-const v0 (_ BitVec 64))\
         (assert (= v0 #x00000000000000ff))(check-sat)(get-model)(exit)",
    );
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("sat"));
    assert!(out.contains("(define-fun v0 () (_ BitVec 64) #x00000000000000ff)"));
}

#[test]
fn reports_unsat_without_model() {
    let out = run(
        "(declare-const a (_ BitVec 8))\
         (assert (bvult a #x02))(assert (bvugt a #x05))(check-sat)(get-model)",
    );
    assert_eq!(out, "unsat\n(error \"model is not available\")\n");
}

#[test]
fn malformed_input_yields_in_band_error() {
    let out = run("(assert (= broken");
    assert!(out.starts_with("(error "), "got: {out}");
}
