//! A small QF_BV solver that speaks the SMT-LIB2 text protocol.
//!
//! Scripts go in as text, answers come out as text: `sat`/`unsat` lines for
//! each `(check-sat)` and a z3-style `(define-fun ...)` block for
//! `(get-model)`. Satisfiability is decided by bit blasting to CNF and
//! running the varisat CDCL solver, so the crate has no external solver
//! dependency and behaves identically on every host.
//!
//! Only the fragment needed for bit-vector path constraints is supported:
//! zero-arity declarations, assertions, `check-sat`, `get-model`, and `exit`.
//! Unsupported commands and ill-sorted terms produce in-band
//! `(error "...")` lines, the way command-line solvers report them.

pub mod blast;
pub mod parse;
pub mod sexpr;
pub mod term;

use parse::{Command, Context};
use term::Sort;

/// Runs a complete SMT-LIB2 script and returns everything the solver would
/// print on stdout.
pub fn run_script(input: &str) -> String {
    let mut out = String::new();
    let forms = match sexpr::parse_all(input) {
        Ok(forms) => forms,
        Err(e) => {
            out.push_str(&format!("(error \"{e}\")\n"));
            return out;
        }
    };

    let mut ctx = Context::new();
    let mut assertions = Vec::new();
    let mut model: Option<Vec<Vec<bool>>> = None;
    let mut checked = false;

    for form in &forms {
        match ctx.command(form) {
            Err(e) => out.push_str(&format!("(error \"{e}\")\n")),
            Ok(Command::Nop) | Ok(Command::Declare(_)) => {}
            Ok(Command::Assert(t)) => assertions.push(t),
            Ok(Command::CheckSat) => {
                checked = true;
                match blast::check(&ctx, &assertions) {
                    Ok(outcome) => {
                        out.push_str(if outcome.sat { "sat\n" } else { "unsat\n" });
                        model = outcome.model;
                    }
                    Err(e) => {
                        out.push_str(&format!("(error \"{e}\")\n"));
                        model = None;
                    }
                }
            }
            Ok(Command::GetModel) => match (&model, checked) {
                (Some(values), _) => out.push_str(&format_model(&ctx, values)),
                _ => out.push_str("(error \"model is not available\")\n"),
            },
            Ok(Command::Exit) => break,
        }
    }
    out
}

fn format_model(ctx: &Context, values: &[Vec<bool>]) -> String {
    let mut out = String::from("(\n");
    for (decl, bits) in ctx.decls.iter().zip(values) {
        match decl.sort {
            Sort::Bool => {
                let v = if bits.first().copied().unwrap_or(false) {
                    "true"
                } else {
                    "false"
                };
                out.push_str(&format!("  (define-fun {} () Bool {v})\n", decl.name));
            }
            Sort::BitVec(w) => {
                out.push_str(&format!(
                    "  (define-fun {} () (_ BitVec {w}) {})\n",
                    decl.name,
                    format_bits(bits)
                ));
            }
        }
    }
    out.push_str(")\n");
    out
}

/// Formats LSB-first bits as an SMT-LIB numeral, hex when the width allows.
fn format_bits(bits: &[bool]) -> String {
    if bits.len().is_multiple_of(4) {
        let mut s = String::from("#x");
        for nibble in bits.chunks(4).rev() {
            let mut v = 0u32;
            for (i, &b) in nibble.iter().enumerate() {
                v |= (b as u32) << i;
            }
            s.push(char::from_digit(v, 16).expect("nibble in range"));
        }
        s
    } else {
        let mut s = String::from("#b");
        for &b in bits.iter().rev() {
            s.push(if b { '1' } else { '0' });
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_sat_and_unsat() {
        let out = run_script("(assert true)(check-sat)");
        assert_eq!(out, "sat\n");
        let out = run_script("(assert false)(check-sat)");
        assert_eq!(out, "unsat\n");
    }

    #[test]
    fn contradiction_over_a_variable_is_unsat() {
        let out = run_script(
            "(declare-const x (_ BitVec 8))\
             (assert (= x #x01))(assert (= x #x02))(check-sat)",
        );
        assert_eq!(out, "unsat\n");
    }

    #[test]
    fn let_bindings_scope_and_shadow() {
        // Shadowing: the body's x is the bound 7, not the declared x = 3,
        // so the conjunction is satisfiable.
        let out = run_script(
            "(declare-const x (_ BitVec 8))\
             (assert (= x #x03))\
             (assert (let ((x #x07)) (= x #x07)))\
             (check-sat)",
        );
        assert_eq!(out, "sat\n");
        // Parallel semantics: b's right-hand side reads the outer a = 5,
        // not the sibling binding a = 1.
        let out = run_script(
            "(declare-const a (_ BitVec 8))\
             (assert (= a #x05))\
             (assert (let ((a #x01) (b a)) (= b #x05)))\
             (check-sat)",
        );
        assert_eq!(out, "sat\n");
        let out = run_script("(assert (let ((p true) (q false)) (or q p)))(check-sat)");
        assert_eq!(out, "sat\n");
    }

    #[test]
    fn model_lists_every_declaration() {
        let out = run_script(
            "(declare-const x (_ BitVec 8))(declare-const unused (_ BitVec 16))\
             (assert (= x #x2a))(check-sat)(get-model)",
        );
        assert!(out.starts_with("sat\n"), "got: {out}");
        assert!(out.contains("(define-fun x () (_ BitVec 8) #x2a)"), "got: {out}");
        assert!(out.contains("(define-fun unused () (_ BitVec 16) #x"), "got: {out}");
    }

    #[test]
    fn model_is_unavailable_after_unsat() {
        let out = run_script("(assert false)(check-sat)(get-model)");
        assert_eq!(out, "unsat\n(error \"model is not available\")\n");
    }

    #[test]
    fn errors_are_reported_in_band() {
        let out = run_script("(push 1)");
        assert_eq!(out, "(error \"unsupported command push\")\n");
        let out = run_script("(assert (bvadd #x01 #b0))(check-sat)");
        assert!(out.starts_with("(error "), "got: {out}");
    }

    #[test]
    fn exit_stops_processing() {
        let out = run_script("(assert true)(check-sat)(exit)(check-sat)");
        assert_eq!(out, "sat\n");
    }

    #[test]
    fn bool_declarations_print_as_booleans() {
        let out = run_script(
            "(declare-const p Bool)(assert p)(check-sat)(get-model)",
        );
        assert!(out.contains("(define-fun p () Bool true)"), "got: {out}");
    }

    #[test]
    fn odd_widths_print_binary_numerals() {
        let out = run_script(
            "(declare-const x (_ BitVec 3))(assert (= x #b101))(check-sat)(get-model)",
        );
        assert!(out.contains("(define-fun x () (_ BitVec 3) #b101)"), "got: {out}");
    }
}
