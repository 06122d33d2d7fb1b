//! Deterministic SMT-LIB2 emission for path conditions. Shared subterms
//! are let-bound per assertion so that DAG-shaped expressions never
//! explode into exponential text.

use super::expr::{
    width_mask, BinOp, BoolExpr, BoolNode, CmpOp, PathCondition, SymExpr, SymNode, SymRef, UnOp,
    VarId,
};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write;

/// Widths of every variable occurring in the condition, keyed by id.
pub fn collect_vars(pc: &PathCondition) -> BTreeMap<VarId, u32> {
    let mut vars = BTreeMap::new();
    let mut seen = HashSet::new();
    for c in pc.conjuncts() {
        collect_bool(c, &mut vars, &mut seen);
    }
    vars
}

fn collect_bool(
    e: &BoolExpr,
    vars: &mut BTreeMap<VarId, u32>,
    seen: &mut HashSet<*const SymExpr>,
) {
    match e.node() {
        BoolNode::True | BoolNode::False => {}
        BoolNode::Compare { lhs, rhs, .. } => {
            collect_sym(lhs, vars, seen);
            collect_sym(rhs, vars, seen);
        }
        BoolNode::Not(a) => collect_bool(a, vars, seen),
        BoolNode::And(a, b) | BoolNode::Or(a, b) => {
            collect_bool(a, vars, seen);
            collect_bool(b, vars, seen);
        }
    }
}

fn collect_sym(
    e: &SymRef,
    vars: &mut BTreeMap<VarId, u32>,
    seen: &mut HashSet<*const SymExpr>,
) {
    if !seen.insert(std::rc::Rc::as_ptr(e)) {
        return;
    }
    match e.node() {
        SymNode::Concrete(_) => {}
        SymNode::Variable { id, .. } => {
            vars.insert(*id, e.width());
        }
        SymNode::Unary { arg, .. }
        | SymNode::Extract { arg, .. }
        | SymNode::ZeroExtend { arg }
        | SymNode::SignExtend { arg } => collect_sym(arg, vars, seen),
        SymNode::Binary { lhs, rhs, .. } => {
            collect_sym(lhs, vars, seen);
            collect_sym(rhs, vars, seen);
        }
        SymNode::Concat { hi, lo } => {
            collect_sym(hi, vars, seen);
            collect_sym(lo, vars, seen);
        }
        SymNode::Ite { cond, then, els } => {
            collect_bool(cond, vars, seen);
            collect_sym(then, vars, seen);
            collect_sym(els, vars, seen);
        }
    }
}

/// Renders a `width`-bit constant: hex when the width is a nibble
/// multiple, binary otherwise.
pub fn literal(value: u64, width: u32) -> String {
    let value = value & width_mask(width);
    if width.is_multiple_of(4) {
        format!("#x{value:0>w$x}", w = width as usize / 4)
    } else {
        let mut s = String::with_capacity(width as usize + 2);
        s.push_str("#b");
        for i in (0..width).rev() {
            s.push(if value >> i & 1 == 1 { '1' } else { '0' });
        }
        s
    }
}

/// Emits the full script for one satisfiability query: declarations
/// sorted by variable id, one assertion per conjunct in path order, then
/// `(check-sat)` and `(get-model)`. Identical conditions produce
/// byte-identical text.
pub fn to_smtlib(pc: &PathCondition) -> String {
    let vars = collect_vars(pc);
    let mut out = String::new();
    out.push_str("(set-option :produce-models true)\n");
    out.push_str("(set-logic QF_BV)\n");
    for (id, width) in &vars {
        writeln!(out, "(declare-fun {id} () (_ BitVec {width}))").expect("string write");
    }
    for c in pc.conjuncts() {
        let mut emitter = Emitter::default();
        emitter.count_bool(c);
        let body = emitter.bool_text(c);
        writeln!(out, "(assert {})", emitter.wrap(body)).expect("string write");
    }
    out.push_str("(check-sat)\n");
    out.push_str("(get-model)\n");
    out
}

/// Per-assertion emitter: renders one boolean term, let-binding any
/// subterm referenced more than once (or expanded more than once by a
/// lowering) in first-completion order. Sharing is decided by counting
/// occurrences within the assertion itself, so the text depends only on
/// the term's structure.
#[derive(Default)]
struct Emitter {
    bindings: Vec<(String, String)>,
    sym_counts: HashMap<*const SymExpr, u32>,
    sym_memo: HashMap<*const SymExpr, String>,
    bool_memo: HashMap<*const BoolExpr, String>,
}

impl Emitter {
    fn count_bool(&mut self, e: &BoolExpr) {
        match e.node() {
            BoolNode::True | BoolNode::False => {}
            BoolNode::Compare { lhs, rhs, .. } => {
                self.count_sym(lhs);
                self.count_sym(rhs);
            }
            BoolNode::Not(a) => self.count_bool(a),
            BoolNode::And(a, b) | BoolNode::Or(a, b) => {
                self.count_bool(a);
                self.count_bool(b);
            }
        }
    }

    fn count_sym(&mut self, e: &SymRef) {
        let slot = self.sym_counts.entry(std::rc::Rc::as_ptr(e)).or_insert(0);
        *slot += 1;
        if *slot > 1 {
            return;
        }
        match e.node() {
            SymNode::Concrete(_) | SymNode::Variable { .. } => {}
            SymNode::Unary { arg, .. }
            | SymNode::Extract { arg, .. }
            | SymNode::ZeroExtend { arg }
            | SymNode::SignExtend { arg } => self.count_sym(arg),
            SymNode::Binary { lhs, rhs, .. } => {
                self.count_sym(lhs);
                self.count_sym(rhs);
            }
            SymNode::Concat { hi, lo } => {
                self.count_sym(hi);
                self.count_sym(lo);
            }
            SymNode::Ite { cond, then, els } => {
                self.count_bool(cond);
                self.count_sym(then);
                self.count_sym(els);
            }
        }
    }
    /// Nests accumulated bindings around the rendered body, innermost
    /// binding closest to the body so later bindings can use earlier ones.
    fn wrap(&self, body: String) -> String {
        let mut text = body;
        for (name, value) in self.bindings.iter().rev() {
            text = format!("(let (({name} {value})) {text})");
        }
        text
    }

    fn bind(&mut self, text: String) -> String {
        let name = format!("t{}", self.bindings.len());
        self.bindings.push((name.clone(), text));
        name
    }

    /// Renders a bit-vector term, memoizing by node identity. Anything
    /// non-atomic that is or may be referenced again becomes a binding.
    fn sym_text(&mut self, e: &SymRef) -> String {
        let key = std::rc::Rc::as_ptr(e);
        if let Some(t) = self.sym_memo.get(&key) {
            return t.clone();
        }
        let shared = self.sym_counts.get(&key).copied().unwrap_or(0) > 1;
        let w = e.width();
        let (text, atomic) = match e.node() {
            SymNode::Concrete(v) => (literal(*v, w), true),
            SymNode::Variable { id, .. } => (id.to_string(), true),
            SymNode::Unary { op, arg } => (self.unary_text(*op, arg, w), false),
            SymNode::Binary { op, lhs, rhs } => (self.binary_text(*op, lhs, rhs, w), false),
            SymNode::Extract { hi, lo, arg } => {
                let a = self.sym_text(arg);
                (format!("((_ extract {hi} {lo}) {a})"), false)
            }
            SymNode::Concat { hi, lo } => {
                let h = self.sym_text(hi);
                let l = self.sym_text(lo);
                (format!("(concat {h} {l})"), false)
            }
            SymNode::Ite { cond, then, els } => {
                let c = self.bool_text(cond);
                let t = self.sym_text(then);
                let f = self.sym_text(els);
                (format!("(ite {c} {t} {f})"), false)
            }
            SymNode::ZeroExtend { arg } => {
                let extra = w - arg.width();
                let a = self.sym_text(arg);
                (format!("((_ zero_extend {extra}) {a})"), false)
            }
            SymNode::SignExtend { arg } => {
                let extra = w - arg.width();
                let a = self.sym_text(arg);
                (format!("((_ sign_extend {extra}) {a})"), false)
            }
        };
        let rendered = if shared && !atomic {
            self.bind(text)
        } else {
            text
        };
        self.sym_memo.insert(key, rendered.clone());
        rendered
    }

    /// Renders the operand and forces a binding unless it is already a
    /// bare literal or name, for lowerings that repeat their operand.
    fn atom(&mut self, e: &SymRef) -> String {
        let text = self.sym_text(e);
        if text.starts_with('(') {
            let name = self.bind(text);
            self.sym_memo.insert(std::rc::Rc::as_ptr(e), name.clone());
            name
        } else {
            text
        }
    }

    fn binary_text(&mut self, op: BinOp, lhs: &SymRef, rhs: &SymRef, w: u32) -> String {
        let mnemonic = match op {
            BinOp::Add => "bvadd",
            BinOp::Sub => "bvsub",
            BinOp::Mul => "bvmul",
            BinOp::DivU => "bvudiv",
            BinOp::DivS => "bvsdiv",
            BinOp::RemU => "bvurem",
            BinOp::RemS => "bvsrem",
            BinOp::And => "bvand",
            BinOp::Or => "bvor",
            BinOp::Xor => "bvxor",
            BinOp::Shl | BinOp::ShrU | BinOp::ShrS | BinOp::Rotl | BinOp::Rotr => {
                return self.shift_text(op, lhs, rhs, w);
            }
        };
        let l = self.sym_text(lhs);
        let r = self.sym_text(rhs);
        format!("({mnemonic} {l} {r})")
    }

    /// Wasm shifts take the amount modulo the width, so the raw amount is
    /// masked before the SMT shift. Rotates additionally need lowering to
    /// a shift pair because SMT-LIB only rotates by constants; the
    /// opposing shift saturates to zero when the masked amount is zero.
    fn shift_text(&mut self, op: BinOp, lhs: &SymRef, rhs: &SymRef, w: u32) -> String {
        let mask = literal(w as u64 - 1, w);
        let l = self.atom(lhs);
        let r = self.sym_text(rhs);
        let k = format!("(bvand {r} {mask})");
        match op {
            BinOp::Shl => format!("(bvshl {l} {k})"),
            BinOp::ShrU => format!("(bvlshr {l} {k})"),
            BinOp::ShrS => format!("(bvashr {l} {k})"),
            BinOp::Rotl | BinOp::Rotr => {
                let k = self.bind(k);
                let back = format!("(bvsub {} {k})", literal(w as u64, w));
                if op == BinOp::Rotl {
                    format!("(bvor (bvshl {l} {k}) (bvlshr {l} {back}))")
                } else {
                    format!("(bvor (bvlshr {l} {k}) (bvshl {l} {back}))")
                }
            }
            _ => unreachable!("only shifts and rotates are lowered here"),
        }
    }

    /// Lowers count-leading/trailing-zeros and popcount, which have no
    /// SMT-LIB primitives, into extract chains over a bound operand.
    fn unary_text(&mut self, op: UnOp, arg: &SymRef, w: u32) -> String {
        let a = self.atom(arg);
        match op {
            UnOp::Clz | UnOp::Ctz => {
                let mut text = literal(w as u64, w);
                // Build the ite chain inside out, from the last-checked
                // bit back to the first.
                for step in (0..w).rev() {
                    let bit = if op == UnOp::Clz { w - 1 - step } else { step };
                    text = format!(
                        "(ite (= ((_ extract {bit} {bit}) {a}) #b1) {} {text})",
                        literal(step as u64, w),
                    );
                }
                text
            }
            UnOp::Popcnt => {
                if w == 1 {
                    return a;
                }
                let mut sum = format!("((_ zero_extend {}) ((_ extract 0 0) {a}))", w - 1);
                for bit in 1..w {
                    sum = format!(
                        "(bvadd {sum} ((_ zero_extend {}) ((_ extract {bit} {bit}) {a})))",
                        w - 1,
                    );
                }
                sum
            }
        }
    }

    fn bool_text(&mut self, e: &BoolExpr) -> String {
        let key = e as *const BoolExpr;
        if let Some(t) = self.bool_memo.get(&key) {
            return t.clone();
        }
        let text = match e.node() {
            BoolNode::True => "true".to_string(),
            BoolNode::False => "false".to_string(),
            BoolNode::Compare { op, lhs, rhs } => {
                let l = self.sym_text(lhs);
                let r = self.sym_text(rhs);
                match op {
                    CmpOp::Eq => format!("(= {l} {r})"),
                    CmpOp::Ne => format!("(not (= {l} {r}))"),
                    CmpOp::LtU => format!("(bvult {l} {r})"),
                    CmpOp::LtS => format!("(bvslt {l} {r})"),
                    CmpOp::LeU => format!("(bvule {l} {r})"),
                    CmpOp::LeS => format!("(bvsle {l} {r})"),
                    CmpOp::GtU => format!("(bvult {r} {l})"),
                    CmpOp::GtS => format!("(bvslt {r} {l})"),
                    CmpOp::GeU => format!("(bvule {r} {l})"),
                    CmpOp::GeS => format!("(bvsle {r} {l})"),
                }
            }
            BoolNode::Not(a) => format!("(not {})", self.bool_text(a)),
            BoolNode::And(a, b) => {
                let x = self.bool_text(a);
                let y = self.bool_text(b);
                format!("(and {x} {y})")
            }
            BoolNode::Or(a, b) => {
                let x = self.bool_text(a);
                let y = self.bool_text(b);
                format!("(or {x} {y})")
            }
        };
        self.bool_memo.insert(key, text.clone());
        text
    }
}

#[cfg(test)]
mod tests {
    use super::super::expr::{
        eval_binary, eval_compare, BinOp, BoolExpr, CmpOp, Origin, SymExpr, VarId,
    };
    use super::*;

    #[test]
    fn literals_pick_hex_or_binary_by_width() {
        assert_eq!(literal(7, 32), "#x00000007");
        assert_eq!(literal(0xAB, 8), "#xab");
        assert_eq!(literal(5, 3), "#b101");
        assert_eq!(literal(u64::MAX, 64), "#xffffffffffffffff");
    }

    #[test]
    fn empty_condition_emits_bare_query() {
        let pc = PathCondition::new();
        assert_eq!(
            to_smtlib(&pc),
            "(set-option :produce-models true)\n(set-logic QF_BV)\n(check-sat)\n(get-model)\n"
        );
    }

    #[test]
    fn one_equality_declares_and_asserts() {
        let x = SymExpr::variable(VarId(0), 32, Origin::Other, "x");
        let seven = SymExpr::concrete(7, 32);
        let mut pc = PathCondition::new();
        pc.push(eval_compare(CmpOp::Eq, &x, &seven).unwrap());
        let text = to_smtlib(&pc);
        assert!(text.contains("(declare-fun v0 () (_ BitVec 32))"));
        assert!(text.contains("(assert (= v0 #x00000007))"));
    }

    #[test]
    fn shared_subterms_are_let_bound_once() {
        let x = SymExpr::variable(VarId(3), 64, Origin::ActionData, "x");
        let y = SymExpr::variable(VarId(5), 64, Origin::Other, "y");
        let sum = eval_binary(BinOp::Add, &x, &y).unwrap();
        let doubled = eval_binary(BinOp::Mul, &sum, &sum).unwrap();
        let mut pc = PathCondition::new();
        pc.push(eval_compare(CmpOp::Ne, &doubled, &x).unwrap());
        let text = to_smtlib(&pc);
        assert_eq!(text.matches("(bvadd v3 v5)").count(), 1, "{text}");
        assert!(text.contains("(let ((t0 (bvadd v3 v5)))"));
        assert!(text.contains("(bvmul t0 t0)"));
    }

    #[test]
    fn identical_structures_emit_identical_text() {
        let build = || {
            let x = SymExpr::variable(VarId(1), 64, Origin::ApplyCode, "code");
            let y = SymExpr::variable(VarId(2), 64, Origin::ApplyAction, "action");
            let mut pc = PathCondition::new();
            pc.push(eval_compare(CmpOp::Ne, &x, &SymExpr::concrete(42, 64)).unwrap());
            let rot = eval_binary(BinOp::Rotl, &y, &x).unwrap();
            pc.push(eval_compare(CmpOp::GtU, &rot, &y).unwrap());
            pc.push(BoolExpr::not(
                &eval_compare(CmpOp::Eq, &x, &y).unwrap(),
            ));
            to_smtlib(&pc)
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn variables_inside_ite_conditions_are_declared() {
        let flag = SymExpr::variable(VarId(9), 32, Origin::CallData, "flag");
        let a = SymExpr::variable(VarId(4), 64, Origin::Other, "a");
        let cond = eval_compare(CmpOp::Ne, &flag, &SymExpr::concrete(0, 32)).unwrap();
        let chosen = super::super::expr::ite(&cond, &a, &SymExpr::concrete(1, 64)).unwrap();
        let mut pc = PathCondition::new();
        pc.push(eval_compare(CmpOp::Eq, &chosen, &SymExpr::concrete(1, 64)).unwrap());
        let vars = collect_vars(&pc);
        assert_eq!(vars.get(&VarId(9)), Some(&32));
        assert_eq!(vars.get(&VarId(4)), Some(&64));
        let text = to_smtlib(&pc);
        assert!(text.contains("(declare-fun v4 () (_ BitVec 64))"));
        assert!(text.contains("(declare-fun v9 () (_ BitVec 32))"));
    }

    #[test]
    fn gt_and_ge_swap_operands_instead_of_new_mnemonics() {
        let x = SymExpr::variable(VarId(0), 32, Origin::Other, "x");
        let five = SymExpr::concrete(5, 32);
        let mut pc = PathCondition::new();
        pc.push(eval_compare(CmpOp::GtU, &x, &five).unwrap());
        pc.push(eval_compare(CmpOp::GeS, &x, &five).unwrap());
        let text = to_smtlib(&pc);
        assert!(text.contains("(assert (bvult #x00000005 v0))"));
        assert!(text.contains("(assert (bvsle #x00000005 v0))"));
        assert!(!text.contains("bvugt"));
    }

    #[test]
    fn rotate_lowering_repeats_no_operands() {
        let x = SymExpr::variable(VarId(0), 8, Origin::Other, "x");
        let n = SymExpr::variable(VarId(1), 8, Origin::Other, "n");
        let spun = eval_binary(BinOp::Rotr, &x, &n).unwrap();
        let mut pc = PathCondition::new();
        pc.push(eval_compare(CmpOp::Eq, &spun, &x).unwrap());
        let text = to_smtlib(&pc);
        // The masked amount is bound once and reused, not recomputed.
        assert_eq!(text.matches("(bvand v1 #x07)").count(), 1, "{text}");
    }
}
