//! Translation from s-expressions to sorted terms and script commands.

use crate::sexpr::SExpr;
use crate::term::{BvBinOp, BvCmpOp, Sort, Term, TermArena, TermId};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unsupported command {0}")]
    UnsupportedCommand(String),
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("{op} expects {expected} arguments, got {got}")]
    Arity {
        op: String,
        expected: &'static str,
        got: usize,
    },
    #[error("sort mismatch in {op}")]
    SortMismatch { op: String },
    #[error("bad numeral {0}")]
    BadNumeral(String),
    #[error("bit-vector width {0} out of range")]
    WidthOutOfRange(u64),
    #[error("symbol {0} is already declared")]
    Redeclared(String),
}

#[derive(Debug, Clone)]
pub struct Declaration {
    pub name: String,
    pub sort: Sort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Accepted and otherwise ignored: set-logic, set-option, set-info.
    Nop,
    Declare(u32),
    Assert(TermId),
    CheckSat,
    GetModel,
    Exit,
}

/// Per-script state: declarations and the term arena they live in.
#[derive(Default)]
pub struct Context {
    pub arena: TermArena,
    pub decls: Vec<Declaration>,
    by_name: HashMap<String, u32>,
    /// Scoped `let` bindings, innermost last; lookups shadow declarations.
    bound: Vec<(String, TermId)>,
}

const MAX_WIDTH: u32 = 1024;

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interprets one top-level form as a command, interning any terms it
    /// mentions.
    pub fn command(&mut self, form: &SExpr) -> Result<Command, ParseError> {
        let items = form.list().ok_or(ParseError::Malformed("command"))?;
        let head = items
            .first()
            .and_then(SExpr::atom)
            .ok_or(ParseError::Malformed("command"))?;
        match head {
            "set-logic" | "set-option" | "set-info" => Ok(Command::Nop),
            "declare-const" => {
                if items.len() != 3 {
                    return Err(ParseError::Malformed("declare-const"));
                }
                self.declare(&items[1], &items[2])
            }
            "declare-fun" => {
                // Only zero-arity declarations make sense for QF_BV scripts.
                if items.len() != 4 || items[2].list().map(<[SExpr]>::len) != Some(0) {
                    return Err(ParseError::Malformed("declare-fun"));
                }
                self.declare(&items[1], &items[3])
            }
            "assert" => {
                if items.len() != 2 {
                    return Err(ParseError::Malformed("assert"));
                }
                let t = self.term(&items[1])?;
                if self.arena.sort(t) != Sort::Bool {
                    return Err(ParseError::SortMismatch {
                        op: "assert".into(),
                    });
                }
                Ok(Command::Assert(t))
            }
            "check-sat" => Ok(Command::CheckSat),
            "get-model" => Ok(Command::GetModel),
            "exit" => Ok(Command::Exit),
            other => Err(ParseError::UnsupportedCommand(other.to_string())),
        }
    }

    fn declare(&mut self, name: &SExpr, sort: &SExpr) -> Result<Command, ParseError> {
        let name = name
            .atom()
            .ok_or(ParseError::Malformed("declaration name"))?;
        let sort = parse_sort(sort)?;
        if self.by_name.contains_key(name) {
            return Err(ParseError::Redeclared(name.to_string()));
        }
        let index = self.decls.len() as u32;
        self.by_name.insert(name.to_string(), index);
        self.decls.push(Declaration {
            name: name.to_string(),
            sort,
        });
        self.arena.intern(Term::Var(index), sort);
        Ok(Command::Declare(index))
    }

    fn term(&mut self, form: &SExpr) -> Result<TermId, ParseError> {
        match form {
            SExpr::Atom(a) => self.atom_term(a),
            SExpr::List(items) => self.list_term(items),
        }
    }

    fn atom_term(&mut self, a: &str) -> Result<TermId, ParseError> {
        match a {
            "true" => Ok(self.arena.intern(Term::BoolConst(true), Sort::Bool)),
            "false" => Ok(self.arena.intern(Term::BoolConst(false), Sort::Bool)),
            _ => {
                if let Some(rest) = a.strip_prefix("#x") {
                    return self.hex_literal(a, rest);
                }
                if let Some(rest) = a.strip_prefix("#b") {
                    return self.bin_literal(a, rest);
                }
                if let Some(&(_, t)) = self.bound.iter().rev().find(|(n, _)| n == a) {
                    return Ok(t);
                }
                match self.by_name.get(a) {
                    Some(&index) => {
                        let sort = self.decls[index as usize].sort;
                        Ok(self.arena.intern(Term::Var(index), sort))
                    }
                    None => Err(ParseError::UnknownSymbol(a.to_string())),
                }
            }
        }
    }

    fn hex_literal(&mut self, whole: &str, digits: &str) -> Result<TermId, ParseError> {
        if digits.is_empty() {
            return Err(ParseError::BadNumeral(whole.to_string()));
        }
        let width = digits.len() as u32 * 4;
        check_width(width as u64)?;
        let mut bits = vec![false; width as usize];
        for (i, ch) in digits.chars().rev().enumerate() {
            let nib = ch
                .to_digit(16)
                .ok_or_else(|| ParseError::BadNumeral(whole.to_string()))?;
            for b in 0..4 {
                bits[i * 4 + b] = nib >> b & 1 == 1;
            }
        }
        Ok(self.arena.intern(Term::BvConst(bits), Sort::BitVec(width)))
    }

    fn bin_literal(&mut self, whole: &str, digits: &str) -> Result<TermId, ParseError> {
        if digits.is_empty() {
            return Err(ParseError::BadNumeral(whole.to_string()));
        }
        let width = digits.len() as u32;
        check_width(width as u64)?;
        let mut bits = vec![false; width as usize];
        for (i, ch) in digits.chars().rev().enumerate() {
            match ch {
                '0' => {}
                '1' => bits[i] = true,
                _ => return Err(ParseError::BadNumeral(whole.to_string())),
            }
        }
        Ok(self.arena.intern(Term::BvConst(bits), Sort::BitVec(width)))
    }

    fn list_term(&mut self, items: &[SExpr]) -> Result<TermId, ParseError> {
        if items.is_empty() {
            return Err(ParseError::Malformed("term"));
        }
        // Indexed identifiers: (_ bvN w) literals and (_ op k) applications.
        if items[0].atom() == Some("_") {
            return self.underscore_literal(items);
        }
        if items[0].atom() == Some("let") {
            return self.let_term(items);
        }
        if let Some(inner) = items[0].list() {
            let args = &items[1..];
            return self.indexed_application(inner, args);
        }
        let op = items[0]
            .atom()
            .ok_or(ParseError::Malformed("operator"))?
            .to_string();
        let args: Vec<TermId> = items[1..]
            .iter()
            .map(|it| self.term(it))
            .collect::<Result<_, _>>()?;
        self.apply(&op, &args)
    }

    /// `(let ((x t) ...) body)`; bindings are parallel, so every right-hand
    /// side is read in the enclosing scope before any name becomes visible.
    fn let_term(&mut self, items: &[SExpr]) -> Result<TermId, ParseError> {
        if items.len() != 3 {
            return Err(ParseError::Malformed("let"));
        }
        let pairs = items[1].list().ok_or(ParseError::Malformed("let bindings"))?;
        let mut fresh = Vec::with_capacity(pairs.len());
        for pair in pairs {
            let pair = pair
                .list()
                .filter(|p| p.len() == 2)
                .ok_or(ParseError::Malformed("let binding"))?;
            let name = pair[0]
                .atom()
                .ok_or(ParseError::Malformed("let binding name"))?;
            let value = self.term(&pair[1])?;
            fresh.push((name.to_string(), value));
        }
        let depth = self.bound.len();
        self.bound.extend(fresh);
        let body = self.term(&items[2]);
        self.bound.truncate(depth);
        body
    }

    fn underscore_literal(&mut self, items: &[SExpr]) -> Result<TermId, ParseError> {
        if items.len() != 3 {
            return Err(ParseError::Malformed("indexed identifier"));
        }
        let name = items[1].atom().ok_or(ParseError::Malformed("_ head"))?;
        let value = name
            .strip_prefix("bv")
            .ok_or_else(|| ParseError::UnknownSymbol(format!("(_ {name} ...)")))?;
        let value: u128 = value
            .parse()
            .map_err(|_| ParseError::BadNumeral(name.to_string()))?;
        let width: u64 = items[2]
            .atom()
            .and_then(|a| a.parse().ok())
            .ok_or(ParseError::Malformed("bit-vector width"))?;
        check_width(width)?;
        let mut bits = vec![false; width as usize];
        for (i, bit) in bits.iter_mut().enumerate() {
            if i < 128 {
                *bit = value >> i & 1 == 1;
            }
        }
        Ok(self
            .arena
            .intern(Term::BvConst(bits), Sort::BitVec(width as u32)))
    }

    /// Applications whose head is itself a list: `((_ extract hi lo) t)` and
    /// friends.
    fn indexed_application(
        &mut self,
        head: &[SExpr],
        args: &[SExpr],
    ) -> Result<TermId, ParseError> {
        if head.first().and_then(SExpr::atom) != Some("_") || head.len() < 2 {
            return Err(ParseError::Malformed("operator"));
        }
        let op = head[1].atom().ok_or(ParseError::Malformed("operator"))?;
        let index = |i: usize| -> Result<u32, ParseError> {
            head.get(i)
                .and_then(SExpr::atom)
                .and_then(|a| a.parse().ok())
                .ok_or(ParseError::Malformed("operator index"))
        };
        if args.len() != 1 {
            return Err(ParseError::Arity {
                op: op.to_string(),
                expected: "1",
                got: args.len(),
            });
        }
        let arg = self.term(&args[0])?;
        let width = self
            .arena
            .sort(arg)
            .width()
            .ok_or(ParseError::SortMismatch { op: op.to_string() })?;
        match op {
            "extract" => {
                if head.len() != 4 {
                    return Err(ParseError::Malformed("extract"));
                }
                let (hi, lo) = (index(2)?, index(3)?);
                if hi < lo || hi >= width {
                    return Err(ParseError::SortMismatch {
                        op: "extract".into(),
                    });
                }
                let sort = Sort::BitVec(hi - lo + 1);
                Ok(self.arena.intern(Term::Extract { hi, lo, arg }, sort))
            }
            "zero_extend" | "sign_extend" => {
                if head.len() != 3 {
                    return Err(ParseError::Malformed("extend"));
                }
                let extra = index(2)?;
                check_width(width as u64 + extra as u64)?;
                let sort = Sort::BitVec(width + extra);
                let term = if op == "zero_extend" {
                    Term::ZeroExtend { extra, arg }
                } else {
                    Term::SignExtend { extra, arg }
                };
                Ok(self.arena.intern(term, sort))
            }
            "rotate_left" | "rotate_right" => {
                if head.len() != 3 {
                    return Err(ParseError::Malformed("rotate"));
                }
                let amount = index(2)? % width.max(1);
                let sort = Sort::BitVec(width);
                let term = if op == "rotate_left" {
                    Term::RotateLeft { amount, arg }
                } else {
                    Term::RotateRight { amount, arg }
                };
                Ok(self.arena.intern(term, sort))
            }
            other => Err(ParseError::UnknownSymbol(format!("(_ {other} ...)"))),
        }
    }

    fn apply(&mut self, op: &str, args: &[TermId]) -> Result<TermId, ParseError> {
        let sort_err = || ParseError::SortMismatch { op: op.to_string() };
        let arity = |expected: &'static str| ParseError::Arity {
            op: op.to_string(),
            expected,
            got: args.len(),
        };

        match op {
            "not" => {
                let [a] = args else { return Err(arity("1")) };
                self.expect_bool(*a, op)?;
                Ok(self.arena.intern(Term::Not(*a), Sort::Bool))
            }
            "and" | "or" => {
                if args.len() < 2 {
                    return Err(arity("2 or more"));
                }
                for &a in args {
                    self.expect_bool(a, op)?;
                }
                let mut acc = args[0];
                for &a in &args[1..] {
                    let term = if op == "and" {
                        Term::And(acc, a)
                    } else {
                        Term::Or(acc, a)
                    };
                    acc = self.arena.intern(term, Sort::Bool);
                }
                Ok(acc)
            }
            "xor" => {
                let [a, b] = args else { return Err(arity("2")) };
                self.expect_bool(*a, op)?;
                self.expect_bool(*b, op)?;
                Ok(self.arena.intern(Term::Xor(*a, *b), Sort::Bool))
            }
            "=>" => {
                let [a, b] = args else { return Err(arity("2")) };
                self.expect_bool(*a, op)?;
                self.expect_bool(*b, op)?;
                Ok(self.arena.intern(Term::Implies(*a, *b), Sort::Bool))
            }
            "=" => {
                let [a, b] = args else { return Err(arity("2")) };
                if self.arena.sort(*a) != self.arena.sort(*b) {
                    return Err(sort_err());
                }
                Ok(self.arena.intern(Term::Eq(*a, *b), Sort::Bool))
            }
            "distinct" => {
                let [a, b] = args else { return Err(arity("2")) };
                if self.arena.sort(*a) != self.arena.sort(*b) {
                    return Err(sort_err());
                }
                let eq = self.arena.intern(Term::Eq(*a, *b), Sort::Bool);
                Ok(self.arena.intern(Term::Not(eq), Sort::Bool))
            }
            "ite" => {
                let [c, t, e] = args else { return Err(arity("3")) };
                self.expect_bool(*c, op)?;
                let sort = self.arena.sort(*t);
                if sort != self.arena.sort(*e) {
                    return Err(sort_err());
                }
                Ok(self.arena.intern(Term::Ite(*c, *t, *e), sort))
            }
            "bvnot" | "bvneg" => {
                let [a] = args else { return Err(arity("1")) };
                let sort = self.arena.sort(*a);
                sort.width().ok_or_else(sort_err)?;
                let term = if op == "bvnot" {
                    Term::BvNot(*a)
                } else {
                    Term::BvNeg(*a)
                };
                Ok(self.arena.intern(term, sort))
            }
            "concat" => {
                if args.len() < 2 {
                    return Err(arity("2 or more"));
                }
                let mut acc = args[0];
                for &a in &args[1..] {
                    let wa = self.arena.sort(acc).width().ok_or_else(sort_err)?;
                    let wb = self.arena.sort(a).width().ok_or_else(sort_err)?;
                    check_width(wa as u64 + wb as u64)?;
                    acc = self
                        .arena
                        .intern(Term::Concat(acc, a), Sort::BitVec(wa + wb));
                }
                Ok(acc)
            }
            _ => {
                if let Some(bin) = bv_bin_op(op) {
                    if args.len() < 2 {
                        return Err(arity("2 or more"));
                    }
                    let variadic = matches!(bin, BvBinOp::And | BvBinOp::Or | BvBinOp::Add | BvBinOp::Mul);
                    if !variadic && args.len() != 2 {
                        return Err(arity("2"));
                    }
                    let sort = self.arena.sort(args[0]);
                    sort.width().ok_or_else(sort_err)?;
                    let mut acc = args[0];
                    for &a in &args[1..] {
                        if self.arena.sort(a) != sort {
                            return Err(sort_err());
                        }
                        acc = self.arena.intern(Term::BvBin(bin, acc, a), sort);
                    }
                    return Ok(acc);
                }
                if let Some((cmp, swap, negate)) = bv_cmp_op(op) {
                    let [a, b] = args else { return Err(arity("2")) };
                    let sort = self.arena.sort(*a);
                    sort.width().ok_or_else(sort_err)?;
                    if self.arena.sort(*b) != sort {
                        return Err(sort_err());
                    }
                    let (x, y) = if swap { (*b, *a) } else { (*a, *b) };
                    let mut t = self.arena.intern(Term::BvCmp(cmp, x, y), Sort::Bool);
                    if negate {
                        t = self.arena.intern(Term::Not(t), Sort::Bool);
                    }
                    return Ok(t);
                }
                Err(ParseError::UnknownSymbol(op.to_string()))
            }
        }
    }

    fn expect_bool(&self, t: TermId, op: &str) -> Result<(), ParseError> {
        if self.arena.sort(t) != Sort::Bool {
            return Err(ParseError::SortMismatch { op: op.to_string() });
        }
        Ok(())
    }
}

fn check_width(w: u64) -> Result<(), ParseError> {
    if w == 0 || w > MAX_WIDTH as u64 {
        return Err(ParseError::WidthOutOfRange(w));
    }
    Ok(())
}

fn parse_sort(form: &SExpr) -> Result<Sort, ParseError> {
    match form {
        SExpr::Atom(a) if a == "Bool" => Ok(Sort::Bool),
        SExpr::List(items) => {
            let heads: Vec<_> = items.iter().map(|i| i.atom()).collect();
            match heads.as_slice() {
                [Some("_"), Some("BitVec"), Some(w)] => {
                    let w: u64 = w.parse().map_err(|_| ParseError::Malformed("sort"))?;
                    check_width(w)?;
                    Ok(Sort::BitVec(w as u32))
                }
                _ => Err(ParseError::Malformed("sort")),
            }
        }
        _ => Err(ParseError::Malformed("sort")),
    }
}

fn bv_bin_op(op: &str) -> Option<BvBinOp> {
    Some(match op {
        "bvand" => BvBinOp::And,
        "bvor" => BvBinOp::Or,
        "bvxor" => BvBinOp::Xor,
        "bvadd" => BvBinOp::Add,
        "bvsub" => BvBinOp::Sub,
        "bvmul" => BvBinOp::Mul,
        "bvudiv" => BvBinOp::Udiv,
        "bvurem" => BvBinOp::Urem,
        "bvsdiv" => BvBinOp::Sdiv,
        "bvsrem" => BvBinOp::Srem,
        "bvshl" => BvBinOp::Shl,
        "bvlshr" => BvBinOp::Lshr,
        "bvashr" => BvBinOp::Ashr,
        _ => return None,
    })
}

/// Maps a comparison mnemonic to a canonical predicate plus operand swap and
/// negation flags.
fn bv_cmp_op(op: &str) -> Option<(BvCmpOp, bool, bool)> {
    Some(match op {
        "bvult" => (BvCmpOp::Ult, false, false),
        "bvule" => (BvCmpOp::Ule, false, false),
        "bvugt" => (BvCmpOp::Ult, true, false),
        "bvuge" => (BvCmpOp::Ule, true, false),
        "bvslt" => (BvCmpOp::Slt, false, false),
        "bvsle" => (BvCmpOp::Sle, false, false),
        "bvsgt" => (BvCmpOp::Slt, true, false),
        "bvsge" => (BvCmpOp::Sle, true, false),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::parse_all;

    fn ctx_with(src: &str) -> (Context, Vec<Command>) {
        let mut ctx = Context::new();
        let mut cmds = Vec::new();
        for form in parse_all(src).unwrap() {
            cmds.push(ctx.command(&form).unwrap());
        }
        (ctx, cmds)
    }

    #[test]
    fn parses_a_small_script() {
        let (ctx, cmds) = ctx_with(
            "(set-logic QF_BV)\n(declare-const x (_ BitVec 8))\n\
             (assert (bvult x #x10))\n(check-sat)\n(get-model)",
        );
        assert_eq!(ctx.decls.len(), 1);
        assert_eq!(ctx.decls[0].name, "x");
        assert_eq!(ctx.decls[0].sort, Sort::BitVec(8));
        assert!(matches!(cmds[2], Command::Assert(_)));
        assert_eq!(cmds[3], Command::CheckSat);
        assert_eq!(cmds[4], Command::GetModel);
    }

    #[test]
    fn normalizes_reversed_comparisons() {
        let (mut ctx, _) = ctx_with("(declare-const a (_ BitVec 4)) (declare-const b (_ BitVec 4))");
        let form = &parse_all("(bvugt a b)").unwrap()[0];
        let t = ctx.term(form).unwrap();
        let Term::BvCmp(BvCmpOp::Ult, x, y) = *ctx.arena.term(t) else {
            panic!("expected normalized bvult, got {:?}", ctx.arena.term(t));
        };
        // Operands swap so that a > b becomes b < a.
        assert!(matches!(ctx.arena.term(x), Term::Var(1)));
        assert!(matches!(ctx.arena.term(y), Term::Var(0)));
    }

    #[test]
    fn literal_forms_agree() {
        let mut ctx = Context::new();
        let hex = ctx.term(&parse_all("#x2a").unwrap()[0]).unwrap();
        let bin = ctx.term(&parse_all("#b00101010").unwrap()[0]).unwrap();
        let idx = ctx.term(&parse_all("(_ bv42 8)").unwrap()[0]).unwrap();
        assert_eq!(hex, bin);
        assert_eq!(hex, idx);
        assert_eq!(ctx.arena.sort(hex), Sort::BitVec(8));
    }

    #[test]
    fn rejects_sort_mismatches() {
        let (mut ctx, _) = ctx_with("(declare-const a (_ BitVec 4)) (declare-const b (_ BitVec 8))");
        let form = &parse_all("(bvadd a b)").unwrap()[0];
        assert!(matches!(
            ctx.term(form),
            Err(ParseError::SortMismatch { .. })
        ));
    }

    #[test]
    fn rejects_unsupported_commands() {
        let mut ctx = Context::new();
        let form = &parse_all("(push 1)").unwrap()[0];
        assert_eq!(
            ctx.command(form),
            Err(ParseError::UnsupportedCommand("push".into()))
        );
    }

    #[test]
    fn extract_and_extend_track_widths() {
        let (mut ctx, _) = ctx_with("(declare-const x (_ BitVec 32))");
        let t = ctx
            .term(&parse_all("((_ extract 15 8) x)").unwrap()[0])
            .unwrap();
        assert_eq!(ctx.arena.sort(t), Sort::BitVec(8));
        let t = ctx
            .term(&parse_all("((_ zero_extend 32) x)").unwrap()[0])
            .unwrap();
        assert_eq!(ctx.arena.sort(t), Sort::BitVec(64));
    }
}
