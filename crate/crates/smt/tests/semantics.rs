//! Cross-checks the bit-blasted semantics against directly computed
//! bit-vector arithmetic, including an exhaustive comparison at width 4.

use wana_smt::blast;
use wana_smt::parse::Context;
use wana_smt::sexpr;
use wana_smt::term::{BvBinOp, BvCmpOp, Sort, Term, TermId};

fn mask(w: u32) -> u64 {
    if w == 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

fn to_signed(w: u32, v: u64) -> i64 {
    let shift = 64 - w;
    ((v << shift) as i64) >> shift
}

/// Reference semantics for the binary operators, mirroring the SMT-LIB
/// definitions (total division, unmasked shift amounts).
fn ref_bin(op: BvBinOp, w: u32, a: u64, b: u64) -> u64 {
    let m = mask(w);
    let (a, b) = (a & m, b & m);
    let sa = to_signed(w, a);
    let sb = to_signed(w, b);
    let v = match op {
        BvBinOp::And => a & b,
        BvBinOp::Or => a | b,
        BvBinOp::Xor => a ^ b,
        BvBinOp::Add => a.wrapping_add(b),
        BvBinOp::Sub => a.wrapping_sub(b),
        BvBinOp::Mul => a.wrapping_mul(b),
        BvBinOp::Udiv => a.checked_div(b).unwrap_or(m),
        BvBinOp::Urem => {
            if b == 0 {
                a
            } else {
                a % b
            }
        }
        BvBinOp::Sdiv => {
            if b == 0 {
                if sa >= 0 {
                    m
                } else {
                    1
                }
            } else {
                sa.wrapping_div(sb) as u64
            }
        }
        BvBinOp::Srem => {
            if b == 0 {
                a
            } else {
                sa.wrapping_rem(sb) as u64
            }
        }
        BvBinOp::Shl => {
            if b >= w as u64 {
                0
            } else {
                a << b
            }
        }
        BvBinOp::Lshr => {
            if b >= w as u64 {
                0
            } else {
                a >> b
            }
        }
        BvBinOp::Ashr => {
            if b >= w as u64 {
                if sa < 0 {
                    m
                } else {
                    0
                }
            } else {
                (sa >> b) as u64
            }
        }
    };
    v & m
}

fn ref_cmp(op: BvCmpOp, w: u32, a: u64, b: u64) -> bool {
    let m = mask(w);
    let (a, b) = (a & m, b & m);
    match op {
        BvCmpOp::Ult => a < b,
        BvCmpOp::Ule => a <= b,
        BvCmpOp::Slt => to_signed(w, a) < to_signed(w, b),
        BvCmpOp::Sle => to_signed(w, a) <= to_signed(w, b),
    }
}

struct XorShift(u64);

impl XorShift {
    fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }
}

fn lit(w: u32, v: u64) -> String {
    format!("#x{:0width$x}", v & mask(w), width = (w / 4) as usize)
}

const BIN_OPS: [(BvBinOp, &str); 13] = [
    (BvBinOp::And, "bvand"),
    (BvBinOp::Or, "bvor"),
    (BvBinOp::Xor, "bvxor"),
    (BvBinOp::Add, "bvadd"),
    (BvBinOp::Sub, "bvsub"),
    (BvBinOp::Mul, "bvmul"),
    (BvBinOp::Udiv, "bvudiv"),
    (BvBinOp::Urem, "bvurem"),
    (BvBinOp::Sdiv, "bvsdiv"),
    (BvBinOp::Srem, "bvsrem"),
    (BvBinOp::Shl, "bvshl"),
    (BvBinOp::Lshr, "bvlshr"),
    (BvBinOp::Ashr, "bvashr"),
];

/// Checks `(op a b) == expected` both ways: asserting equality must be sat,
/// asserting disequality must be unsat.
fn assert_bin_case(mnemonic: &str, op: BvBinOp, w: u32, a: u64, b: u64) {
    let expected = ref_bin(op, w, a, b);
    let expr = format!("({mnemonic} {} {})", lit(w, a), lit(w, b));
    let eq = format!("(assert (= {expr} {}))(check-sat)", lit(w, expected));
    let ne = format!("(assert (distinct {expr} {}))(check-sat)", lit(w, expected));
    assert_eq!(
        wana_smt::run_script(&eq),
        "sat\n",
        "{mnemonic} w={w} a={a:#x} b={b:#x} expected {expected:#x}"
    );
    assert_eq!(
        wana_smt::run_script(&ne),
        "unsat\n",
        "{mnemonic} w={w} a={a:#x} b={b:#x} expected {expected:#x}"
    );
}

#[test]
fn binary_operators_match_reference_semantics() {
    let mut rng = XorShift(0x9e3779b97f4a7c15);
    for &w in &[4u32, 8, 16, 32, 64] {
        let edges = [0u64, 1, mask(w), 1u64 << (w - 1), mask(w) >> 1];
        for &(op, mnemonic) in &BIN_OPS {
            for &a in &edges {
                for &b in &edges {
                    assert_bin_case(mnemonic, op, w, a, b);
                }
            }
            for _ in 0..6 {
                let a = rng.next();
                let b = rng.next();
                assert_bin_case(mnemonic, op, w, a, b);
            }
        }
    }
}

#[test]
fn comparisons_match_reference_semantics() {
    let cases: [(BvCmpOp, &str); 8] = [
        (BvCmpOp::Ult, "bvult"),
        (BvCmpOp::Ule, "bvule"),
        (BvCmpOp::Ult, "bvugt"),
        (BvCmpOp::Ule, "bvuge"),
        (BvCmpOp::Slt, "bvslt"),
        (BvCmpOp::Sle, "bvsle"),
        (BvCmpOp::Slt, "bvsgt"),
        (BvCmpOp::Sle, "bvsge"),
    ];
    let mut rng = XorShift(0xdeadbeefcafe1234);
    for &w in &[4u32, 8, 32, 64] {
        let edges = [0u64, 1, mask(w), 1u64 << (w - 1)];
        let mut pairs: Vec<(u64, u64)> = Vec::new();
        for &a in &edges {
            for &b in &edges {
                pairs.push((a, b));
            }
        }
        for _ in 0..8 {
            pairs.push((rng.next(), rng.next()));
        }
        for &(op, mnemonic) in &cases {
            for &(a, b) in &pairs {
                let expected = match mnemonic {
                    "bvugt" => ref_cmp(op, w, b, a),
                    "bvuge" => ref_cmp(op, w, b, a),
                    "bvsgt" => ref_cmp(op, w, b, a),
                    "bvsge" => ref_cmp(op, w, b, a),
                    _ => ref_cmp(op, w, a, b),
                };
                let expr = format!("({mnemonic} {} {})", lit(w, a), lit(w, b));
                let pos = format!("(assert {expr})(check-sat)");
                let verdict = if expected { "sat\n" } else { "unsat\n" };
                assert_eq!(
                    wana_smt::run_script(&pos),
                    verdict,
                    "{mnemonic} w={w} a={a:#x} b={b:#x}"
                );
            }
        }
    }
}

#[test]
fn shift_amounts_at_or_beyond_width_saturate() {
    // bvshl/bvlshr zero out, bvashr fills with the sign bit.
    for &(amount, value) in &[(8u64, 0x81u64), (9, 0x81), (200, 0x81)] {
        assert_bin_case("bvshl", BvBinOp::Shl, 8, value, amount);
        assert_bin_case("bvlshr", BvBinOp::Lshr, 8, value, amount);
        assert_bin_case("bvashr", BvBinOp::Ashr, 8, value, amount);
        assert_bin_case("bvashr", BvBinOp::Ashr, 8, 0x41, amount);
    }
}

#[test]
fn division_by_zero_follows_smtlib_totalization() {
    assert_bin_case("bvudiv", BvBinOp::Udiv, 8, 0x37, 0);
    assert_bin_case("bvurem", BvBinOp::Urem, 8, 0x37, 0);
    assert_bin_case("bvsdiv", BvBinOp::Sdiv, 8, 0x37, 0);
    assert_bin_case("bvsdiv", BvBinOp::Sdiv, 8, 0x90, 0);
    assert_bin_case("bvsrem", BvBinOp::Srem, 8, 0x90, 0);
}

#[test]
fn signed_overflow_division_wraps() {
    // INT_MIN / -1 wraps back to INT_MIN; the remainder is zero.
    assert_bin_case("bvsdiv", BvBinOp::Sdiv, 8, 0x80, 0xff);
    assert_bin_case("bvsrem", BvBinOp::Srem, 8, 0x80, 0xff);
    assert_bin_case("bvsdiv", BvBinOp::Sdiv, 32, 0x8000_0000, 0xffff_ffff);
    assert_bin_case("bvsrem", BvBinOp::Srem, 32, 0x8000_0000, 0xffff_ffff);
}

#[test]
fn structural_operators_match_reference() {
    let cases = [
        ("(concat #x12 #x34)", "#x1234"),
        ("((_ extract 11 4) #x1234)", "#x23"),
        ("((_ zero_extend 8) #xff)", "#x00ff"),
        ("((_ sign_extend 8) #xff)", "#xffff"),
        ("((_ sign_extend 8) #x7f)", "#x007f"),
        ("((_ rotate_left 4) #x12ab)", "#x2ab1"),
        ("((_ rotate_right 4) #x12ab)", "#xb12a"),
        ("(bvnot #x0f)", "#xf0"),
        ("(bvneg #x01)", "#xff"),
        ("(ite (bvult #x01 #x02) #xaa #xbb)", "#xaa"),
    ];
    for (expr, expected) in cases {
        let eq = format!("(assert (= {expr} {expected}))(check-sat)");
        assert_eq!(wana_smt::run_script(&eq), "sat\n", "{expr}");
        let ne = format!("(assert (distinct {expr} {expected}))(check-sat)");
        assert_eq!(wana_smt::run_script(&ne), "unsat\n", "{expr}");
    }
}

/// Evaluates a term over concrete variable values, used to validate models
/// independently of the blaster.
fn eval(ctx: &Context, values: &[u64], id: TermId) -> u64 {
    let width = |t: TermId| ctx.arena.sort(t).width().unwrap();
    match *ctx.arena.term(id) {
        Term::BoolConst(b) => b as u64,
        Term::BvConst(ref bits) => {
            let mut v = 0u64;
            for (i, &b) in bits.iter().enumerate() {
                v |= (b as u64) << i;
            }
            v
        }
        Term::Var(i) => values[i as usize],
        Term::Not(a) => (eval(ctx, values, a) == 0) as u64,
        Term::And(a, b) => (eval(ctx, values, a) != 0 && eval(ctx, values, b) != 0) as u64,
        Term::Or(a, b) => (eval(ctx, values, a) != 0 || eval(ctx, values, b) != 0) as u64,
        Term::Xor(a, b) => ((eval(ctx, values, a) != 0) ^ (eval(ctx, values, b) != 0)) as u64,
        Term::Implies(a, b) => (eval(ctx, values, a) == 0 || eval(ctx, values, b) != 0) as u64,
        Term::Eq(a, b) => (eval(ctx, values, a) == eval(ctx, values, b)) as u64,
        Term::Ite(c, t, e) => {
            if eval(ctx, values, c) != 0 {
                eval(ctx, values, t)
            } else {
                eval(ctx, values, e)
            }
        }
        Term::BvNot(a) => !eval(ctx, values, a) & mask(width(id)),
        Term::BvNeg(a) => eval(ctx, values, a).wrapping_neg() & mask(width(id)),
        Term::BvBin(op, a, b) => {
            ref_bin(op, width(a), eval(ctx, values, a), eval(ctx, values, b))
        }
        Term::BvCmp(op, a, b) => {
            ref_cmp(op, width(a), eval(ctx, values, a), eval(ctx, values, b)) as u64
        }
        Term::Concat(hi, lo) => {
            let wlo = width(lo);
            (eval(ctx, values, hi) << wlo) | eval(ctx, values, lo)
        }
        Term::Extract { hi, lo, arg } => (eval(ctx, values, arg) >> lo) & mask(hi - lo + 1),
        Term::ZeroExtend { arg, .. } => eval(ctx, values, arg),
        Term::SignExtend { arg, .. } => {
            let w = width(arg);
            to_signed(w, eval(ctx, values, arg)) as u64 & mask(width(id))
        }
        Term::RotateLeft { amount, arg } => {
            let w = width(arg);
            let v = eval(ctx, values, arg);
            ((v << amount) | (v >> ((w - amount) % w.max(1))) & mask(w)) & mask(w)
        }
        Term::RotateRight { amount, arg } => {
            let w = width(arg);
            let v = eval(ctx, values, arg);
            ((v >> amount) | (v << ((w - amount) % w.max(1)))) & mask(w)
        }
    }
}

fn random_formula(rng: &mut XorShift, w: u32) -> String {
    fn bv(rng: &mut XorShift, w: u32, depth: u32) -> String {
        if depth == 0 {
            return match rng.next() % 3 {
                0 => "x".to_string(),
                1 => "y".to_string(),
                _ => lit(w, rng.next()),
            };
        }
        let ops = [
            "bvadd", "bvsub", "bvmul", "bvand", "bvor", "bvxor", "bvshl", "bvlshr", "bvashr",
            "bvudiv", "bvurem", "bvsdiv", "bvsrem",
        ];
        let op = ops[(rng.next() % ops.len() as u64) as usize];
        let a = bv(rng, w, depth - 1);
        let b = bv(rng, w, depth - 1);
        match rng.next() % 4 {
            0 => format!("(bvnot ({op} {a} {b}))"),
            _ => format!("({op} {a} {b})"),
        }
    }
    let cmps = ["=", "distinct", "bvult", "bvule", "bvslt", "bvsge"];
    let cmp = cmps[(rng.next() % cmps.len() as u64) as usize];
    let depth = 1 + (rng.next() % 3) as u32;
    format!("({cmp} {} {})", bv(rng, w, depth), bv(rng, w, depth))
}

#[test]
fn models_satisfy_their_formulas() {
    let mut rng = XorShift(0x1234_5678_9abc_def0);
    let mut sat_seen = 0;
    for round in 0..60 {
        let w = [8u32, 16, 32][round % 3];
        let formula = random_formula(&mut rng, w);
        let script = format!(
            "(declare-const x (_ BitVec {w}))(declare-const y (_ BitVec {w}))(assert {formula})"
        );
        let mut ctx = Context::new();
        let mut assertions = Vec::new();
        for form in sexpr::parse_all(&script).unwrap() {
            if let wana_smt::parse::Command::Assert(t) = ctx.command(&form).unwrap() {
                assertions.push(t);
            }
        }
        let outcome = blast::check(&ctx, &assertions).unwrap();
        if !outcome.sat {
            continue;
        }
        sat_seen += 1;
        let model = outcome.model.unwrap();
        let values: Vec<u64> = model
            .iter()
            .map(|bits| {
                bits.iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, &b)| acc | (b as u64) << i)
            })
            .collect();
        for &a in &assertions {
            assert_eq!(
                eval(&ctx, &values, a),
                1,
                "model {values:x?} does not satisfy {formula}"
            );
        }
    }
    assert!(sat_seen >= 20, "only {sat_seen} sat formulas generated");
}

/// At width 4 every verdict is also checked against brute-force enumeration,
/// so unsat answers are verified too.
#[test]
fn verdicts_agree_with_enumeration_at_width_4() {
    let mut rng = XorShift(0x0fedcba987654321);
    for _ in 0..80 {
        let formula = random_formula(&mut rng, 4);
        let script = format!(
            "(declare-const x (_ BitVec 4))(declare-const y (_ BitVec 4))(assert {formula})"
        );
        let mut ctx = Context::new();
        let mut assertions = Vec::new();
        for form in sexpr::parse_all(&script).unwrap() {
            if let wana_smt::parse::Command::Assert(t) = ctx.command(&form).unwrap() {
                assertions.push(t);
            }
        }
        let outcome = blast::check(&ctx, &assertions).unwrap();
        let mut expected = false;
        'search: for x in 0..16u64 {
            for y in 0..16u64 {
                if assertions.iter().all(|&a| eval(&ctx, &[x, y], a) == 1) {
                    expected = true;
                    break 'search;
                }
            }
        }
        assert_eq!(outcome.sat, expected, "formula {formula}");
    }
}

#[test]
fn output_is_deterministic() {
    let script = "(declare-const x (_ BitVec 32))(declare-const y (_ BitVec 32))\
                  (assert (bvult (bvadd x y) (bvmul x y)))(check-sat)(get-model)";
    let first = wana_smt::run_script(script);
    let second = wana_smt::run_script(script);
    assert_eq!(first, second);
    assert!(first.starts_with("sat\n"));
}

#[test]
fn declarations_default_sorts_round_trip() {
    let mut ctx = Context::new();
    for form in sexpr::parse_all("(declare-const a Bool)(declare-fun b () (_ BitVec 12))").unwrap()
    {
        ctx.command(&form).unwrap();
    }
    assert_eq!(ctx.decls[0].sort, Sort::Bool);
    assert_eq!(ctx.decls[1].sort, Sort::BitVec(12));
}
