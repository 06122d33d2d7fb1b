//! Tseitin-style bit blasting of sorted terms into CNF, solved with varisat.
//!
//! Every bit-vector term becomes a `Vec<Lit>` stored least significant bit
//! first. Gate constructors apply constant shortcuts against the dedicated
//! true literal so that concrete subterms fold away instead of growing the
//! clause database.

use crate::parse::Context;
use crate::term::{BvBinOp, BvCmpOp, Sort, Term, TermId};
use std::collections::HashMap;
use thiserror::Error;
use varisat::{ExtendFormula, Lit, Solver};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("sat backend failed: {0}")]
    Backend(String),
}

pub struct CheckOutcome {
    pub sat: bool,
    /// One entry per declaration, least significant bit first. Bool values
    /// are a single bit. Present exactly when `sat` is true.
    pub model: Option<Vec<Vec<bool>>>,
}

/// Blasts `assertions` over the declarations in `ctx` and solves the result.
pub fn check(ctx: &Context, assertions: &[TermId]) -> Result<CheckOutcome, SolveError> {
    let mut solver = Solver::new();
    let true_lit = solver.new_lit();
    solver.add_clause(&[true_lit]);

    let mut blaster = Blaster {
        ctx,
        solver,
        true_lit,
        cache: HashMap::new(),
        divrem_cache: HashMap::new(),
        decl_bits: Vec::new(),
    };
    for decl in &ctx.decls {
        let width = decl.sort.width().unwrap_or(1);
        let bits: Vec<Lit> = (0..width).map(|_| blaster.solver.new_lit()).collect();
        blaster.decl_bits.push(bits);
    }
    for &assertion in assertions {
        let lit = blaster.bit(assertion);
        blaster.solver.add_clause(&[lit]);
    }

    let sat = blaster
        .solver
        .solve()
        .map_err(|e| SolveError::Backend(e.to_string()))?;
    if !sat {
        return Ok(CheckOutcome {
            sat: false,
            model: None,
        });
    }

    let mut assignment = Vec::new();
    if let Some(lits) = blaster.solver.model() {
        for lit in lits {
            let index = lit.var().index();
            if index >= assignment.len() {
                assignment.resize(index + 1, false);
            }
            assignment[index] = lit.is_positive();
        }
    }
    let value_of = |lit: Lit| {
        let raw = assignment.get(lit.var().index()).copied().unwrap_or(false);
        raw == lit.is_positive()
    };
    let model = blaster
        .decl_bits
        .iter()
        .map(|bits| bits.iter().map(|&l| value_of(l)).collect())
        .collect();
    Ok(CheckOutcome {
        sat: true,
        model: Some(model),
    })
}

#[derive(Clone)]
enum Blasted {
    Bit(Lit),
    Vec(Vec<Lit>),
}

#[derive(Clone, Copy)]
enum ShiftKind {
    Shl,
    Lshr,
    Ashr,
}

/// Key for shared quotient/remainder circuits: unsigned pairs serve both
/// `bvudiv` and `bvurem`, magnitude pairs serve both signed forms.
#[derive(PartialEq, Eq, Hash)]
enum DivKey {
    Unsigned(TermId, TermId),
    Magnitude(TermId, TermId),
}

struct Blaster<'a> {
    ctx: &'a Context,
    solver: Solver<'a>,
    true_lit: Lit,
    cache: HashMap<TermId, Blasted>,
    divrem_cache: HashMap<DivKey, (Vec<Lit>, Vec<Lit>)>,
    decl_bits: Vec<Vec<Lit>>,
}

impl<'a> Blaster<'a> {
    fn tru(&self) -> Lit {
        self.true_lit
    }

    fn fal(&self) -> Lit {
        !self.true_lit
    }

    fn konst(&self, b: bool) -> Lit {
        if b {
            self.tru()
        } else {
            self.fal()
        }
    }

    fn and2(&mut self, a: Lit, b: Lit) -> Lit {
        if a == self.tru() || a == b {
            return b;
        }
        if b == self.tru() {
            return a;
        }
        if a == self.fal() || b == self.fal() || a == !b {
            return self.fal();
        }
        let c = self.solver.new_lit();
        self.solver.add_clause(&[!a, !b, c]);
        self.solver.add_clause(&[a, !c]);
        self.solver.add_clause(&[b, !c]);
        c
    }

    fn or2(&mut self, a: Lit, b: Lit) -> Lit {
        !self.and2(!a, !b)
    }

    fn xor2(&mut self, a: Lit, b: Lit) -> Lit {
        if a == self.fal() {
            return b;
        }
        if b == self.fal() {
            return a;
        }
        if a == self.tru() {
            return !b;
        }
        if b == self.tru() {
            return !a;
        }
        if a == b {
            return self.fal();
        }
        if a == !b {
            return self.tru();
        }
        let c = self.solver.new_lit();
        self.solver.add_clause(&[!a, !b, !c]);
        self.solver.add_clause(&[a, b, !c]);
        self.solver.add_clause(&[!a, b, c]);
        self.solver.add_clause(&[a, !b, c]);
        c
    }

    fn iff(&mut self, a: Lit, b: Lit) -> Lit {
        !self.xor2(a, b)
    }

    fn mux(&mut self, c: Lit, t: Lit, e: Lit) -> Lit {
        if c == self.tru() {
            return t;
        }
        if c == self.fal() {
            return e;
        }
        if t == e {
            return t;
        }
        let f = self.solver.new_lit();
        self.solver.add_clause(&[!c, !t, f]);
        self.solver.add_clause(&[!c, t, !f]);
        self.solver.add_clause(&[c, !e, f]);
        self.solver.add_clause(&[c, e, !f]);
        f
    }

    fn mux_vec(&mut self, c: Lit, t: &[Lit], e: &[Lit]) -> Vec<Lit> {
        t.iter()
            .zip(e)
            .map(|(&ti, &ei)| self.mux(c, ti, ei))
            .collect()
    }

    fn or_fold(&mut self, bits: &[Lit]) -> Lit {
        let mut acc = self.fal();
        for &b in bits {
            acc = self.or2(acc, b);
        }
        acc
    }

    fn add_vec(&mut self, a: &[Lit], b: &[Lit], mut carry: Lit) -> Vec<Lit> {
        let mut out = Vec::with_capacity(a.len());
        for (&ai, &bi) in a.iter().zip(b) {
            let axb = self.xor2(ai, bi);
            out.push(self.xor2(axb, carry));
            let gen = self.and2(ai, bi);
            let prop = self.and2(carry, axb);
            carry = self.or2(gen, prop);
        }
        out
    }

    fn neg_vec(&mut self, a: &[Lit]) -> Vec<Lit> {
        let inverted: Vec<Lit> = a.iter().map(|&l| !l).collect();
        let zeros = vec![self.fal(); a.len()];
        self.add_vec(&inverted, &zeros, self.tru())
    }

    fn mul_vec(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        let w = a.len();
        let mut acc = vec![self.fal(); w];
        for i in 0..w {
            if a[i] == self.fal() {
                continue;
            }
            let mut addend = vec![self.fal(); w];
            for j in i..w {
                addend[j] = self.and2(a[i], b[j - i]);
            }
            acc = self.add_vec(&acc, &addend, self.fal());
        }
        acc
    }

    fn ult_vec(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        // Scan from least to most significant; later bits override.
        let mut lt = self.fal();
        for (&ai, &bi) in a.iter().zip(b) {
            let ne = self.xor2(ai, bi);
            let bit_lt = self.and2(!ai, bi);
            lt = self.mux(ne, bit_lt, lt);
        }
        lt
    }

    fn slt_vec(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let mut fa = a.to_vec();
        let mut fb = b.to_vec();
        if let (Some(la), Some(lb)) = (fa.last_mut(), fb.last_mut()) {
            *la = !*la;
            *lb = !*lb;
        }
        self.ult_vec(&fa, &fb)
    }

    fn eq_vec(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let mut acc = self.tru();
        for (&ai, &bi) in a.iter().zip(b) {
            let e = self.iff(ai, bi);
            acc = self.and2(acc, e);
        }
        acc
    }
    fn shift_vec(&mut self, a: &[Lit], amount: &[Lit], kind: ShiftKind) -> Vec<Lit> {
        let w = a.len();
        let stages = usize::BITS as usize - (w - 1).leading_zeros() as usize;
        let sign = *a.last().expect("width is nonzero");
        let fill = match kind {
            ShiftKind::Ashr => sign,
            _ => self.fal(),
        };
        let mut cur = a.to_vec();
        for (k, &ctrl) in amount.iter().enumerate().take(stages) {
            let amt = 1usize << k;
            let shifted: Vec<Lit> = (0..w)
                .map(|j| match kind {
                    ShiftKind::Shl => {
                        if j >= amt {
                            cur[j - amt]
                        } else {
                            self.fal()
                        }
                    }
                    _ => {
                        if j + amt < w {
                            cur[j + amt]
                        } else {
                            fill
                        }
                    }
                })
                .collect();
            cur = self.mux_vec(ctrl, &shifted, &cur);
        }
        // Any amount bit beyond the barrel stages pushes everything out.
        let mut overflow = self.fal();
        for &bit in amount.iter().skip(stages) {
            overflow = self.or2(overflow, bit);
        }
        let full = vec![fill; w];
        self.mux_vec(overflow, &full, &cur)
    }

    /// Unsigned quotient and remainder as fresh constrained vectors, shared
    /// between the division and remainder terms over the same operands.
    fn divrem(&mut self, a_id: TermId, b_id: TermId, signed_magnitude: bool) -> (Vec<Lit>, Vec<Lit>) {
        let key = if signed_magnitude {
            DivKey::Magnitude(a_id, b_id)
        } else {
            DivKey::Unsigned(a_id, b_id)
        };
        if let Some(cached) = self.divrem_cache.get(&key) {
            return cached.clone();
        }
        let mut a = self.vec_bits(a_id);
        let mut b = self.vec_bits(b_id);
        if signed_magnitude {
            let sa = *a.last().unwrap();
            let sb = *b.last().unwrap();
            let na = self.neg_vec(&a);
            let nb = self.neg_vec(&b);
            a = self.mux_vec(sa, &na, &a);
            b = self.mux_vec(sb, &nb, &b);
        }
        let w = a.len();
        let q: Vec<Lit> = (0..w).map(|_| self.solver.new_lit()).collect();
        let r: Vec<Lit> = (0..w).map(|_| self.solver.new_lit()).collect();

        let nonzero = self.or_fold(&b);
        let bz = !nonzero;
        // Division by zero: quotient is all ones and the remainder is the
        // dividend, matching the SMT-LIB total semantics.
        for &qi in &q {
            self.solver.add_clause(&[!bz, qi]);
        }
        for (&ri, &ai) in r.iter().zip(&a) {
            self.solver.add_clause(&[!bz, !ri, ai]);
            self.solver.add_clause(&[!bz, ri, !ai]);
        }
        // Otherwise q * b + r == a, computed without overflow at double
        // width, with r < b.
        let fal = self.fal();
        let mut zq = q.clone();
        zq.extend(std::iter::repeat_n(fal, w));
        let mut zb = b.clone();
        zb.extend(std::iter::repeat_n(fal, w));
        let prod = self.mul_vec(&zq, &zb);
        let mut zr = r.clone();
        zr.extend(std::iter::repeat_n(fal, w));
        let sum = self.add_vec(&prod, &zr, fal);
        let mut za = a.clone();
        za.extend(std::iter::repeat_n(fal, w));
        for (&si, &ai) in sum.iter().zip(&za) {
            self.solver.add_clause(&[bz, !si, ai]);
            self.solver.add_clause(&[bz, si, !ai]);
        }
        let rem_ok = self.ult_vec(&r, &b);
        self.solver.add_clause(&[bz, rem_ok]);

        self.divrem_cache.insert(key, (q.clone(), r.clone()));
        (q, r)
    }

    fn bit(&mut self, id: TermId) -> Lit {
        match self.blast(id) {
            Blasted::Bit(l) => l,
            Blasted::Vec(_) => unreachable!("sort checking rejects vector terms here"),
        }
    }

    fn vec_bits(&mut self, id: TermId) -> Vec<Lit> {
        match self.blast(id) {
            Blasted::Vec(v) => v,
            Blasted::Bit(_) => unreachable!("sort checking rejects boolean terms here"),
        }
    }

    fn blast(&mut self, id: TermId) -> Blasted {
        if let Some(hit) = self.cache.get(&id) {
            return hit.clone();
        }
        let result = match self.ctx.arena.term(id).clone() {
            Term::BoolConst(b) => Blasted::Bit(self.konst(b)),
            Term::BvConst(bits) => {
                Blasted::Vec(bits.iter().map(|&b| self.konst(b)).collect())
            }
            Term::Var(index) => {
                let bits = &self.decl_bits[index as usize];
                match self.ctx.decls[index as usize].sort {
                    Sort::Bool => Blasted::Bit(bits[0]),
                    Sort::BitVec(_) => Blasted::Vec(bits.clone()),
                }
            }
            Term::Not(a) => {
                let a = self.bit(a);
                Blasted::Bit(!a)
            }
            Term::And(a, b) => {
                let (a, b) = (self.bit(a), self.bit(b));
                Blasted::Bit(self.and2(a, b))
            }
            Term::Or(a, b) => {
                let (a, b) = (self.bit(a), self.bit(b));
                Blasted::Bit(self.or2(a, b))
            }
            Term::Xor(a, b) => {
                let (a, b) = (self.bit(a), self.bit(b));
                Blasted::Bit(self.xor2(a, b))
            }
            Term::Implies(a, b) => {
                let (a, b) = (self.bit(a), self.bit(b));
                Blasted::Bit(self.or2(!a, b))
            }
            Term::Eq(a, b) => match self.ctx.arena.sort(a) {
                Sort::Bool => {
                    let (a, b) = (self.bit(a), self.bit(b));
                    Blasted::Bit(self.iff(a, b))
                }
                Sort::BitVec(_) => {
                    let (a, b) = (self.vec_bits(a), self.vec_bits(b));
                    Blasted::Bit(self.eq_vec(&a, &b))
                }
            },
            Term::Ite(c, t, e) => {
                let c = self.bit(c);
                match self.ctx.arena.sort(t) {
                    Sort::Bool => {
                        let (t, e) = (self.bit(t), self.bit(e));
                        Blasted::Bit(self.mux(c, t, e))
                    }
                    Sort::BitVec(_) => {
                        let (t, e) = (self.vec_bits(t), self.vec_bits(e));
                        Blasted::Vec(self.mux_vec(c, &t, &e))
                    }
                }
            }
            Term::BvNot(a) => {
                let a = self.vec_bits(a);
                Blasted::Vec(a.into_iter().map(|l| !l).collect())
            }
            Term::BvNeg(a) => {
                let a = self.vec_bits(a);
                Blasted::Vec(self.neg_vec(&a))
            }
            Term::BvBin(op, a_id, b_id) => {
                use BvBinOp::*;
                match op {
                    Udiv => Blasted::Vec(self.divrem(a_id, b_id, false).0),
                    Urem => Blasted::Vec(self.divrem(a_id, b_id, false).1),
                    Sdiv => {
                        let a = self.vec_bits(a_id);
                        let b = self.vec_bits(b_id);
                        let (sa, sb) = (*a.last().unwrap(), *b.last().unwrap());
                        let (q, _) = self.divrem(a_id, b_id, true);
                        let negate = self.xor2(sa, sb);
                        let nq = self.neg_vec(&q);
                        Blasted::Vec(self.mux_vec(negate, &nq, &q))
                    }
                    Srem => {
                        let a = self.vec_bits(a_id);
                        let sa = *a.last().unwrap();
                        let (_, r) = self.divrem(a_id, b_id, true);
                        let nr = self.neg_vec(&r);
                        Blasted::Vec(self.mux_vec(sa, &nr, &r))
                    }
                    Shl | Lshr | Ashr => {
                        let a = self.vec_bits(a_id);
                        let b = self.vec_bits(b_id);
                        let kind = match op {
                            Shl => ShiftKind::Shl,
                            Lshr => ShiftKind::Lshr,
                            _ => ShiftKind::Ashr,
                        };
                        Blasted::Vec(self.shift_vec(&a, &b, kind))
                    }
                    _ => {
                        let a = self.vec_bits(a_id);
                        let b = self.vec_bits(b_id);
                        let out = match op {
                            And => a
                                .iter()
                                .zip(&b)
                                .map(|(&x, &y)| self.and2(x, y))
                                .collect(),
                            Or => a.iter().zip(&b).map(|(&x, &y)| self.or2(x, y)).collect(),
                            Xor => a
                                .iter()
                                .zip(&b)
                                .map(|(&x, &y)| self.xor2(x, y))
                                .collect(),
                            Add => self.add_vec(&a, &b, self.fal()),
                            Sub => {
                                let nb: Vec<Lit> = b.iter().map(|&l| !l).collect();
                                self.add_vec(&a, &nb, self.tru())
                            }
                            Mul => self.mul_vec(&a, &b),
                            _ => unreachable!(),
                        };
                        Blasted::Vec(out)
                    }
                }
            }
            Term::BvCmp(op, a, b) => {
                let a = self.vec_bits(a);
                let b = self.vec_bits(b);
                let lit = match op {
                    BvCmpOp::Ult => self.ult_vec(&a, &b),
                    BvCmpOp::Ule => {
                        let gt = self.ult_vec(&b, &a);
                        !gt
                    }
                    BvCmpOp::Slt => self.slt_vec(&a, &b),
                    BvCmpOp::Sle => {
                        let gt = self.slt_vec(&b, &a);
                        !gt
                    }
                };
                Blasted::Bit(lit)
            }
            Term::Concat(hi, lo) => {
                let mut out = self.vec_bits(lo);
                out.extend(self.vec_bits(hi));
                Blasted::Vec(out)
            }
            Term::Extract { hi, lo, arg } => {
                let bits = self.vec_bits(arg);
                Blasted::Vec(bits[lo as usize..=hi as usize].to_vec())
            }
            Term::ZeroExtend { extra, arg } => {
                let mut bits = self.vec_bits(arg);
                bits.extend(std::iter::repeat_n(self.fal(), extra as usize));
                Blasted::Vec(bits)
            }
            Term::SignExtend { extra, arg } => {
                let mut bits = self.vec_bits(arg);
                let sign = *bits.last().unwrap();
                bits.extend(std::iter::repeat_n(sign, extra as usize));
                Blasted::Vec(bits)
            }
            Term::RotateLeft { amount, arg } => {
                let bits = self.vec_bits(arg);
                let w = bits.len();
                let k = amount as usize % w;
                Blasted::Vec((0..w).map(|j| bits[(j + w - k) % w]).collect())
            }
            Term::RotateRight { amount, arg } => {
                let bits = self.vec_bits(arg);
                let w = bits.len();
                let k = amount as usize % w;
                Blasted::Vec((0..w).map(|j| bits[(j + k) % w]).collect())
            }
        };
        self.cache.insert(id, result.clone());
        result
    }
}
