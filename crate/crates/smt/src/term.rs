//! Sorted term graph shared between the parser and the bit blaster.
//!
//! Terms live in an arena and are deduplicated on construction, so the
//! blaster can key its caches on `TermId` and encode shared subterms once.

use std::collections::HashMap;

pub type TermId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Bool,
    BitVec(u32),
}

impl Sort {
    pub fn width(self) -> Option<u32> {
        match self {
            Sort::Bool => None,
            Sort::BitVec(w) => Some(w),
        }
    }
}

impl std::fmt::Display for Sort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sort::Bool => f.write_str("Bool"),
            Sort::BitVec(w) => write!(f, "(_ BitVec {w})"),
        }
    }
}

/// Binary bit-vector operators that produce a bit vector of the operand width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BvBinOp {
    And,
    Or,
    Xor,
    Add,
    Sub,
    Mul,
    Udiv,
    Urem,
    Sdiv,
    Srem,
    Shl,
    Lshr,
    Ashr,
}

/// Binary bit-vector predicates. Reversed and negated comparison spellings
/// (`bvugt`, `bvsge`, ...) are normalized onto these during parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BvCmpOp {
    Ult,
    Ule,
    Slt,
    Sle,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    BoolConst(bool),
    /// Bits are stored least significant first; `bits.len()` is the width.
    BvConst(Vec<bool>),
    /// Index into the script's declaration table.
    Var(u32),
    Not(TermId),
    And(TermId, TermId),
    Or(TermId, TermId),
    Xor(TermId, TermId),
    Implies(TermId, TermId),
    /// Equality over Bool or bit-vector operands of matching sort.
    Eq(TermId, TermId),
    Ite(TermId, TermId, TermId),
    BvNot(TermId),
    BvNeg(TermId),
    BvBin(BvBinOp, TermId, TermId),
    BvCmp(BvCmpOp, TermId, TermId),
    /// `(concat high low)`: the first operand supplies the most significant bits.
    Concat(TermId, TermId),
    Extract {
        hi: u32,
        lo: u32,
        arg: TermId,
    },
    ZeroExtend {
        extra: u32,
        arg: TermId,
    },
    SignExtend {
        extra: u32,
        arg: TermId,
    },
    RotateLeft {
        amount: u32,
        arg: TermId,
    },
    RotateRight {
        amount: u32,
        arg: TermId,
    },
}

#[derive(Default)]
pub struct TermArena {
    nodes: Vec<Term>,
    sorts: Vec<Sort>,
    dedup: HashMap<Term, TermId>,
}

impl TermArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, term: Term, sort: Sort) -> TermId {
        if let Some(&id) = self.dedup.get(&term) {
            return id;
        }
        let id = self.nodes.len() as TermId;
        self.dedup.insert(term.clone(), id);
        self.nodes.push(term);
        self.sorts.push(sort);
        id
    }

    pub fn term(&self, id: TermId) -> &Term {
        &self.nodes[id as usize]
    }

    pub fn sort(&self, id: TermId) -> Sort {
        self.sorts[id as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
