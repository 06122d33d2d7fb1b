//! Width-tagged bit-vector expressions, boolean constraints, and path
//! conditions. Expressions are immutable reference-counted DAGs; forked
//! paths share subterms freely.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;
use thiserror::Error;

pub type SymRef = Rc<SymExpr>;
pub type BoolRef = Rc<BoolExpr>;

/// Identity of a symbolic variable within one explored contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Where a symbolic value originally entered the execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// First `apply` parameter: the account the code runs on.
    ApplyReceiver,
    /// Second `apply` parameter: the account that authored the action.
    ApplyCode,
    /// Third `apply` parameter: the action name.
    ApplyAction,
    /// Bytes read through the action-data intrinsics.
    ActionData,
    /// Bytes read through the Ethereum call-data intrinsics.
    CallData,
    /// Block timestamps, numbers, tapos values, and similar chain state.
    BlockInfo,
    /// Fresh unconstrained values invented for unmodeled host results.
    HostFresh,
    /// Values read from persistent contract storage.
    Storage,
    /// The destination account carried inside a transfer payload.
    TransferTo,
    /// Anything else, including plain locals that never held input.
    Other,
}

impl Origin {
    const ALL: [Origin; 10] = [
        Origin::ApplyReceiver,
        Origin::ApplyCode,
        Origin::ApplyAction,
        Origin::ActionData,
        Origin::CallData,
        Origin::BlockInfo,
        Origin::HostFresh,
        Origin::Storage,
        Origin::TransferTo,
        Origin::Other,
    ];

    fn bit(self) -> u16 {
        1 << Origin::ALL.iter().position(|&o| o == self).expect("listed") as u16
    }

    pub fn label(self) -> &'static str {
        match self {
            Origin::ApplyReceiver => "apply_receiver",
            Origin::ApplyCode => "apply_code",
            Origin::ApplyAction => "apply_action",
            Origin::ActionData => "action_data",
            Origin::CallData => "call_data",
            Origin::BlockInfo => "block_info",
            Origin::HostFresh => "host_fresh",
            Origin::Storage => "storage",
            Origin::TransferTo => "transfer_to",
            Origin::Other => "other",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Set of [`Origin`] tags, propagated bottom-up through expressions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OriginSet(u16);

impl OriginSet {
    pub const EMPTY: OriginSet = OriginSet(0);

    pub fn of(origin: Origin) -> OriginSet {
        OriginSet(origin.bit())
    }

    pub fn union(self, other: OriginSet) -> OriginSet {
        OriginSet(self.0 | other.0)
    }

    pub fn contains(self, origin: Origin) -> bool {
        self.0 & origin.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Origin> {
        Origin::ALL.into_iter().filter(move |o| self.contains(*o))
    }

    pub fn to_vec(self) -> Vec<Origin> {
        self.iter().collect()
    }
}

impl fmt::Display for OriginSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        f.write_str("{")?;
        for o in self.iter() {
            if !first {
                f.write_str("|")?;
            }
            first = false;
            write!(f, "{o}")?;
        }
        f.write_str("}")
    }
}

/// Unary integer operators without a direct SMT-LIB counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Clz,
    Ctz,
    Popcnt,
}

impl UnOp {
    pub fn name(self) -> &'static str {
        match self {
            UnOp::Clz => "clz",
            UnOp::Ctz => "ctz",
            UnOp::Popcnt => "popcnt",
        }
    }
}

/// Binary integer operators. Shift and rotate amounts follow the Wasm
/// convention of being taken modulo the operand width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    DivU,
    DivS,
    RemU,
    RemS,
    And,
    Or,
    Xor,
    Shl,
    ShrU,
    ShrS,
    Rotl,
    Rotr,
}

impl BinOp {
    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::DivU => "div_u",
            BinOp::DivS => "div_s",
            BinOp::RemU => "rem_u",
            BinOp::RemS => "rem_s",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::Shl => "shl",
            BinOp::ShrU => "shr_u",
            BinOp::ShrS => "shr_s",
            BinOp::Rotl => "rotl",
            BinOp::Rotr => "rotr",
        }
    }
}

/// Comparison relations between equal-width operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    LtU,
    LtS,
    GtU,
    GtS,
    LeU,
    LeS,
    GeU,
    GeS,
}

impl CmpOp {
    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::LtU => "lt_u",
            CmpOp::LtS => "lt_s",
            CmpOp::GtU => "gt_u",
            CmpOp::GtS => "gt_s",
            CmpOp::LeU => "le_u",
            CmpOp::LeS => "le_s",
            CmpOp::GeU => "ge_u",
            CmpOp::GeS => "ge_s",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("operand widths {left} and {right} do not match for {op}")]
    WidthMismatch {
        op: &'static str,
        left: u32,
        right: u32,
    },
    #[error("extract bits {hi}..={lo} out of range for width {width}")]
    BadExtract { hi: u32, lo: u32, width: u32 },
    #[error("cannot extend width {width} to narrower or oversized width {to}")]
    BadExtend { width: u32, to: u32 },
    #[error("combined width {0} exceeds 64 bits")]
    TooWide(u32),
}

/// A bit-vector expression of 1 to 64 bits.
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct SymExpr {
    width: u32,
    origins: OriginSet,
    node: SymNode,
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub enum SymNode {
    /// A known bit pattern, stored in the low `width` bits.
    Concrete(u64),
    Variable {
        id: VarId,
        origin: Origin,
        name: Rc<str>,
    },
    Unary {
        op: UnOp,
        arg: SymRef,
    },
    Binary {
        op: BinOp,
        lhs: SymRef,
        rhs: SymRef,
    },
    Extract {
        hi: u32,
        lo: u32,
        arg: SymRef,
    },
    Concat {
        hi: SymRef,
        lo: SymRef,
    },
    Ite {
        cond: BoolRef,
        then: SymRef,
        els: SymRef,
    },
    ZeroExtend {
        arg: SymRef,
    },
    SignExtend {
        arg: SymRef,
    },
}

/// All-ones pattern for `width` bits.
pub fn width_mask(width: u32) -> u64 {
    debug_assert!((1..=64).contains(&width));
    if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Reads the low `width` bits of `v` as a two's complement integer.
pub fn to_signed(v: u64, width: u32) -> i64 {
    let shift = 64 - width;
    ((v << shift) as i64) >> shift
}

impl SymExpr {
    pub fn concrete(bits: u64, width: u32) -> SymRef {
        Rc::new(SymExpr {
            width,
            origins: OriginSet::EMPTY,
            node: SymNode::Concrete(bits & width_mask(width)),
        })
    }

    pub fn variable(id: VarId, width: u32, origin: Origin, name: &str) -> SymRef {
        SymExpr::variable_tagged(id, width, origin, OriginSet::EMPTY, name)
    }

    /// A variable carrying extra origin tags beyond its primary one, for
    /// data that is meaningful to more than one oracle.
    pub fn variable_tagged(
        id: VarId,
        width: u32,
        origin: Origin,
        extra: OriginSet,
        name: &str,
    ) -> SymRef {
        Rc::new(SymExpr {
            width,
            origins: OriginSet::of(origin).union(extra),
            node: SymNode::Variable {
                id,
                origin,
                name: Rc::from(name),
            },
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn origins(&self) -> OriginSet {
        self.origins
    }

    pub fn node(&self) -> &SymNode {
        &self.node
    }

    pub fn as_concrete(&self) -> Option<u64> {
        match self.node {
            SymNode::Concrete(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_concrete(&self) -> bool {
        matches!(self.node, SymNode::Concrete(_))
    }

    /// Evaluates under a variable assignment; `None` if a variable that
    /// occurs in the expression is missing from the model.
    pub fn eval(&self, model: &Model) -> Option<u64> {
        match &self.node {
            SymNode::Concrete(v) => Some(*v),
            SymNode::Variable { id, .. } => model.get(*id).map(|v| v & width_mask(self.width)),
            SymNode::Unary { op, arg } => {
                Some(concrete_un(*op, arg.eval(model)?, arg.width))
            }
            SymNode::Binary { op, lhs, rhs } => Some(concrete_bin(
                *op,
                lhs.eval(model)?,
                rhs.eval(model)?,
                self.width,
            )),
            SymNode::Extract { hi: _, lo, arg } => {
                Some(arg.eval(model)? >> lo & width_mask(self.width))
            }
            SymNode::Concat { hi, lo } => {
                Some(hi.eval(model)? << lo.width | lo.eval(model)?)
            }
            SymNode::Ite { cond, then, els } => {
                if cond.eval(model)? {
                    then.eval(model)
                } else {
                    els.eval(model)
                }
            }
            SymNode::ZeroExtend { arg } => arg.eval(model),
            SymNode::SignExtend { arg } => {
                Some(to_signed(arg.eval(model)?, arg.width) as u64 & width_mask(self.width))
            }
        }
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            SymNode::Concrete(v) => write!(f, "{v:#x}"),
            SymNode::Variable { id, name, .. } => write!(f, "{name}:{id}"),
            SymNode::Unary { op, arg } => write!(f, "({} {arg})", op.name()),
            SymNode::Binary { op, lhs, rhs } => write!(f, "({} {lhs} {rhs})", op.name()),
            SymNode::Extract { hi, lo, arg } => write!(f, "(extract[{hi}:{lo}] {arg})"),
            SymNode::Concat { hi, lo } => write!(f, "(concat {hi} {lo})"),
            SymNode::Ite { cond, then, els } => write!(f, "(ite {cond} {then} {els})"),
            SymNode::ZeroExtend { arg } => write!(f, "(zext{} {arg})", self.width),
            SymNode::SignExtend { arg } => write!(f, "(sext{} {arg})", self.width),
        }
    }
}

/// A boolean constraint over bit-vector expressions.
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct BoolExpr {
    origins: OriginSet,
    node: BoolNode,
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub enum BoolNode {
    True,
    False,
    Compare {
        op: CmpOp,
        lhs: SymRef,
        rhs: SymRef,
    },
    Not(BoolRef),
    And(BoolRef, BoolRef),
    Or(BoolRef, BoolRef),
}

impl BoolExpr {
    pub fn literal(value: bool) -> BoolRef {
        Rc::new(BoolExpr {
            origins: OriginSet::EMPTY,
            node: if value { BoolNode::True } else { BoolNode::False },
        })
    }

    /// Negation with constant folding and double-negation removal.
    pub fn not(a: &BoolRef) -> BoolRef {
        match &a.node {
            BoolNode::True => BoolExpr::literal(false),
            BoolNode::False => BoolExpr::literal(true),
            BoolNode::Not(inner) => Rc::clone(inner),
            _ => Rc::new(BoolExpr {
                origins: a.origins,
                node: BoolNode::Not(Rc::clone(a)),
            }),
        }
    }

    pub fn and(a: &BoolRef, b: &BoolRef) -> BoolRef {
        match (&a.node, &b.node) {
            (BoolNode::False, _) | (_, BoolNode::False) => BoolExpr::literal(false),
            (BoolNode::True, _) => Rc::clone(b),
            (_, BoolNode::True) => Rc::clone(a),
            _ => Rc::new(BoolExpr {
                origins: a.origins.union(b.origins),
                node: BoolNode::And(Rc::clone(a), Rc::clone(b)),
            }),
        }
    }

    pub fn or(a: &BoolRef, b: &BoolRef) -> BoolRef {
        match (&a.node, &b.node) {
            (BoolNode::True, _) | (_, BoolNode::True) => BoolExpr::literal(true),
            (BoolNode::False, _) => Rc::clone(b),
            (_, BoolNode::False) => Rc::clone(a),
            _ => Rc::new(BoolExpr {
                origins: a.origins.union(b.origins),
                node: BoolNode::Or(Rc::clone(a), Rc::clone(b)),
            }),
        }
    }

    pub fn origins(&self) -> OriginSet {
        self.origins
    }

    pub fn node(&self) -> &BoolNode {
        &self.node
    }

    pub fn as_const(&self) -> Option<bool> {
        match self.node {
            BoolNode::True => Some(true),
            BoolNode::False => Some(false),
            _ => None,
        }
    }

    pub fn eval(&self, model: &Model) -> Option<bool> {
        match &self.node {
            BoolNode::True => Some(true),
            BoolNode::False => Some(false),
            BoolNode::Compare { op, lhs, rhs } => Some(concrete_cmp(
                *op,
                lhs.eval(model)?,
                rhs.eval(model)?,
                lhs.width,
            )),
            BoolNode::Not(a) => a.eval(model).map(|v| !v),
            BoolNode::And(a, b) => Some(a.eval(model)? && b.eval(model)?),
            BoolNode::Or(a, b) => Some(a.eval(model)? || b.eval(model)?),
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            BoolNode::True => f.write_str("true"),
            BoolNode::False => f.write_str("false"),
            BoolNode::Compare { op, lhs, rhs } => write!(f, "({} {lhs} {rhs})", op.name()),
            BoolNode::Not(a) => write!(f, "(not {a})"),
            BoolNode::And(a, b) => write!(f, "(and {a} {b})"),
            BoolNode::Or(a, b) => write!(f, "(or {a} {b})"),
        }
    }
}

fn check_widths(op: &'static str, a: &SymRef, b: &SymRef) -> Result<(), ExprError> {
    if a.width != b.width {
        return Err(ExprError::WidthMismatch {
            op,
            left: a.width,
            right: b.width,
        });
    }
    Ok(())
}

/// Applies a binary operator, folding when both operands are concrete.
///
/// Division folding is total: a concrete zero divisor folds to the value
/// the solver's division semantics assign (all-ones quotient, dividend
/// remainder), never to a trap. The execution engine forks the trap case
/// off before ever building a division node whose divisor can be zero.
pub fn eval_binary(op: BinOp, a: &SymRef, b: &SymRef) -> Result<SymRef, ExprError> {
    check_widths(op.name(), a, b)?;
    let width = a.width;
    if let (Some(x), Some(y)) = (a.as_concrete(), b.as_concrete()) {
        return Ok(SymExpr::concrete(concrete_bin(op, x, y, width), width));
    }
    Ok(Rc::new(SymExpr {
        width,
        origins: a.origins.union(b.origins),
        node: SymNode::Binary {
            op,
            lhs: Rc::clone(a),
            rhs: Rc::clone(b),
        },
    }))
}

/// Applies a unary operator, folding a concrete operand.
pub fn eval_unary(op: UnOp, a: &SymRef) -> SymRef {
    if let Some(x) = a.as_concrete() {
        return SymExpr::concrete(concrete_un(op, x, a.width), a.width);
    }
    Rc::new(SymExpr {
        width: a.width,
        origins: a.origins,
        node: SymNode::Unary {
            op,
            arg: Rc::clone(a),
        },
    })
}

/// Builds a comparison, folding when both operands are concrete.
pub fn eval_compare(op: CmpOp, a: &SymRef, b: &SymRef) -> Result<BoolRef, ExprError> {
    check_widths(op.name(), a, b)?;
    if let (Some(x), Some(y)) = (a.as_concrete(), b.as_concrete()) {
        return Ok(BoolExpr::literal(concrete_cmp(op, x, y, a.width)));
    }
    Ok(Rc::new(BoolExpr {
        origins: a.origins.union(b.origins),
        node: BoolNode::Compare {
            op,
            lhs: Rc::clone(a),
            rhs: Rc::clone(b),
        },
    }))
}

/// Takes bits `hi..=lo` of `arg`.
pub fn extract(hi: u32, lo: u32, arg: &SymRef) -> Result<SymRef, ExprError> {
    if hi < lo || hi >= arg.width {
        return Err(ExprError::BadExtract {
            hi,
            lo,
            width: arg.width,
        });
    }
    if lo == 0 && hi == arg.width - 1 {
        return Ok(Rc::clone(arg));
    }
    let width = hi - lo + 1;
    if let Some(x) = arg.as_concrete() {
        return Ok(SymExpr::concrete(x >> lo, width));
    }
    Ok(Rc::new(SymExpr {
        width,
        origins: arg.origins,
        node: SymNode::Extract {
            hi,
            lo,
            arg: Rc::clone(arg),
        },
    }))
}

/// Concatenates `hi` onto the high end of `lo`.
pub fn concat(hi: &SymRef, lo: &SymRef) -> Result<SymRef, ExprError> {
    let width = hi.width + lo.width;
    if width > 64 {
        return Err(ExprError::TooWide(width));
    }
    if let (Some(h), Some(l)) = (hi.as_concrete(), lo.as_concrete()) {
        return Ok(SymExpr::concrete(h << lo.width | l, width));
    }
    Ok(Rc::new(SymExpr {
        width,
        origins: hi.origins.union(lo.origins),
        node: SymNode::Concat {
            hi: Rc::clone(hi),
            lo: Rc::clone(lo),
        },
    }))
}

/// Conditional choice between equal-width branches.
pub fn ite(cond: &BoolRef, then: &SymRef, els: &SymRef) -> Result<SymRef, ExprError> {
    check_widths("ite", then, els)?;
    match cond.as_const() {
        Some(true) => return Ok(Rc::clone(then)),
        Some(false) => return Ok(Rc::clone(els)),
        None => {}
    }
    Ok(Rc::new(SymExpr {
        width: then.width,
        origins: cond.origins.union(then.origins).union(els.origins),
        node: SymNode::Ite {
            cond: Rc::clone(cond),
            then: Rc::clone(then),
            els: Rc::clone(els),
        },
    }))
}

pub fn zero_extend(to: u32, arg: &SymRef) -> Result<SymRef, ExprError> {
    if to < arg.width || to > 64 {
        return Err(ExprError::BadExtend {
            width: arg.width,
            to,
        });
    }
    if to == arg.width {
        return Ok(Rc::clone(arg));
    }
    if let Some(x) = arg.as_concrete() {
        return Ok(SymExpr::concrete(x, to));
    }
    Ok(Rc::new(SymExpr {
        width: to,
        origins: arg.origins,
        node: SymNode::ZeroExtend {
            arg: Rc::clone(arg),
        },
    }))
}

pub fn sign_extend(to: u32, arg: &SymRef) -> Result<SymRef, ExprError> {
    if to < arg.width || to > 64 {
        return Err(ExprError::BadExtend {
            width: arg.width,
            to,
        });
    }
    if to == arg.width {
        return Ok(Rc::clone(arg));
    }
    if let Some(x) = arg.as_concrete() {
        return Ok(SymExpr::concrete(
            to_signed(x, arg.width) as u64,
            to,
        ));
    }
    Ok(Rc::new(SymExpr {
        width: to,
        origins: arg.origins,
        node: SymNode::SignExtend {
            arg: Rc::clone(arg),
        },
    }))
}

/// Concrete semantics of [`BinOp`] over `width`-bit patterns.
///
/// Shifts and rotates reduce the amount modulo the width. Division by
/// zero follows the solver's total semantics so that folding can never
/// disagree with a deferred query; the engine never lets a trapping
/// division reach this point on a live path.
pub fn concrete_bin(op: BinOp, a: u64, b: u64, width: u32) -> u64 {
    let m = width_mask(width);
    let (a, b) = (a & m, b & m);
    let sa = to_signed(a, width);
    let sb = to_signed(b, width);
    let min = 1u64 << (width - 1);
    let sh = (b % width as u64) as u32;
    let v = match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::DivU => a.checked_div(b).unwrap_or(m),
        BinOp::RemU => a.checked_rem(b).unwrap_or(a),
        BinOp::DivS => {
            if b == 0 {
                if sa >= 0 {
                    m
                } else {
                    1
                }
            } else if a == min && sb == -1 {
                min
            } else {
                (sa / sb) as u64
            }
        }
        BinOp::RemS => {
            if b == 0 {
                a
            } else if a == min && sb == -1 {
                0
            } else {
                (sa % sb) as u64
            }
        }
        BinOp::And => a & b,
        BinOp::Or => a | b,
        BinOp::Xor => a ^ b,
        BinOp::Shl => {
            if sh == 0 {
                a
            } else {
                a << sh
            }
        }
        BinOp::ShrU => a >> sh,
        BinOp::ShrS => (to_signed(a, width) >> sh) as u64,
        BinOp::Rotl => {
            if sh == 0 {
                a
            } else {
                a << sh | a >> (width - sh)
            }
        }
        BinOp::Rotr => {
            if sh == 0 {
                a
            } else {
                a >> sh | a << (width - sh)
            }
        }
    };
    v & m
}

/// Concrete semantics of [`UnOp`] over `width`-bit patterns.
pub fn concrete_un(op: UnOp, a: u64, width: u32) -> u64 {
    let a = a & width_mask(width);
    match op {
        UnOp::Clz => {
            if a == 0 {
                width as u64
            } else {
                (a.leading_zeros() - (64 - width)) as u64
            }
        }
        UnOp::Ctz => {
            if a == 0 {
                width as u64
            } else {
                a.trailing_zeros() as u64
            }
        }
        UnOp::Popcnt => a.count_ones() as u64,
    }
}

/// Concrete semantics of [`CmpOp`] over `width`-bit patterns.
pub fn concrete_cmp(op: CmpOp, a: u64, b: u64, width: u32) -> bool {
    let m = width_mask(width);
    let (a, b) = (a & m, b & m);
    let sa = to_signed(a, width);
    let sb = to_signed(b, width);
    match op {
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
        CmpOp::LtU => a < b,
        CmpOp::LtS => sa < sb,
        CmpOp::GtU => a > b,
        CmpOp::GtS => sa > sb,
        CmpOp::LeU => a <= b,
        CmpOp::LeS => sa <= sb,
        CmpOp::GeU => a >= b,
        CmpOp::GeS => sa >= sb,
    }
}

/// An ordered, append-only conjunction of constraints along one path.
#[derive(Debug, Clone, Default)]
pub struct PathCondition {
    conjuncts: Vec<BoolRef>,
}

impl PathCondition {
    pub fn new() -> PathCondition {
        PathCondition::default()
    }

    pub fn push(&mut self, constraint: BoolRef) {
        self.conjuncts.push(constraint);
    }

    pub fn conjuncts(&self) -> &[BoolRef] {
        &self.conjuncts
    }

    pub fn len(&self) -> usize {
        self.conjuncts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conjuncts.is_empty()
    }

    /// True when every conjunct evaluates to true under `model`; `None`
    /// when the model leaves some occurring variable unassigned.
    pub fn holds_under(&self, model: &Model) -> Option<bool> {
        let mut all = true;
        for c in &self.conjuncts {
            all &= c.eval(model)?;
        }
        Some(all)
    }
}

/// A satisfying assignment from variable ids to bit patterns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    values: BTreeMap<VarId, u64>,
}

impl Model {
    pub fn new() -> Model {
        Model::default()
    }

    pub fn insert(&mut self, id: VarId, value: u64) {
        self.values.insert(id, value);
    }

    pub fn get(&self, id: VarId) -> Option<u64> {
        self.values.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, u64)> + '_ {
        self.values.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
