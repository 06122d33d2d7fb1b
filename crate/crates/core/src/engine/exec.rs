//! The small-step interpreter: one instruction in, one or more successor
//! paths out. Forks happen at symbolic branches, symbolic `br_table` and
//! `call_indirect` indices, and possibly-trapping divisions.

use crate::engine::state::{
    ExploreConfig, Frame, Label, LabelKind, PathState, PathStatus, Site, TraceEvent,
};
use crate::engine::EngineError;
use crate::host;
use crate::loader::{BlockType, ControlEntry, Instr, MemArg, Module};
use crate::symbolic::{
    eval_binary, eval_compare, eval_unary, extract, ite, sign_extend, width_mask, zero_extend,
    BinOp, BoolExpr, BoolRef, CmpOp, Origin, SatStatus, Solver, SymExpr, SymRef, UnOp,
};
use std::collections::BTreeMap;
use std::rc::Rc;

/// Deepest call stack a path may build before it is cut off.
const CALL_DEPTH_LIMIT: usize = 1000;

/// Symbolic executor for one decoded module.
pub struct Engine<'m> {
    pub(crate) module: &'m Module,
    pub(crate) config: ExploreConfig,
    pub(crate) solver: Solver,
}

/// Turns an i32-valued expression into the branch condition it encodes.
/// Comparison results are built as `ite(c, 1, 0)`, so the original
/// condition is recovered instead of wrapping another `!= 0` around it.
pub fn as_condition(v: &SymRef) -> BoolRef {
    if let Some(c) = v.as_concrete() {
        return BoolExpr::literal(c != 0);
    }
    if let crate::symbolic::SymNode::Ite { cond, then, els } = v.node() {
        if then.as_concrete() == Some(1) && els.as_concrete() == Some(0) {
            return Rc::clone(cond);
        }
    }
    eval_compare(CmpOp::Ne, v, &SymExpr::concrete(0, v.width())).expect("widths match")
}

/// Encodes a boolean condition as the i32 value Wasm comparisons produce.
pub fn bool_value(cond: &BoolRef) -> SymRef {
    ite(cond, &SymExpr::concrete(1, 32), &SymExpr::concrete(0, 32)).expect("widths match")
}

/// Pins a symbolic expression to one concrete value: asks the solver for a
/// model, adds the equality to the path condition, and returns the value.
/// `None` means the solver answered unknown and the caller should stop the
/// path gracefully.
pub fn concretize(
    solver: &Solver,
    state: &mut PathState,
    expr: &SymRef,
    _what: &str,
) -> Result<Option<u64>, EngineError> {
    if let Some(v) = expr.as_concrete() {
        return Ok(Some(v));
    }
    let mut query = state.path_condition.clone();
    // A tautology mentioning the expression, so its variables are declared
    // and therefore present (or defaulted) in the model.
    query.push(eval_compare(CmpOp::Eq, expr, expr)?);
    let verdict = solver.check_sat(&query)?;
    let Some(model) = verdict.model else {
        state.unknown_forks += 1;
        return Ok(None);
    };
    let value = expr.eval(&model).unwrap_or(0);
    state.assume(eval_compare(
        CmpOp::Eq,
        expr,
        &SymExpr::concrete(value, expr.width()),
    )?);
    Ok(Some(value))
}

fn canon32(bits: u32) -> u32 {
    if f32::from_bits(bits).is_nan() {
        0x7fc0_0000
    } else {
        bits
    }
}

fn canon64(bits: u64) -> u64 {
    if f64::from_bits(bits).is_nan() {
        0x7ff8_0000_0000_0000
    } else {
        bits
    }
}

fn wasm_fmin<F: num_traits_free::Float>(a: F, b: F) -> F {
    num_traits_free::fmin(a, b)
}

/// Minimal float helpers; NaN propagates, zeros keep Wasm's sign choices.
mod num_traits_free {
    pub trait Float: Copy + PartialOrd {
        fn nan() -> Self;
        fn is_nan_(self) -> bool;
        fn is_neg(self) -> bool;
    }
    impl Float for f32 {
        fn nan() -> f32 {
            f32::NAN
        }
        fn is_nan_(self) -> bool {
            self.is_nan()
        }
        fn is_neg(self) -> bool {
            self.is_sign_negative()
        }
    }
    impl Float for f64 {
        fn nan() -> f64 {
            f64::NAN
        }
        fn is_nan_(self) -> bool {
            self.is_nan()
        }
        fn is_neg(self) -> bool {
            self.is_sign_negative()
        }
    }
    pub fn fmin<F: Float>(a: F, b: F) -> F {
        if a.is_nan_() || b.is_nan_() {
            F::nan()
        } else if a == b {
            if a.is_neg() {
                a
            } else {
                b
            }
        } else if a < b {
            a
        } else {
            b
        }
    }
    pub fn fmax<F: Float>(a: F, b: F) -> F {
        if a.is_nan_() || b.is_nan_() {
            F::nan()
        } else if a == b {
            if a.is_neg() {
                b
            } else {
                a
            }
        } else if a > b {
            a
        } else {
            b
        }
    }
}

fn wasm_fmax<F: num_traits_free::Float>(a: F, b: F) -> F {
    num_traits_free::fmax(a, b)
}

fn trunc_to_signed(x: f64, bits: u32) -> Option<u64> {
    if x.is_nan() {
        return None;
    }
    let t = x.trunc();
    let hi = (1u128 << (bits - 1)) as f64;
    if t < -hi || t >= hi {
        return None;
    }
    Some(((t as i64) as u64) & width_mask(bits))
}

fn trunc_to_unsigned(x: f64, bits: u32) -> Option<u64> {
    if x.is_nan() {
        return None;
    }
    let t = x.trunc();
    let hi = (1u128 << bits) as f64;
    if t < 0.0 || t >= hi {
        return None;
    }
    Some(t as u64)
}

/// Records name-oriented comparison events for 64-bit eq/ne tests.
fn compare_hooks(state: &mut PathState, a: &SymRef, b: &SymRef, site: Site) {
    for (x, y) in [(a, b), (b, a)] {
        if let Some(k) = x.as_concrete() {
            let tags = y.origins();
            if tags.contains(Origin::ApplyAction) || tags.contains(Origin::ApplyCode) {
                state.record(TraceEvent::NameCompare {
                    expr: Rc::clone(y),
                    constant: k,
                    site,
                });
                break;
            }
        }
    }
    let (ta, tb) = (a.origins(), b.origins());
    if (ta.contains(Origin::ApplyReceiver) && tb.contains(Origin::TransferTo))
        || (tb.contains(Origin::ApplyReceiver) && ta.contains(Origin::TransferTo))
    {
        state.record(TraceEvent::SelfToCompare { site });
    }
}

/// Outcome of an intra-function branch.
enum Jump {
    /// Control moved (or the function returned, or the path trapped).
    Done,
    /// The target loop label is at its back-edge bound; nothing changed.
    BoundHit,
}

macro_rules! pop {
    ($state:expr) => {
        match $state.pop() {
            Some(v) => v,
            None => {
                $state.trap("operand stack underflow");
                return Ok(vec![$state]);
            }
        }
    };
}

macro_rules! try_expr {
    ($state:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(_) => {
                $state.trap("operand width mismatch");
                return Ok(vec![$state]);
            }
        }
    };
}

impl<'m> Engine<'m> {
    pub fn new(module: &'m Module, config: ExploreConfig, solver: Solver) -> Engine<'m> {
        Engine {
            module,
            config,
            solver,
        }
    }

    pub fn module(&self) -> &Module {
        self.module
    }

    pub fn config(&self) -> &ExploreConfig {
        &self.config
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    /// Checks the path condition; unsat means drop, unknown means keep but
    /// remember the uncertainty for confidence reporting.
    fn feasible(&self, state: &mut PathState) -> Result<bool, EngineError> {
        let verdict = self.solver.check_sat(&state.path_condition)?;
        Ok(match verdict.status {
            SatStatus::Sat => true,
            SatStatus::Unknown => {
                state.unknown_forks += 1;
                true
            }
            SatStatus::Unsat => false,
        })
    }

    /// Executes one instruction of `state`, returning its successors. An
    /// empty vector means every successor was infeasible.
    pub fn step(&self, mut state: PathState) -> Result<Vec<PathState>, EngineError> {
        debug_assert_eq!(state.status, PathStatus::Running);
        state.instructions_retired += 1;
        if state.instructions_retired > self.config.max_instructions {
            state.exhaust(format!(
                "instruction budget of {} exhausted",
                self.config.max_instructions
            ));
            return Ok(vec![state]);
        }
        let frame = state.frame();
        let func = frame.func;
        let pc = frame.pc;
        let function = self
            .module
            .defined_func(func)
            .ok_or(EngineError::NoSuchFunction(func))?;
        let Some(instr) = function.body.instrs.get(pc as usize) else {
            state.trap("execution fell off the end of a function body");
            return Ok(vec![state]);
        };
        state.frame_mut().pc = pc + 1;
        self.exec_instr(state, instr, pc, &function.body.control)
    }

    fn exec_instr(
        &self,
        mut state: PathState,
        instr: &Instr,
        pc: u32,
        control: &std::collections::HashMap<u32, ControlEntry>,
    ) -> Result<Vec<PathState>, EngineError> {
        use Instr::*;
        let func = state.frame().func;
        let site: Site = (func, pc);
        match instr {
            Unreachable => {
                state.trap("unreachable executed");
                Ok(vec![state])
            }
            Nop => Ok(vec![state]),
            Block(bt) => {
                let Some(entry) = control.get(&pc).copied() else {
                    state.trap("block without control entry");
                    return Ok(vec![state]);
                };
                let height = state.stack.len();
                state.frame_mut().labels.push(Label {
                    kind: LabelKind::Block,
                    arity: bt.arity() as u32,
                    cont: entry.end + 1,
                    stack_height: height,
                    loop_head: None,
                });
                Ok(vec![state])
            }
            Loop(_) => {
                let height = state.stack.len();
                state.frame_mut().labels.push(Label {
                    kind: LabelKind::Loop,
                    arity: 0,
                    cont: pc + 1,
                    stack_height: height,
                    loop_head: Some(pc),
                });
                // A fresh structural entry restarts this loop's budget.
                state.loop_counters.insert((func, pc), 0);
                Ok(vec![state])
            }
            If(bt) => self.exec_if(state, *bt, pc, control),
            Else => {
                // Reached only by falling out of the then-arm: skip to the
                // shared end, which pops the label.
                let Some(entry) = control.get(&pc) else {
                    state.trap("else without control entry");
                    return Ok(vec![state]);
                };
                state.frame_mut().pc = entry.end;
                Ok(vec![state])
            }
            End => {
                let frame = state.frame_mut();
                if frame.labels.len() > 1 {
                    frame.labels.pop();
                } else {
                    self.do_return(&mut state);
                }
                Ok(vec![state])
            }
            Br(depth) => {
                if let Jump::BoundHit = self.branch(&mut state, *depth) {
                    state.exhaust("loop bound reached by unconditional branch".into());
                }
                Ok(vec![state])
            }
            BrIf(depth) => self.exec_br_if(state, *depth),
            BrTable(targets, default) => self.exec_br_table(state, targets, *default),
            Return => {
                self.do_return(&mut state);
                Ok(vec![state])
            }
            Call(f) => {
                if *f >= self.module.num_imported_funcs() {
                    state.record(TraceEvent::DirectCall { func: *f, site });
                }
                self.do_call(&mut state, *f, site)?;
                Ok(vec![state])
            }
            CallIndirect(type_idx) => self.exec_call_indirect(state, *type_idx, site),

            Drop => {
                pop!(state);
                Ok(vec![state])
            }
            Select => {
                let c = pop!(state);
                let val2 = pop!(state);
                let val1 = pop!(state);
                let cond = as_condition(&c);
                let r = try_expr!(state, ite(&cond, &val1, &val2));
                state.push(r);
                Ok(vec![state])
            }

            LocalGet(i) => {
                let Some(v) = state.frame().locals.get(*i as usize).cloned() else {
                    state.trap("local index out of range");
                    return Ok(vec![state]);
                };
                state.push(v);
                Ok(vec![state])
            }
            LocalSet(i) => {
                let v = pop!(state);
                let i = *i as usize;
                let frame = state.frame_mut();
                if i >= frame.locals.len() {
                    state.trap("local index out of range");
                    return Ok(vec![state]);
                }
                frame.locals[i] = v;
                Ok(vec![state])
            }
            LocalTee(i) => {
                let Some(v) = state.stack.last().cloned() else {
                    state.trap("operand stack underflow");
                    return Ok(vec![state]);
                };
                let i = *i as usize;
                let frame = state.frame_mut();
                if i >= frame.locals.len() {
                    state.trap("local index out of range");
                    return Ok(vec![state]);
                }
                frame.locals[i] = v;
                Ok(vec![state])
            }
            GlobalGet(i) => {
                let Some(v) = state.globals.get(*i as usize).cloned() else {
                    state.trap("global index out of range");
                    return Ok(vec![state]);
                };
                state.push(v);
                Ok(vec![state])
            }
            GlobalSet(i) => {
                let v = pop!(state);
                let i = *i as usize;
                if i >= state.globals.len() {
                    state.trap("global index out of range");
                    return Ok(vec![state]);
                }
                state.globals[i] = v;
                Ok(vec![state])
            }

            I32Load(m) => self.exec_load(state, m, 4, 32, false),
            I64Load(m) => self.exec_load(state, m, 8, 64, false),
            F32Load(m) => self.exec_load(state, m, 4, 32, false),
            F64Load(m) => self.exec_load(state, m, 8, 64, false),
            I32Load8S(m) => self.exec_load(state, m, 1, 32, true),
            I32Load8U(m) => self.exec_load(state, m, 1, 32, false),
            I32Load16S(m) => self.exec_load(state, m, 2, 32, true),
            I32Load16U(m) => self.exec_load(state, m, 2, 32, false),
            I64Load8S(m) => self.exec_load(state, m, 1, 64, true),
            I64Load8U(m) => self.exec_load(state, m, 1, 64, false),
            I64Load16S(m) => self.exec_load(state, m, 2, 64, true),
            I64Load16U(m) => self.exec_load(state, m, 2, 64, false),
            I64Load32S(m) => self.exec_load(state, m, 4, 64, true),
            I64Load32U(m) => self.exec_load(state, m, 4, 64, false),
            I32Store(m) => self.exec_store(state, m, 4),
            I64Store(m) => self.exec_store(state, m, 8),
            F32Store(m) => self.exec_store(state, m, 4),
            F64Store(m) => self.exec_store(state, m, 8),
            I32Store8(m) => self.exec_store(state, m, 1),
            I32Store16(m) => self.exec_store(state, m, 2),
            I64Store8(m) => self.exec_store(state, m, 1),
            I64Store16(m) => self.exec_store(state, m, 2),
            I64Store32(m) => self.exec_store(state, m, 4),
            MemorySize => {
                state.push(SymExpr::concrete(state.memory.pages() as u64, 32));
                Ok(vec![state])
            }
            MemoryGrow => {
                let delta = pop!(state);
                let Some(d) = concretize(&self.solver, &mut state, &delta, "memory.grow delta")?
                else {
                    state.exhaust("solver unknown while concretizing memory.grow".into());
                    return Ok(vec![state]);
                };
                let r = match state.memory.grow(d as u32) {
                    Some(old) => old as u64,
                    None => 0xFFFF_FFFF,
                };
                state.push(SymExpr::concrete(r, 32));
                Ok(vec![state])
            }

            I32Const(v) => {
                state.push(SymExpr::concrete(*v as u32 as u64, 32));
                Ok(vec![state])
            }
            I64Const(v) => {
                state.push(SymExpr::concrete(*v as u64, 64));
                Ok(vec![state])
            }
            F32Const(bits) => {
                state.push(SymExpr::concrete(*bits as u64, 32));
                Ok(vec![state])
            }
            F64Const(bits) => {
                state.push(SymExpr::concrete(*bits, 64));
                Ok(vec![state])
            }

            I32Eqz => self.exec_eqz(state),
            I64Eqz => self.exec_eqz(state),
            I32Eq => self.exec_cmp(state, CmpOp::Eq, site, false),
            I32Ne => self.exec_cmp(state, CmpOp::Ne, site, false),
            I32LtS => self.exec_cmp(state, CmpOp::LtS, site, false),
            I32LtU => self.exec_cmp(state, CmpOp::LtU, site, false),
            I32GtS => self.exec_cmp(state, CmpOp::GtS, site, false),
            I32GtU => self.exec_cmp(state, CmpOp::GtU, site, false),
            I32LeS => self.exec_cmp(state, CmpOp::LeS, site, false),
            I32LeU => self.exec_cmp(state, CmpOp::LeU, site, false),
            I32GeS => self.exec_cmp(state, CmpOp::GeS, site, false),
            I32GeU => self.exec_cmp(state, CmpOp::GeU, site, false),
            I64Eq => self.exec_cmp(state, CmpOp::Eq, site, true),
            I64Ne => self.exec_cmp(state, CmpOp::Ne, site, true),
            I64LtS => self.exec_cmp(state, CmpOp::LtS, site, false),
            I64LtU => self.exec_cmp(state, CmpOp::LtU, site, false),
            I64GtS => self.exec_cmp(state, CmpOp::GtS, site, false),
            I64GtU => self.exec_cmp(state, CmpOp::GtU, site, false),
            I64LeS => self.exec_cmp(state, CmpOp::LeS, site, false),
            I64LeU => self.exec_cmp(state, CmpOp::LeU, site, false),
            I64GeS => self.exec_cmp(state, CmpOp::GeS, site, false),
            I64GeU => self.exec_cmp(state, CmpOp::GeU, site, false),

            F32Eq => self.fcmp32(state, "f32.eq", |a, b| a == b),
            F32Ne => self.fcmp32(state, "f32.ne", |a, b| a != b),
            F32Lt => self.fcmp32(state, "f32.lt", |a, b| a < b),
            F32Gt => self.fcmp32(state, "f32.gt", |a, b| a > b),
            F32Le => self.fcmp32(state, "f32.le", |a, b| a <= b),
            F32Ge => self.fcmp32(state, "f32.ge", |a, b| a >= b),
            F64Eq => self.fcmp64(state, "f64.eq", |a, b| a == b),
            F64Ne => self.fcmp64(state, "f64.ne", |a, b| a != b),
            F64Lt => self.fcmp64(state, "f64.lt", |a, b| a < b),
            F64Gt => self.fcmp64(state, "f64.gt", |a, b| a > b),
            F64Le => self.fcmp64(state, "f64.le", |a, b| a <= b),
            F64Ge => self.fcmp64(state, "f64.ge", |a, b| a >= b),

            I32Clz => self.exec_unary(state, UnOp::Clz),
            I32Ctz => self.exec_unary(state, UnOp::Ctz),
            I32Popcnt => self.exec_unary(state, UnOp::Popcnt),
            I64Clz => self.exec_unary(state, UnOp::Clz),
            I64Ctz => self.exec_unary(state, UnOp::Ctz),
            I64Popcnt => self.exec_unary(state, UnOp::Popcnt),

            I32Add => self.exec_binary(state, BinOp::Add),
            I32Sub => self.exec_binary(state, BinOp::Sub),
            I32Mul => self.exec_binary(state, BinOp::Mul),
            I32DivS => self.exec_div(state, BinOp::DivS, 32),
            I32DivU => self.exec_div(state, BinOp::DivU, 32),
            I32RemS => self.exec_div(state, BinOp::RemS, 32),
            I32RemU => self.exec_div(state, BinOp::RemU, 32),
            I32And => self.exec_binary(state, BinOp::And),
            I32Or => self.exec_binary(state, BinOp::Or),
            I32Xor => self.exec_binary(state, BinOp::Xor),
            I32Shl => self.exec_binary(state, BinOp::Shl),
            I32ShrS => self.exec_binary(state, BinOp::ShrS),
            I32ShrU => self.exec_binary(state, BinOp::ShrU),
            I32Rotl => self.exec_binary(state, BinOp::Rotl),
            I32Rotr => self.exec_binary(state, BinOp::Rotr),
            I64Add => self.exec_binary(state, BinOp::Add),
            I64Sub => self.exec_binary(state, BinOp::Sub),
            I64Mul => self.exec_binary(state, BinOp::Mul),
            I64DivS => self.exec_div(state, BinOp::DivS, 64),
            I64DivU => self.exec_div(state, BinOp::DivU, 64),
            I64RemS => self.exec_div(state, BinOp::RemS, 64),
            I64RemU => self.exec_div(state, BinOp::RemU, 64),
            I64And => self.exec_binary(state, BinOp::And),
            I64Or => self.exec_binary(state, BinOp::Or),
            I64Xor => self.exec_binary(state, BinOp::Xor),
            I64Shl => self.exec_binary(state, BinOp::Shl),
            I64ShrS => self.exec_binary(state, BinOp::ShrS),
            I64ShrU => self.exec_binary(state, BinOp::ShrU),
            I64Rotl => self.exec_binary(state, BinOp::Rotl),
            I64Rotr => self.exec_binary(state, BinOp::Rotr),

            F32Abs => self.fun32(state, "f32.abs", f32::abs),
            F32Neg => self.fun32(state, "f32.neg", |a| -a),
            F32Ceil => self.fun32(state, "f32.ceil", f32::ceil),
            F32Floor => self.fun32(state, "f32.floor", f32::floor),
            F32Trunc => self.fun32(state, "f32.trunc", f32::trunc),
            F32Nearest => self.fun32(state, "f32.nearest", f32::round_ties_even),
            F32Sqrt => self.fun32(state, "f32.sqrt", f32::sqrt),
            F32Add => self.fbin32(state, "f32.add", |a, b| a + b),
            F32Sub => self.fbin32(state, "f32.sub", |a, b| a - b),
            F32Mul => self.fbin32(state, "f32.mul", |a, b| a * b),
            F32Div => self.fbin32(state, "f32.div", |a, b| a / b),
            F32Min => self.fbin32(state, "f32.min", wasm_fmin),
            F32Max => self.fbin32(state, "f32.max", wasm_fmax),
            F32Copysign => self.fbin32(state, "f32.copysign", f32::copysign),
            F64Abs => self.fun64(state, "f64.abs", f64::abs),
            F64Neg => self.fun64(state, "f64.neg", |a| -a),
            F64Ceil => self.fun64(state, "f64.ceil", f64::ceil),
            F64Floor => self.fun64(state, "f64.floor", f64::floor),
            F64Trunc => self.fun64(state, "f64.trunc", f64::trunc),
            F64Nearest => self.fun64(state, "f64.nearest", f64::round_ties_even),
            F64Sqrt => self.fun64(state, "f64.sqrt", f64::sqrt),
            F64Add => self.fbin64(state, "f64.add", |a, b| a + b),
            F64Sub => self.fbin64(state, "f64.sub", |a, b| a - b),
            F64Mul => self.fbin64(state, "f64.mul", |a, b| a * b),
            F64Div => self.fbin64(state, "f64.div", |a, b| a / b),
            F64Min => self.fbin64(state, "f64.min", wasm_fmin),
            F64Max => self.fbin64(state, "f64.max", wasm_fmax),
            F64Copysign => self.fbin64(state, "f64.copysign", f64::copysign),

            I32WrapI64 => {
                let a = pop!(state);
                let r = try_expr!(state, extract(31, 0, &a));
                state.push(r);
                Ok(vec![state])
            }
            I64ExtendI32S => {
                let a = pop!(state);
                let r = try_expr!(state, sign_extend(64, &a));
                state.push(r);
                Ok(vec![state])
            }
            I64ExtendI32U => {
                let a = pop!(state);
                let r = try_expr!(state, zero_extend(64, &a));
                state.push(r);
                Ok(vec![state])
            }

            I32TruncF32S => self.convert(state, "i32.trunc_f32_s", 32, |x| {
                trunc_to_signed(f32::from_bits(x as u32) as f64, 32)
            }),
            I32TruncF32U => self.convert(state, "i32.trunc_f32_u", 32, |x| {
                trunc_to_unsigned(f32::from_bits(x as u32) as f64, 32)
            }),
            I32TruncF64S => self.convert(state, "i32.trunc_f64_s", 32, |x| {
                trunc_to_signed(f64::from_bits(x), 32)
            }),
            I32TruncF64U => self.convert(state, "i32.trunc_f64_u", 32, |x| {
                trunc_to_unsigned(f64::from_bits(x), 32)
            }),
            I64TruncF32S => self.convert(state, "i64.trunc_f32_s", 64, |x| {
                trunc_to_signed(f32::from_bits(x as u32) as f64, 64)
            }),
            I64TruncF32U => self.convert(state, "i64.trunc_f32_u", 64, |x| {
                trunc_to_unsigned(f32::from_bits(x as u32) as f64, 64)
            }),
            I64TruncF64S => self.convert(state, "i64.trunc_f64_s", 64, |x| {
                trunc_to_signed(f64::from_bits(x), 64)
            }),
            I64TruncF64U => self.convert(state, "i64.trunc_f64_u", 64, |x| {
                trunc_to_unsigned(f64::from_bits(x), 64)
            }),
            F32ConvertI32S => self.convert(state, "f32.convert_i32_s", 32, |x| {
                Some((x as u32 as i32 as f32).to_bits() as u64)
            }),
            F32ConvertI32U => self.convert(state, "f32.convert_i32_u", 32, |x| {
                Some((x as u32 as f32).to_bits() as u64)
            }),
            F32ConvertI64S => self.convert(state, "f32.convert_i64_s", 32, |x| {
                Some((x as i64 as f32).to_bits() as u64)
            }),
            F32ConvertI64U => self.convert(state, "f32.convert_i64_u", 32, |x| {
                Some((x as f32).to_bits() as u64)
            }),
            F32DemoteF64 => self.convert(state, "f32.demote_f64", 32, |x| {
                Some(canon32((f64::from_bits(x) as f32).to_bits()) as u64)
            }),
            F64ConvertI32S => self.convert(state, "f64.convert_i32_s", 64, |x| {
                Some((x as u32 as i32 as f64).to_bits())
            }),
            F64ConvertI32U => self.convert(state, "f64.convert_i32_u", 64, |x| {
                Some((x as u32 as f64).to_bits())
            }),
            F64ConvertI64S => self.convert(state, "f64.convert_i64_s", 64, |x| {
                Some((x as i64 as f64).to_bits())
            }),
            F64ConvertI64U => self.convert(state, "f64.convert_i64_u", 64, |x| {
                Some((x as f64).to_bits())
            }),
            F64PromoteF32 => self.convert(state, "f64.promote_f32", 64, |x| {
                Some(canon64((f32::from_bits(x as u32) as f64).to_bits()))
            }),

            I32ReinterpretF32 | I64ReinterpretF64 | F32ReinterpretI32 | F64ReinterpretI64 => {
                // Same bit pattern, same width: the value is unchanged.
                let a = pop!(state);
                state.push(a);
                Ok(vec![state])
            }
        }
    }

    fn exec_if(
        &self,
        mut state: PathState,
        bt: BlockType,
        pc: u32,
        control: &std::collections::HashMap<u32, ControlEntry>,
    ) -> Result<Vec<PathState>, EngineError> {
        let Some(entry) = control.get(&pc).copied() else {
            state.trap("if without control entry");
            return Ok(vec![state]);
        };
        let c = pop!(state);
        let cond = as_condition(&c);
        let push_if_label = |s: &mut PathState| {
            let height = s.stack.len();
            s.frame_mut().labels.push(Label {
                kind: LabelKind::If,
                arity: bt.arity() as u32,
                cont: entry.end + 1,
                stack_height: height,
                loop_head: None,
            });
        };
        let enter_else = |s: &mut PathState| match entry.else_ {
            Some(e) => {
                push_if_label(s);
                s.frame_mut().pc = e + 1;
            }
            None => {
                s.frame_mut().pc = entry.end + 1;
            }
        };
        match cond.as_const() {
            Some(true) => {
                push_if_label(&mut state);
                Ok(vec![state])
            }
            Some(false) => {
                enter_else(&mut state);
                Ok(vec![state])
            }
            None => {
                let mut taken = state.clone();
                taken.assume(Rc::clone(&cond));
                push_if_label(&mut taken);
                let mut fall = state;
                fall.assume(BoolExpr::not(&cond));
                enter_else(&mut fall);
                let mut children = Vec::new();
                for mut child in [taken, fall] {
                    if self.feasible(&mut child)? {
                        children.push(child);
                    }
                }
                Ok(children)
            }
        }
    }

    fn exec_br_if(&self, mut state: PathState, depth: u32) -> Result<Vec<PathState>, EngineError> {
        let c = pop!(state);
        let cond = as_condition(&c);
        match cond.as_const() {
            Some(true) => {
                if let Jump::BoundHit = self.branch(&mut state, depth) {
                    state.exhaust("loop bound reached by unconditional branch".into());
                }
                Ok(vec![state])
            }
            Some(false) => Ok(vec![state]),
            None => {
                let mut taken = state.clone();
                taken.assume(Rc::clone(&cond));
                let taken = match self.branch(&mut taken, depth) {
                    // At the loop bound the back edge is dropped and only
                    // the fall-through survives.
                    Jump::BoundHit => None,
                    Jump::Done => Some(taken),
                };
                let mut fall = state;
                fall.assume(BoolExpr::not(&cond));
                let mut children = Vec::new();
                for mut child in taken.into_iter().chain(std::iter::once(fall)) {
                    if self.feasible(&mut child)? {
                        children.push(child);
                    }
                }
                Ok(children)
            }
        }
    }

    fn exec_br_table(
        &self,
        mut state: PathState,
        targets: &[u32],
        default: u32,
    ) -> Result<Vec<PathState>, EngineError> {
        let idx = pop!(state);
        if let Some(k) = idx.as_concrete() {
            let depth = targets.get(k as usize).copied().unwrap_or(default);
            if let Jump::BoundHit = self.branch(&mut state, depth) {
                state.exhaust("loop bound reached by unconditional branch".into());
            }
            return Ok(vec![state]);
        }
        // Group equal targets so there is one successor per distinct
        // destination, each holding the disjunction of its index values.
        let mut groups: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
        for (k, depth) in targets.iter().enumerate() {
            groups.entry(*depth).or_default().push(k as u64);
        }
        let mut candidates: Vec<(BoolRef, u32)> = Vec::new();
        for (depth, ks) in groups {
            let mut cond: Option<BoolRef> = None;
            for k in ks {
                let eq = eval_compare(CmpOp::Eq, &idx, &SymExpr::concrete(k, idx.width()))?;
                cond = Some(match cond {
                    Some(c) => BoolExpr::or(&c, &eq),
                    None => eq,
                });
            }
            candidates.push((cond.expect("group is nonempty"), depth));
        }
        let out_of_range = eval_compare(
            CmpOp::GeU,
            &idx,
            &SymExpr::concrete(targets.len() as u64, idx.width()),
        )?;
        candidates.push((out_of_range, default));
        let mut children = Vec::new();
        let mut bound_hits = 0usize;
        for (cond, depth) in candidates {
            let mut child = state.clone();
            child.assume(cond);
            if let Jump::BoundHit = self.branch(&mut child, depth) {
                bound_hits += 1;
                continue;
            }
            if self.feasible(&mut child)? {
                children.push(child);
            }
        }
        if children.is_empty() && bound_hits > 0 {
            state.exhaust("loop bound reached by every feasible branch target".into());
            return Ok(vec![state]);
        }
        Ok(children)
    }

    fn exec_call_indirect(
        &self,
        mut state: PathState,
        type_idx: u32,
        site: Site,
    ) -> Result<Vec<PathState>, EngineError> {
        let idx = pop!(state);
        let Some(expected) = self.module.types.get(type_idx as usize) else {
            state.trap("call_indirect type index out of range");
            return Ok(vec![state]);
        };
        let table = Rc::clone(&state.table);
        if let Some(k) = idx.as_concrete() {
            if k >= table.len() as u64 {
                state.trap("undefined table element");
                return Ok(vec![state]);
            }
            let Some(f) = table[k as usize] else {
                state.trap("uninitialized table element");
                return Ok(vec![state]);
            };
            if self.module.func_type(f) != Some(expected) {
                state.trap("indirect call type mismatch");
                return Ok(vec![state]);
            }
            state.record(TraceEvent::IndirectCall { target: f, site });
            self.do_call(&mut state, f, site)?;
            return Ok(vec![state]);
        }
        // Symbolic index: one successor per type-compatible initialized
        // slot whose equality constraint is satisfiable.
        let mut children = Vec::new();
        for (k, slot) in table.iter().enumerate() {
            let Some(f) = *slot else { continue };
            if self.module.func_type(f) != Some(expected) {
                continue;
            }
            let eq = eval_compare(CmpOp::Eq, &idx, &SymExpr::concrete(k as u64, idx.width()))?;
            let mut child = state.clone();
            child.assume(eq);
            if !self.feasible(&mut child)? {
                continue;
            }
            child.record(TraceEvent::IndirectCall { target: f, site });
            self.do_call(&mut child, f, site)?;
            children.push(child);
        }
        Ok(children)
    }

    /// Calls `func_idx`: imports go to the host models, in-module functions
    /// push a frame. Arguments are popped here.
    fn do_call(
        &self,
        state: &mut PathState,
        func_idx: u32,
        site: Site,
    ) -> Result<(), EngineError> {
        let Some(ftype) = self.module.func_type(func_idx) else {
            state.trap("call target function index out of range");
            return Ok(());
        };
        let n = ftype.params.len();
        if state.stack.len() < n {
            state.trap("operand stack underflow at call");
            return Ok(());
        }
        let args = state.stack.split_off(state.stack.len() - n);
        if func_idx < self.module.num_imported_funcs() {
            let outcome =
                host::dispatch_import(self.module, &self.solver, state, func_idx, args, site)?;
            match outcome {
                host::HostOutcome::Proceed => {}
                host::HostOutcome::Trapped(why) => state.trap(&why),
                host::HostOutcome::Finished => state.finish(),
                host::HostOutcome::Pruned => state.prune(),
                host::HostOutcome::Exhausted(why) => state.exhaust(why),
            }
            return Ok(());
        }
        if state.frames.len() >= CALL_DEPTH_LIMIT {
            state.exhaust(format!("call depth exceeded {CALL_DEPTH_LIMIT}"));
            return Ok(());
        }
        let function = self
            .module
            .defined_func(func_idx)
            .ok_or(EngineError::NoSuchFunction(func_idx))?;
        let mut locals = args;
        for vt in &function.locals {
            locals.push(SymExpr::concrete(0, vt.bits()));
        }
        let return_arity = ftype.results.len() as u32;
        let stack_base = state.stack.len();
        state.frames.push(Frame {
            func: func_idx,
            locals,
            return_arity,
            labels: vec![Label {
                kind: LabelKind::Func,
                arity: return_arity,
                cont: function.body.instrs.len() as u32,
                stack_height: stack_base,
                loop_head: None,
            }],
            pc: 0,
            stack_base,
        });
        let _ = site;
        Ok(())
    }

    /// Pops the current frame, moving its results down to the caller's
    /// stack region. The last frame's return finishes the path.
    fn do_return(&self, state: &mut PathState) {
        let frame = state.frames.pop().expect("return needs a frame");
        let k = frame.return_arity as usize;
        if state.stack.len() < frame.stack_base + k {
            state.trap("operand stack underflow at return");
            return;
        }
        let results = state.stack.split_off(state.stack.len() - k);
        state.stack.truncate(frame.stack_base);
        state.stack.extend(results);
        if state.frames.is_empty() {
            state.finish();
        }
    }

    /// Transfers control to the label `depth` levels up. Loops consume one
    /// back-edge from their budget; at the bound nothing is changed and
    /// `BoundHit` is returned.
    fn branch(&self, state: &mut PathState, depth: u32) -> Jump {
        let frame = state.frame();
        let labels_len = frame.labels.len();
        let func = frame.func;
        if depth as usize >= labels_len {
            state.trap("branch depth out of range");
            return Jump::Done;
        }
        let idx = labels_len - 1 - depth as usize;
        let label = frame.labels[idx].clone();
        if label.kind == LabelKind::Func {
            self.do_return(state);
            return Jump::Done;
        }
        if label.kind == LabelKind::Loop {
            let key = (func, label.loop_head.expect("loop labels carry their head"));
            let counter = state.loop_counters.entry(key).or_insert(0);
            if *counter >= self.config.loop_bound {
                return Jump::BoundHit;
            }
            *counter += 1;
        }
        let take = label.arity as usize;
        if state.stack.len() < label.stack_height + take {
            state.trap("operand stack underflow at branch");
            return Jump::Done;
        }
        let carried = state.stack.split_off(state.stack.len() - take);
        state.stack.truncate(label.stack_height);
        state.stack.extend(carried);
        let frame = state.frame_mut();
        // Branching to a loop label re-enters it, so the label survives;
        // any other label is consumed along with everything inside it.
        let keep = if label.kind == LabelKind::Loop {
            idx + 1
        } else {
            idx
        };
        frame.labels.truncate(keep);
        frame.pc = label.cont;
        Jump::Done
    }

    fn exec_eqz(&self, mut state: PathState) -> Result<Vec<PathState>, EngineError> {
        let a = pop!(state);
        let zero = SymExpr::concrete(0, a.width());
        let cond = try_expr!(state, eval_compare(CmpOp::Eq, &a, &zero));
        state.push(bool_value(&cond));
        Ok(vec![state])
    }

    fn exec_cmp(
        &self,
        mut state: PathState,
        op: CmpOp,
        site: Site,
        name_hooks: bool,
    ) -> Result<Vec<PathState>, EngineError> {
        let b = pop!(state);
        let a = pop!(state);
        if name_hooks {
            compare_hooks(&mut state, &a, &b, site);
        }
        let cond = try_expr!(state, eval_compare(op, &a, &b));
        state.push(bool_value(&cond));
        Ok(vec![state])
    }

    fn exec_binary(&self, mut state: PathState, op: BinOp) -> Result<Vec<PathState>, EngineError> {
        let b = pop!(state);
        let a = pop!(state);
        let r = try_expr!(state, eval_binary(op, &a, &b));
        state.push(r);
        Ok(vec![state])
    }

    fn exec_unary(&self, mut state: PathState, op: UnOp) -> Result<Vec<PathState>, EngineError> {
        let a = pop!(state);
        state.push(eval_unary(op, &a));
        Ok(vec![state])
    }

    /// Division and remainder, forking off the trapping inputs first so the
    /// surviving path can use total operator semantics.
    fn exec_div(
        &self,
        mut state: PathState,
        op: BinOp,
        width: u32,
    ) -> Result<Vec<PathState>, EngineError> {
        let b = pop!(state);
        let a = pop!(state);
        let int_min = 1u64 << (width - 1);
        let all_ones = width_mask(width);
        if let (Some(av), Some(bv)) = (a.as_concrete(), b.as_concrete()) {
            if bv == 0 {
                state.trap("integer divide by zero");
                return Ok(vec![state]);
            }
            if op == BinOp::DivS && av == int_min && bv == all_ones {
                state.trap("integer overflow");
                return Ok(vec![state]);
            }
            let r = try_expr!(state, eval_binary(op, &a, &b));
            state.push(r);
            return Ok(vec![state]);
        }
        let zero = SymExpr::concrete(0, width);
        let mut trap_cond = try_expr!(state, eval_compare(CmpOp::Eq, &b, &zero));
        if op == BinOp::DivS {
            let min_c = SymExpr::concrete(int_min, width);
            let neg1 = SymExpr::concrete(all_ones, width);
            let overflow = BoolExpr::and(
                &try_expr!(state, eval_compare(CmpOp::Eq, &a, &min_c)),
                &try_expr!(state, eval_compare(CmpOp::Eq, &b, &neg1)),
            );
            trap_cond = BoolExpr::or(&trap_cond, &overflow);
        }
        match trap_cond.as_const() {
            Some(true) => {
                state.trap("integer divide by zero");
                Ok(vec![state])
            }
            Some(false) => {
                let r = try_expr!(state, eval_binary(op, &a, &b));
                state.push(r);
                Ok(vec![state])
            }
            None => {
                let mut trapped = state.clone();
                trapped.assume(Rc::clone(&trap_cond));
                trapped.trap("integer divide by zero or overflow");
                let r = try_expr!(state, eval_binary(op, &a, &b));
                state.assume(BoolExpr::not(&trap_cond));
                state.push(r);
                let mut children = Vec::new();
                for mut child in [state, trapped] {
                    if self.feasible(&mut child)? {
                        children.push(child);
                    }
                }
                Ok(children)
            }
        }
    }

    fn effective_addr(
        &self,
        state: &mut PathState,
        addr: &SymRef,
        offset: u32,
    ) -> Result<Option<u64>, EngineError> {
        match concretize(&self.solver, state, addr, "memory address")? {
            Some(a) => Ok(Some(a + offset as u64)),
            None => {
                state.exhaust("solver unknown while concretizing a memory address".into());
                Ok(None)
            }
        }
    }

    fn exec_load(
        &self,
        mut state: PathState,
        m: &MemArg,
        bytes: u32,
        out_bits: u32,
        signed: bool,
    ) -> Result<Vec<PathState>, EngineError> {
        let addr = pop!(state);
        let Some(ea) = self.effective_addr(&mut state, &addr, m.offset)? else {
            return Ok(vec![state]);
        };
        if !state.memory.in_bounds(ea, bytes as u64) {
            state.trap("out-of-bounds memory access");
            return Ok(vec![state]);
        }
        let mut v = state.memory.load(ea, bytes);
        if out_bits > v.width() {
            v = if signed {
                try_expr!(state, sign_extend(out_bits, &v))
            } else {
                try_expr!(state, zero_extend(out_bits, &v))
            };
        }
        state.push(v);
        Ok(vec![state])
    }

    fn exec_store(
        &self,
        mut state: PathState,
        m: &MemArg,
        bytes: u32,
    ) -> Result<Vec<PathState>, EngineError> {
        let value = pop!(state);
        let addr = pop!(state);
        let Some(ea) = self.effective_addr(&mut state, &addr, m.offset)? else {
            return Ok(vec![state]);
        };
        if !state.memory.in_bounds(ea, bytes as u64) {
            state.trap("out-of-bounds memory access");
            return Ok(vec![state]);
        }
        state.memory.store(ea, &value, bytes);
        Ok(vec![state])
    }

    fn fbin32(
        &self,
        mut state: PathState,
        name: &'static str,
        f: fn(f32, f32) -> f32,
    ) -> Result<Vec<PathState>, EngineError> {
        let b = pop!(state);
        let a = pop!(state);
        let r = match (a.as_concrete(), b.as_concrete()) {
            (Some(x), Some(y)) => {
                let out = f(f32::from_bits(x as u32), f32::from_bits(y as u32));
                SymExpr::concrete(canon32(out.to_bits()) as u64, 32)
            }
            _ => state.fresh_var(32, Origin::HostFresh, name),
        };
        state.push(r);
        Ok(vec![state])
    }

    fn fbin64(
        &self,
        mut state: PathState,
        name: &'static str,
        f: fn(f64, f64) -> f64,
    ) -> Result<Vec<PathState>, EngineError> {
        let b = pop!(state);
        let a = pop!(state);
        let r = match (a.as_concrete(), b.as_concrete()) {
            (Some(x), Some(y)) => {
                let out = f(f64::from_bits(x), f64::from_bits(y));
                SymExpr::concrete(canon64(out.to_bits()), 64)
            }
            _ => state.fresh_var(64, Origin::HostFresh, name),
        };
        state.push(r);
        Ok(vec![state])
    }

    fn fun32(
        &self,
        mut state: PathState,
        name: &'static str,
        f: fn(f32) -> f32,
    ) -> Result<Vec<PathState>, EngineError> {
        let a = pop!(state);
        let r = match a.as_concrete() {
            Some(x) => {
                SymExpr::concrete(canon32(f(f32::from_bits(x as u32)).to_bits()) as u64, 32)
            }
            None => state.fresh_var(32, Origin::HostFresh, name),
        };
        state.push(r);
        Ok(vec![state])
    }

    fn fun64(
        &self,
        mut state: PathState,
        name: &'static str,
        f: fn(f64) -> f64,
    ) -> Result<Vec<PathState>, EngineError> {
        let a = pop!(state);
        let r = match a.as_concrete() {
            Some(x) => SymExpr::concrete(canon64(f(f64::from_bits(x)).to_bits()), 64),
            None => state.fresh_var(64, Origin::HostFresh, name),
        };
        state.push(r);
        Ok(vec![state])
    }

    fn fcmp32(
        &self,
        mut state: PathState,
        name: &'static str,
        f: fn(f32, f32) -> bool,
    ) -> Result<Vec<PathState>, EngineError> {
        let b = pop!(state);
        let a = pop!(state);
        let r = match (a.as_concrete(), b.as_concrete()) {
            (Some(x), Some(y)) => SymExpr::concrete(
                f(f32::from_bits(x as u32), f32::from_bits(y as u32)) as u64,
                32,
            ),
            _ => state.fresh_var(32, Origin::HostFresh, name),
        };
        state.push(r);
        Ok(vec![state])
    }

    fn fcmp64(
        &self,
        mut state: PathState,
        name: &'static str,
        f: fn(f64, f64) -> bool,
    ) -> Result<Vec<PathState>, EngineError> {
        let b = pop!(state);
        let a = pop!(state);
        let r = match (a.as_concrete(), b.as_concrete()) {
            (Some(x), Some(y)) => {
                SymExpr::concrete(f(f64::from_bits(x), f64::from_bits(y)) as u64, 32)
            }
            _ => state.fresh_var(32, Origin::HostFresh, name),
        };
        state.push(r);
        Ok(vec![state])
    }

    fn convert(
        &self,
        mut state: PathState,
        name: &'static str,
        out_bits: u32,
        f: fn(u64) -> Option<u64>,
    ) -> Result<Vec<PathState>, EngineError> {
        let a = pop!(state);
        let r = match a.as_concrete() {
            Some(x) => match f(x) {
                Some(bits) => SymExpr::concrete(bits, out_bits),
                None => {
                    state.trap("invalid conversion to integer");
                    return Ok(vec![state]);
                }
            },
            None => state.fresh_var(out_bits, Origin::HostFresh, name),
        };
        state.push(r);
        Ok(vec![state])
    }
}
