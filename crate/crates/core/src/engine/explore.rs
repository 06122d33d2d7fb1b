//! Module instantiation and depth-first path exploration under budgets.

use crate::engine::exec::Engine;
use crate::engine::memory::Memory;
use crate::engine::state::{PathState, PathStatus};
use crate::engine::EngineError;
use crate::loader::{ImportKind, Instr, Module};
use crate::symbolic::{SymExpr, SymRef};
use std::time::Instant;

/// Tallies over one exploration.
#[derive(Debug, Clone, Default)]
pub struct ExploreStats {
    pub finished: usize,
    pub trapped: usize,
    pub exhausted: usize,
    pub pruned: usize,
    /// True when the path cap or the time budget cut exploration short.
    pub truncated: bool,
}

/// All completed paths of one entry-point exploration, infeasible ones
/// excluded, plus summary counters.
#[derive(Debug)]
pub struct Exploration {
    pub paths: Vec<PathState>,
    pub stats: ExploreStats,
}

thread_local! {
    static EXHAUSTED_PATHS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
    static TRUNCATED_RUNS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

/// Cumulative (budget-exhausted path count, truncated exploration count)
/// for this thread. Report assembly reads deltas around each contract's
/// analysis, which stays accurate because one worker thread analyzes one
/// contract at a time.
pub fn thread_engine_stats() -> (u64, u64) {
    (EXHAUSTED_PATHS.get(), TRUNCATED_RUNS.get())
}

/// Evaluates a constant initializer expression: a single `*.const` (or a
/// reference to an already-initialized global) followed by `end`.
fn const_eval(init: &[Instr], globals: &[SymRef]) -> Option<SymRef> {
    match init {
        [Instr::I32Const(v), Instr::End] => Some(SymExpr::concrete(*v as u32 as u64, 32)),
        [Instr::I64Const(v), Instr::End] => Some(SymExpr::concrete(*v as u64, 64)),
        [Instr::F32Const(bits), Instr::End] => Some(SymExpr::concrete(*bits as u64, 32)),
        [Instr::F64Const(bits), Instr::End] => Some(SymExpr::concrete(*bits, 64)),
        [Instr::GlobalGet(i), Instr::End] => globals.get(*i as usize).cloned(),
        _ => None,
    }
}

fn find_memory(module: &Module) -> Option<(u32, Option<u32>)> {
    for import in &module.imports {
        if let ImportKind::Memory(mt) = &import.kind {
            return Some((mt.min, mt.max));
        }
    }
    module.memories.first().map(|mt| (mt.min, mt.max))
}

fn find_table(module: &Module) -> Option<u32> {
    for import in &module.imports {
        if let ImportKind::Table(tt) = &import.kind {
            return Some(tt.min);
        }
    }
    module.tables.first().map(|tt| tt.min)
}

impl<'m> Engine<'m> {
    /// Builds the initial state: zeroed memory with data segments applied,
    /// initialized globals, and the populated function table.
    pub fn instantiate(&self) -> Result<PathState, EngineError> {
        let module = self.module;
        let mut memory = match find_memory(module) {
            Some((min, max)) => Memory::new(min, max),
            None => Memory::new(0, Some(0)),
        };

        let mut globals: Vec<SymRef> = Vec::new();
        // Imported globals are materialized as zeros of their type.
        for import in &module.imports {
            if let ImportKind::Global(gt) = &import.kind {
                globals.push(SymExpr::concrete(0, gt.val.bits()));
            }
        }
        for (i, global) in module.globals.iter().enumerate() {
            let value = const_eval(&global.init, &globals).ok_or(EngineError::NonConstInitializer {
                kind: "global",
                index: i as u32,
            })?;
            globals.push(value);
        }

        let mut table: Vec<Option<u32>> = vec![None; find_table(module).unwrap_or(0) as usize];
        for (i, segment) in module.elements.iter().enumerate() {
            let offset = const_eval(&segment.offset, &globals)
                .and_then(|v| v.as_concrete())
                .ok_or(EngineError::NonConstInitializer {
                    kind: "element segment",
                    index: i as u32,
                })?;
            let end = offset + segment.funcs.len() as u64;
            if end > table.len() as u64 {
                return Err(EngineError::OffsetOutOfBounds {
                    kind: "element segment",
                    offset,
                    len: segment.funcs.len() as u64,
                    size: table.len() as u64,
                });
            }
            for (j, f) in segment.funcs.iter().enumerate() {
                table[offset as usize + j] = Some(*f);
            }
        }

        for (i, segment) in module.data.iter().enumerate() {
            let offset = const_eval(&segment.offset, &globals)
                .and_then(|v| v.as_concrete())
                .ok_or(EngineError::NonConstInitializer {
                    kind: "data segment",
                    index: i as u32,
                })?;
            if !memory.in_bounds(offset, segment.bytes.len() as u64) {
                return Err(EngineError::OffsetOutOfBounds {
                    kind: "data segment",
                    offset,
                    len: segment.bytes.len() as u64,
                    size: memory.byte_size(),
                });
            }
            memory.write_bytes(offset, &segment.bytes);
        }

        Ok(PathState::new(memory, globals, table, self.config.seed))
    }

    /// Explores from `entry` with the given arguments, depth-first with the
    /// branch-taken side first, until budgets run out or the work is done.
    /// `initial` usually comes from `instantiate`, with host contexts set up
    /// by the caller.
    pub fn run(
        &self,
        mut initial: PathState,
        entry: u32,
        args: Vec<SymRef>,
    ) -> Result<Exploration, EngineError> {
        let ftype = self
            .module
            .func_type(entry)
            .ok_or(EngineError::NoSuchFunction(entry))?;
        if self.module.defined_func(entry).is_none() {
            return Err(EngineError::NoSuchFunction(entry));
        }
        if ftype.params.len() != args.len() {
            return Err(EngineError::ArityMismatch {
                func: entry,
                expected: ftype.params.len(),
                got: args.len(),
            });
        }
        for arg in args {
            initial.push(arg);
        }
        self.push_entry_frame(&mut initial, entry);

        let started = Instant::now();
        let mut stats = ExploreStats::default();
        let mut done: Vec<PathState> = Vec::new();
        let mut work: Vec<PathState> = vec![initial];
        'outer: while let Some(mut state) = work.pop() {
            loop {
                if let Some(budget) = self.config.time_budget {
                    if started.elapsed() >= budget {
                        stats.truncated = true;
                        state.exhaust("exploration time budget exhausted".into());
                        Self::account(&mut stats, &mut done, state);
                        break 'outer;
                    }
                }
                if done.len() >= self.config.max_paths {
                    stats.truncated = true;
                    break 'outer;
                }
                let mut successors = self.step(state)?;
                match successors.len() {
                    0 => {
                        stats.pruned += 1;
                        continue 'outer;
                    }
                    1 => {
                        let next = successors.pop().expect("length checked");
                        if next.status == PathStatus::Running {
                            state = next;
                        } else {
                            Self::account(&mut stats, &mut done, next);
                            continue 'outer;
                        }
                    }
                    _ => {
                        // LIFO worklist: push in reverse so the first
                        // successor (the taken branch) continues next.
                        for child in successors.into_iter().rev() {
                            if child.status == PathStatus::Running {
                                work.push(child);
                            } else {
                                Self::account(&mut stats, &mut done, child);
                            }
                        }
                        continue 'outer;
                    }
                }
            }
        }
        EXHAUSTED_PATHS.set(EXHAUSTED_PATHS.get() + stats.exhausted as u64);
        if stats.truncated {
            TRUNCATED_RUNS.set(TRUNCATED_RUNS.get() + 1);
        }
        Ok(Exploration { paths: done, stats })
    }

    fn account(stats: &mut ExploreStats, done: &mut Vec<PathState>, state: PathState) {
        match state.status {
            PathStatus::Finished => {
                stats.finished += 1;
                done.push(state);
            }
            PathStatus::Trapped => {
                stats.trapped += 1;
                done.push(state);
            }
            PathStatus::BudgetExhausted => {
                stats.exhausted += 1;
                done.push(state);
            }
            PathStatus::Pruned => {
                stats.pruned += 1;
            }
            PathStatus::Running => unreachable!("running paths stay on the worklist"),
        }
    }

    fn push_entry_frame(&self, state: &mut PathState, entry: u32) {
        use crate::engine::state::{Frame, Label, LabelKind};
        let function = self.module.defined_func(entry).expect("checked by caller");
        let ftype = self.module.func_type(entry).expect("checked by caller");
        let n = ftype.params.len();
        let mut locals = state.stack.split_off(state.stack.len() - n);
        for vt in &function.locals {
            locals.push(SymExpr::concrete(0, vt.bits()));
        }
        let return_arity = ftype.results.len() as u32;
        let stack_base = state.stack.len();
        state.frames.push(Frame {
            func: entry,
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
    }
}
