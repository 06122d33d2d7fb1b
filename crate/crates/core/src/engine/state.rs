//! Per-path execution state: operand stack, call frames, structured-control
//! labels, memory, globals, the path condition, and the event trace that
//! vulnerability oracles consume.

use crate::engine::memory::Memory;
use crate::host::HostState;
use crate::symbolic::{BoolRef, Origin, OriginSet, PathCondition, SymExpr, SymRef, VarId};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::rc::Rc;
use std::time::Duration;

/// Location of an instruction: (function index, instruction offset).
pub type Site = (u32, u32);

/// What kind of structured construct a label belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    /// The implicit function-body label; branching to it returns.
    Func,
    Block,
    Loop,
    If,
}

/// A control label a branch can target.
#[derive(Debug, Clone)]
pub struct Label {
    pub kind: LabelKind,
    /// Values a branch to this label carries (0 or 1).
    pub arity: u32,
    /// Instruction offset control resumes at when branching here.
    pub cont: u32,
    /// Operand-stack height when the label was pushed.
    pub stack_height: usize,
    /// For loops, the offset of the `loop` opener, keying its counter.
    pub loop_head: Option<u32>,
}

/// One function activation.
#[derive(Debug, Clone)]
pub struct Frame {
    /// Absolute function index (import space included).
    pub func: u32,
    pub locals: Vec<SymRef>,
    pub return_arity: u32,
    pub labels: Vec<Label>,
    /// Offset of the next instruction to execute in this function's body.
    pub pc: u32,
    /// Operand-stack height at entry; the callee's region lies above it.
    pub stack_base: usize,
}

/// Whether an inter-contract send was an EOSIO inline action, an EOSIO
/// deferred transaction, or an Ethereum call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendKind {
    Inline,
    Deferred,
    EthCall,
}

/// How a delegatecall target/payload was classified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DelegateClass {
    /// Address and payload bytes were all concrete.
    Constant,
    /// Something was symbolic; the union of its origin tags.
    NonConstant(OriginSet),
}

/// Events recorded while a path executes. Detectors pattern-match these.
#[derive(Debug, Clone)]
pub enum TraceEvent {
    /// An imported function was invoked (modeled or fallback).
    HostCall {
        name: String,
        args: Vec<SymRef>,
        site: Site,
    },
    /// A 64-bit equality test between an action/code-tagged expression and
    /// a constant account or action name.
    NameCompare {
        expr: SymRef,
        constant: u64,
        site: Site,
    },
    /// An equality test between the receiver and a transfer recipient.
    SelfToCompare { site: Site },
    Send {
        kind: SendKind,
        site: Site,
    },
    /// Block metadata (tapos fields, number, timestamp, hash) was read.
    BlockInfoRead { what: &'static str, site: Site },
    DelegateCall {
        class: DelegateClass,
        site: Site,
    },
    /// A `call_indirect` resolved (concretely or per-slot) to `target`.
    IndirectCall { target: u32, site: Site },
    /// A direct call to an in-module function.
    DirectCall { func: u32, site: Site },
    /// An assertion with a symbolic condition constrained the path.
    AssertFork { site: Site },
    Finished,
    Trapped,
}

/// Terminal and transient path statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStatus {
    Running,
    Finished,
    Trapped,
    /// Infeasible under the solver; dropped from results.
    Pruned,
    /// Loop bound, instruction budget, or an unmodeled construct stopped it.
    BudgetExhausted,
}

/// A variable created during execution, in creation order, so a witness
/// replay can rebuild the same bindings.
#[derive(Debug, Clone)]
pub struct CreatedVar {
    pub id: VarId,
    pub width: u32,
    pub origin: Origin,
    pub name: String,
}

/// Exploration budgets and reproducibility knobs.
#[derive(Debug, Clone)]
pub struct ExploreConfig {
    /// Back-edges allowed per loop label per dynamic entry.
    pub loop_bound: u32,
    /// Cap on completed paths per entry-point exploration.
    pub max_paths: usize,
    /// Cap on instructions executed along one path.
    pub max_instructions: u64,
    /// Seed for the per-path deterministic generator.
    pub seed: u64,
    /// Optional wall-clock budget for one exploration.
    pub time_budget: Option<Duration>,
}

impl Default for ExploreConfig {
    fn default() -> ExploreConfig {
        ExploreConfig {
            loop_bound: 10,
            max_paths: 2000,
            max_instructions: 200_000,
            seed: 0,
            time_budget: None,
        }
    }
}

/// Everything one explored path owns. Cloning forks the path; shared
/// structure (expressions, memory chunks, the table) is reference-counted.
#[derive(Debug, Clone)]
pub struct PathState {
    pub stack: Vec<SymRef>,
    pub frames: Vec<Frame>,
    pub memory: Memory,
    pub globals: Vec<SymRef>,
    /// Function table, immutable after instantiation.
    pub table: Rc<Vec<Option<u32>>>,
    pub path_condition: PathCondition,
    /// Back-edge counts keyed by (function, loop-opener offset).
    pub loop_counters: HashMap<(u32, u32), u32>,
    pub trace: Vec<TraceEvent>,
    pub status: PathStatus,
    /// Why the path stopped early, when it did.
    pub diagnostic: Option<String>,
    pub host: HostState,
    pub rng: ChaCha8Rng,
    next_var: u32,
    pub created_vars: Vec<CreatedVar>,
    pub instructions_retired: u64,
    /// Solver `unknown` verdicts absorbed at forks along this path.
    pub unknown_forks: u32,
}

impl PathState {
    pub fn new(memory: Memory, globals: Vec<SymRef>, table: Vec<Option<u32>>, seed: u64) -> PathState {
        PathState {
            stack: Vec::new(),
            frames: Vec::new(),
            memory,
            globals,
            table: Rc::new(table),
            path_condition: PathCondition::new(),
            loop_counters: HashMap::new(),
            trace: Vec::new(),
            status: PathStatus::Running,
            diagnostic: None,
            host: HostState::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_var: 0,
            created_vars: Vec::new(),
            instructions_retired: 0,
            unknown_forks: 0,
        }
    }

    /// Allocates a fresh symbolic variable and logs it for replay.
    pub fn fresh_var(&mut self, width: u32, origin: Origin, name: &str) -> SymRef {
        self.fresh_var_extra(width, origin, OriginSet::EMPTY, name)
    }

    /// As `fresh_var`, with extra origin tags beyond the primary one.
    pub fn fresh_var_extra(
        &mut self,
        width: u32,
        origin: Origin,
        extra: OriginSet,
        name: &str,
    ) -> SymRef {
        let id = VarId(self.next_var);
        self.next_var += 1;
        self.created_vars.push(CreatedVar {
            id,
            width,
            origin,
            name: name.to_string(),
        });
        SymExpr::variable_tagged(id, width, origin, extra, name)
    }

    pub fn push(&mut self, v: SymRef) {
        self.stack.push(v);
    }

    /// Pops an operand; an underflow marks the module malformed.
    pub fn pop(&mut self) -> Option<SymRef> {
        self.stack.pop()
    }

    pub fn frame(&self) -> &Frame {
        self.frames.last().expect("running path has a frame")
    }

    pub fn frame_mut(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("running path has a frame")
    }

    /// Appends a conjunct to the path condition.
    pub fn assume(&mut self, cond: BoolRef) {
        self.path_condition.push(cond);
    }

    pub fn record(&mut self, event: TraceEvent) {
        self.trace.push(event);
    }

    pub fn finish(&mut self) {
        self.status = PathStatus::Finished;
        self.record(TraceEvent::Finished);
    }

    pub fn trap(&mut self, why: &str) {
        self.status = PathStatus::Trapped;
        if self.diagnostic.is_none() {
            self.diagnostic = Some(why.to_string());
        }
        self.record(TraceEvent::Trapped);
    }

    pub fn exhaust(&mut self, why: String) {
        self.status = PathStatus::BudgetExhausted;
        if self.diagnostic.is_none() {
            self.diagnostic = Some(why);
        }
    }

    pub fn prune(&mut self) {
        self.status = PathStatus::Pruned;
    }

    /// The site of the instruction at `offset` in the current frame.
    pub fn site_at(&self, offset: u32) -> Site {
        (self.frame().func, offset)
    }
}
