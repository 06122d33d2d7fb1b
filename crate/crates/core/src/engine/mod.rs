//! Symbolic execution of decoded modules: per-path state, a small-step
//! interpreter that forks at symbolic control flow, and a depth-first
//! explorer with loop, path, instruction, and time budgets.

pub mod memory;
pub mod state;

mod exec;
mod explore;

pub use exec::{as_condition, bool_value, concretize, Engine};
pub use explore::{thread_engine_stats, Exploration, ExploreStats};
pub use memory::{MemCell, Memory, PAGE_SIZE};
pub use state::{
    CreatedVar, DelegateClass, ExploreConfig, Frame, Label, LabelKind, PathState, PathStatus,
    SendKind, Site, TraceEvent,
};

use crate::symbolic::{ExprError, SolverError};
use thiserror::Error;

/// Instantiation and exploration failures that abort one contract's
/// analysis (never the whole corpus run).
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{kind} places {len} bytes at offset {offset}, beyond size {size}")]
    OffsetOutOfBounds {
        kind: &'static str,
        offset: u64,
        len: u64,
        size: u64,
    },
    #[error("initializer for {kind} {index} is not a supported constant expression")]
    NonConstInitializer { kind: &'static str, index: u32 },
    #[error("function {func} takes {expected} arguments, got {got}")]
    ArityMismatch {
        func: u32,
        expected: usize,
        got: usize,
    },
    #[error("no defined function with index {0}")]
    NoSuchFunction(u32),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}
