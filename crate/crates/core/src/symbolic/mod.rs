//! Symbolic values, path conditions, and satisfiability checking.

pub mod expr;
pub mod smtlib;
pub mod solver;

pub use expr::{
    concat, concrete_bin, concrete_cmp, concrete_un, eval_binary, eval_compare, eval_unary,
    extract, ite, sign_extend, to_signed, width_mask, zero_extend, BinOp, BoolExpr, BoolNode,
    BoolRef, CmpOp, ExprError, Model, Origin, OriginSet, PathCondition, SymExpr, SymNode, SymRef,
    UnOp, VarId,
};
pub use smtlib::to_smtlib;
pub use solver::{
    thread_solver_stats, SatStatus, Solver, SolverBackend, SolverConfig, SolverError,
    SolverVerdict, DEFAULT_SOLVER_TIMEOUT,
};
