//! Models for the EOSIO `env` intrinsics the analysis relies on. Anything
//! unlisted falls back to seeded concrete results.

use crate::engine::memory::MemCell;
use crate::engine::state::{PathState, SendKind, Site, TraceEvent};
use crate::engine::{as_condition, concretize, EngineError};
use crate::host::{fallback, ActionContext, HostOutcome};
use crate::loader::ValType;
use crate::symbolic::{extract, Origin, SatStatus, Solver, SymExpr, SymRef};
use std::rc::Rc;

/// Ensures the action context exists, creating a fully symbolic one on
/// first use, and returns a snapshot of it.
fn action_ctx(state: &mut PathState) -> ActionContext {
    if state.host.action.is_none() {
        let ctx = ActionContext::symbolic(state);
        state.host.action = Some(ctx);
    }
    state.host.action.clone().expect("just ensured")
}

pub(super) fn dispatch(
    name: &str,
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
    results: &[ValType],
    site: Site,
) -> Result<HostOutcome, EngineError> {
    match name {
        "read_action_data" => read_action_data(solver, state, args),
        "action_data_size" => {
            let ctx = action_ctx(state);
            state.push(SymExpr::concrete(ctx.data.len() as u64, 32));
            Ok(HostOutcome::Proceed)
        }
        "current_receiver" => {
            let ctx = action_ctx(state);
            state.push(ctx.receiver);
            Ok(HostOutcome::Proceed)
        }
        // Authorization and notification requests only matter as events;
        // the HostCall record is already in the trace.
        "require_recipient" | "require_auth" | "require_auth2" => Ok(HostOutcome::Proceed),
        "eosio_assert" | "eosio_assert_message" | "eosio_assert_code" => {
            assert_model(solver, state, args, site)
        }
        "send_inline" | "send_context_free_inline" => {
            state.record(TraceEvent::Send {
                kind: SendKind::Inline,
                site,
            });
            Ok(HostOutcome::Proceed)
        }
        "send_deferred" => {
            state.record(TraceEvent::Send {
                kind: SendKind::Deferred,
                site,
            });
            Ok(HostOutcome::Proceed)
        }
        "tapos_block_num" => block_info(state, "tapos_block_num", site),
        "tapos_block_prefix" => block_info(state, "tapos_block_prefix", site),
        "memcpy" | "memmove" => memcpy(solver, state, args, results),
        "memset" => memset(solver, state, args, results),
        "abort" => Ok(HostOutcome::Trapped("abort".into())),
        "eosio_exit" => Ok(HostOutcome::Finished),
        _ => {
            fallback(state, results);
            Ok(HostOutcome::Proceed)
        }
    }
}

fn read_action_data(
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
) -> Result<HostOutcome, EngineError> {
    let (Some(ptr), Some(len)) = (args.first(), args.get(1)) else {
        return Ok(HostOutcome::Trapped("missing host-call argument".into()));
    };
    let ctx = action_ctx(state);
    let Some(ptr) = concretize(solver, state, ptr, "read_action_data pointer")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on action-data pointer".into()));
    };
    let Some(len) = concretize(solver, state, len, "read_action_data length")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on action-data length".into()));
    };
    let copied = (len as usize).min(ctx.data.len());
    if !state.memory.in_bounds(ptr, copied as u64) {
        return Ok(HostOutcome::Trapped(
            "out-of-bounds write in read_action_data".into(),
        ));
    }
    state.memory.write_cells(ptr, &ctx.data[..copied]);
    state.push(SymExpr::concrete(copied as u64, 32));
    Ok(HostOutcome::Proceed)
}

/// `eosio_assert(cond, msg)`: a false concrete condition traps; a symbolic
/// one constrains the path to the passing side and prunes it if that side
/// is infeasible.
fn assert_model(
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
    site: Site,
) -> Result<HostOutcome, EngineError> {
    let Some(cond_value) = args.first() else {
        return Ok(HostOutcome::Trapped("missing host-call argument".into()));
    };
    let cond = as_condition(cond_value);
    match cond.as_const() {
        Some(true) => Ok(HostOutcome::Proceed),
        Some(false) => Ok(HostOutcome::Trapped("assertion failed".into())),
        None => {
            state.assume(cond);
            state.record(TraceEvent::AssertFork { site });
            let verdict = solver.check_sat(&state.path_condition)?;
            match verdict.status {
                SatStatus::Unsat => Ok(HostOutcome::Pruned),
                SatStatus::Unknown => {
                    state.unknown_forks += 1;
                    Ok(HostOutcome::Proceed)
                }
                SatStatus::Sat => Ok(HostOutcome::Proceed),
            }
        }
    }
}

fn block_info(
    state: &mut PathState,
    what: &'static str,
    site: Site,
) -> Result<HostOutcome, EngineError> {
    let v = state.fresh_var(32, Origin::BlockInfo, what);
    state.record(TraceEvent::BlockInfoRead { what, site });
    state.push(v);
    Ok(HostOutcome::Proceed)
}

fn memcpy(
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
    results: &[ValType],
) -> Result<HostOutcome, EngineError> {
    let (Some(dest_expr), Some(src), Some(len)) = (args.first(), args.get(1), args.get(2)) else {
        return Ok(HostOutcome::Trapped("missing host-call argument".into()));
    };
    let dest_result = Rc::clone(dest_expr);
    let Some(dest) = concretize(solver, state, dest_expr, "memcpy dest")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on memcpy dest".into()));
    };
    let Some(src) = concretize(solver, state, src, "memcpy src")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on memcpy src".into()));
    };
    let Some(len) = concretize(solver, state, len, "memcpy length")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on memcpy length".into()));
    };
    if !state.memory.in_bounds(src, len) || !state.memory.in_bounds(dest, len) {
        return Ok(HostOutcome::Trapped("out-of-bounds memcpy".into()));
    }
    // Reading everything first makes overlapping moves safe.
    let cells = state.memory.read_cells(src, len);
    state.memory.write_cells(dest, &cells);
    if !results.is_empty() {
        state.push(dest_result);
    }
    Ok(HostOutcome::Proceed)
}

fn memset(
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
    results: &[ValType],
) -> Result<HostOutcome, EngineError> {
    let (Some(dest_expr), Some(value), Some(len)) = (args.first(), args.get(1), args.get(2)) else {
        return Ok(HostOutcome::Trapped("missing host-call argument".into()));
    };
    let dest_result = Rc::clone(dest_expr);
    let Some(dest) = concretize(solver, state, dest_expr, "memset dest")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on memset dest".into()));
    };
    let Some(len) = concretize(solver, state, len, "memset length")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on memset length".into()));
    };
    if !state.memory.in_bounds(dest, len) {
        return Ok(HostOutcome::Trapped("out-of-bounds memset".into()));
    }
    let cell = match value.as_concrete() {
        Some(v) => MemCell::Concrete(v as u8),
        None => MemCell::Slice {
            expr: extract(7, 0, value)?,
            byte: 0,
        },
    };
    for i in 0..len {
        state.memory.set_cell(dest + i, cell.clone());
    }
    if !results.is_empty() {
        state.push(dest_result);
    }
    Ok(HostOutcome::Proceed)
}
