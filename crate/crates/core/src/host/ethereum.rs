//! Models for the Ethereum-flavored Wasm (`ethereum` namespace) intrinsics.

use crate::engine::memory::MemCell;
use crate::engine::state::{DelegateClass, PathState, SendKind, Site, TraceEvent};
use crate::engine::{concretize, EngineError};
use crate::host::{fallback, EthContext, HostOutcome};
use crate::loader::ValType;
use crate::symbolic::{Origin, OriginSet, Solver, SymExpr, SymRef};
use std::rc::Rc;

fn eth_ctx(state: &mut PathState) -> EthContext {
    if state.host.eth.is_none() {
        let ctx = EthContext::symbolic(state);
        state.host.eth = Some(ctx);
    }
    state.host.eth.clone().expect("just ensured")
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
        "getCallValue" => get_call_value(solver, state, args),
        "getCallDataSize" => {
            let ctx = eth_ctx(state);
            state.push(SymExpr::concrete(ctx.call_data.len() as u64, 32));
            Ok(HostOutcome::Proceed)
        }
        "callDataCopy" => call_data_copy(solver, state, args),
        "getCaller" => get_caller(solver, state, args),
        // Value-bearing external calls; the result is a fresh symbolic i32
        // so both success and failure continuations are explored.
        "call" | "callCode" => {
            state.record(TraceEvent::Send {
                kind: SendKind::EthCall,
                site,
            });
            let r = state.fresh_var(32, Origin::HostFresh, "call_result");
            state.push(r);
            Ok(HostOutcome::Proceed)
        }
        "callStatic" => {
            let r = state.fresh_var(32, Origin::HostFresh, "callstatic_result");
            state.push(r);
            Ok(HostOutcome::Proceed)
        }
        "callDelegate" => call_delegate(solver, state, args, site),
        "getBlockNumber" => block_handle(state, true, site),
        "getBlockTimestamp" => block_handle(state, false, site),
        "getBlockHash" => block_hash(solver, state, args, site),
        "storageStore" => storage_store(solver, state, args),
        "storageLoad" => storage_load(solver, state, args),
        "finish" => Ok(HostOutcome::Finished),
        "revert" => Ok(HostOutcome::Trapped("revert".into())),
        "selfDestruct" => Ok(HostOutcome::Finished),
        "useGas" => Ok(HostOutcome::Proceed),
        "getGasLeft" => {
            let r = state.fresh_var(64, Origin::HostFresh, "gas_left");
            state.push(r);
            Ok(HostOutcome::Proceed)
        }
        _ => {
            fallback(state, results);
            Ok(HostOutcome::Proceed)
        }
    }
}

/// Writes the 128-bit call value little-endian at the result pointer: the
/// tagged 64-bit value below eight zero bytes.
fn get_call_value(
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
) -> Result<HostOutcome, EngineError> {
    let Some(ptr) = args.first() else {
        return Ok(HostOutcome::Trapped("missing host-call argument".into()));
    };
    let ctx = eth_ctx(state);
    let Some(ptr) = concretize(solver, state, ptr, "getCallValue pointer")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on call-value pointer".into()));
    };
    if !state.memory.in_bounds(ptr, 16) {
        return Ok(HostOutcome::Trapped("out-of-bounds getCallValue write".into()));
    }
    for byte in 0..8u8 {
        state.memory.set_cell(
            ptr + byte as u64,
            MemCell::Slice {
                expr: Rc::clone(&ctx.call_value),
                byte,
            },
        );
    }
    for byte in 8..16u64 {
        state.memory.set_cell(ptr + byte, MemCell::Concrete(0));
    }
    Ok(HostOutcome::Proceed)
}

fn call_data_copy(
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
) -> Result<HostOutcome, EngineError> {
    let (Some(result_ptr), Some(data_off), Some(length)) =
        (args.first(), args.get(1), args.get(2))
    else {
        return Ok(HostOutcome::Trapped("missing host-call argument".into()));
    };
    let ctx = eth_ctx(state);
    let Some(dst) = concretize(solver, state, result_ptr, "callDataCopy dest")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on call-data dest".into()));
    };
    let Some(off) = concretize(solver, state, data_off, "callDataCopy offset")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on call-data offset".into()));
    };
    let Some(len) = concretize(solver, state, length, "callDataCopy length")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on call-data length".into()));
    };
    if !state.memory.in_bounds(dst, len) {
        return Ok(HostOutcome::Trapped("out-of-bounds callDataCopy".into()));
    }
    for i in 0..len {
        // Reads past the call data pad with zero, as on chain.
        let cell = ctx
            .call_data
            .get((off + i) as usize)
            .cloned()
            .unwrap_or(MemCell::Concrete(0));
        state.memory.set_cell(dst + i, cell);
    }
    Ok(HostOutcome::Proceed)
}

fn get_caller(
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
) -> Result<HostOutcome, EngineError> {
    let Some(ptr) = args.first() else {
        return Ok(HostOutcome::Trapped("missing host-call argument".into()));
    };
    let ctx = eth_ctx(state);
    let Some(ptr) = concretize(solver, state, ptr, "getCaller pointer")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on caller pointer".into()));
    };
    if !state.memory.in_bounds(ptr, ctx.caller.len() as u64) {
        return Ok(HostOutcome::Trapped("out-of-bounds getCaller write".into()));
    }
    state.memory.write_cells(ptr, &ctx.caller);
    Ok(HostOutcome::Proceed)
}

/// Classifies a delegatecall by whether its target address and payload are
/// fully concrete, and if not, which origins the symbolic parts carry.
fn call_delegate(
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
    site: Site,
) -> Result<HostOutcome, EngineError> {
    let (Some(addr_ptr), Some(data_ptr), Some(data_len)) = (args.get(1), args.get(2), args.get(3))
    else {
        return Ok(HostOutcome::Trapped("missing host-call argument".into()));
    };
    let Some(addr) = concretize(solver, state, addr_ptr, "callDelegate address pointer")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on delegate address".into()));
    };
    let Some(dp) = concretize(solver, state, data_ptr, "callDelegate data pointer")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on delegate data".into()));
    };
    let Some(dl) = concretize(solver, state, data_len, "callDelegate data length")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on delegate length".into()));
    };
    if !state.memory.in_bounds(addr, 20) || !state.memory.in_bounds(dp, dl) {
        return Ok(HostOutcome::Trapped("out-of-bounds callDelegate read".into()));
    }
    let mut cells = state.memory.read_cells(addr, 20);
    cells.extend(state.memory.read_cells(dp, dl));
    let mut origins = OriginSet::EMPTY;
    let mut constant = true;
    for cell in &cells {
        if let MemCell::Slice { expr, .. } = cell {
            constant = false;
            origins = origins.union(expr.origins());
        }
    }
    let class = if constant {
        DelegateClass::Constant
    } else {
        DelegateClass::NonConstant(origins)
    };
    state.record(TraceEvent::DelegateCall { class, site });
    let r = state.fresh_var(32, Origin::HostFresh, "delegate_result");
    state.push(r);
    Ok(HostOutcome::Proceed)
}

/// Block number/timestamp: one fresh handle per path, then stable.
fn block_handle(
    state: &mut PathState,
    number: bool,
    site: Site,
) -> Result<HostOutcome, EngineError> {
    eth_ctx(state);
    let what = if number { "block_number" } else { "block_timestamp" };
    let ctx = state.host.eth.as_mut().expect("just ensured");
    let slot = if number {
        &mut ctx.block_number
    } else {
        &mut ctx.block_timestamp
    };
    let existing = slot.clone();
    let v = match existing {
        Some(v) => v,
        None => {
            let v = state.fresh_var(64, Origin::BlockInfo, what);
            let ctx = state.host.eth.as_mut().expect("just ensured");
            let slot = if number {
                &mut ctx.block_number
            } else {
                &mut ctx.block_timestamp
            };
            *slot = Some(Rc::clone(&v));
            v
        }
    };
    state.record(TraceEvent::BlockInfoRead { what, site });
    state.push(v);
    Ok(HostOutcome::Proceed)
}

fn block_hash(
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
    site: Site,
) -> Result<HostOutcome, EngineError> {
    let Some(result_ptr) = args.get(1) else {
        return Ok(HostOutcome::Trapped("missing host-call argument".into()));
    };
    eth_ctx(state);
    let Some(ptr) = concretize(solver, state, result_ptr, "getBlockHash pointer")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on block-hash pointer".into()));
    };
    if !state.memory.in_bounds(ptr, 32) {
        return Ok(HostOutcome::Trapped("out-of-bounds getBlockHash write".into()));
    }
    let cached = state.host.eth.as_ref().expect("just ensured").block_hash.clone();
    let cells = match cached {
        Some(cells) => cells,
        None => {
            let mut cells = Vec::with_capacity(32);
            for q in 0..4 {
                let var = state.fresh_var(64, Origin::BlockInfo, &format!("block_hash_q{q}"));
                for byte in 0..8u8 {
                    cells.push(MemCell::Slice {
                        expr: Rc::clone(&var),
                        byte,
                    });
                }
            }
            state.host.eth.as_mut().expect("just ensured").block_hash = Some(cells.clone());
            cells
        }
    };
    state.memory.write_cells(ptr, &cells);
    state.record(TraceEvent::BlockInfoRead {
        what: "block_hash",
        site,
    });
    state.push(SymExpr::concrete(0, 32));
    Ok(HostOutcome::Proceed)
}

/// Reads the 32-byte storage key at `key_ptr`, pinning any symbolic bytes
/// to concrete values so it can index the storage map.
fn storage_key(
    solver: &Solver,
    state: &mut PathState,
    key_ptr: u64,
) -> Result<Option<Vec<u8>>, EngineError> {
    let mut key = Vec::with_capacity(32);
    for q in 0..4 {
        let word = state.memory.load(key_ptr + 8 * q, 8);
        let Some(v) = concretize(solver, state, &word, "storage key")? else {
            return Ok(None);
        };
        key.extend_from_slice(&v.to_le_bytes());
    }
    Ok(Some(key))
}

fn storage_store(
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
) -> Result<HostOutcome, EngineError> {
    let (Some(key_ptr), Some(value_ptr)) = (args.first(), args.get(1)) else {
        return Ok(HostOutcome::Trapped("missing host-call argument".into()));
    };
    eth_ctx(state);
    let Some(kp) = concretize(solver, state, key_ptr, "storageStore key pointer")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on storage key pointer".into()));
    };
    let Some(vp) = concretize(solver, state, value_ptr, "storageStore value pointer")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on storage value pointer".into()));
    };
    if !state.memory.in_bounds(kp, 32) || !state.memory.in_bounds(vp, 32) {
        return Ok(HostOutcome::Trapped("out-of-bounds storageStore".into()));
    }
    let Some(key) = storage_key(solver, state, kp)? else {
        return Ok(HostOutcome::Exhausted("solver unknown on storage key".into()));
    };
    let cells = state.memory.read_cells(vp, 32);
    state
        .host
        .eth
        .as_mut()
        .expect("just ensured")
        .storage
        .insert(key, cells);
    Ok(HostOutcome::Proceed)
}

fn storage_load(
    solver: &Solver,
    state: &mut PathState,
    args: &[SymRef],
) -> Result<HostOutcome, EngineError> {
    let (Some(key_ptr), Some(result_ptr)) = (args.first(), args.get(1)) else {
        return Ok(HostOutcome::Trapped("missing host-call argument".into()));
    };
    eth_ctx(state);
    let Some(kp) = concretize(solver, state, key_ptr, "storageLoad key pointer")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on storage key pointer".into()));
    };
    let Some(rp) = concretize(solver, state, result_ptr, "storageLoad result pointer")? else {
        return Ok(HostOutcome::Exhausted("solver unknown on storage result pointer".into()));
    };
    if !state.memory.in_bounds(kp, 32) || !state.memory.in_bounds(rp, 32) {
        return Ok(HostOutcome::Trapped("out-of-bounds storageLoad".into()));
    }
    let Some(key) = storage_key(solver, state, kp)? else {
        return Ok(HostOutcome::Exhausted("solver unknown on storage key".into()));
    };
    let cached = state
        .host
        .eth
        .as_ref()
        .expect("just ensured")
        .storage
        .get(&key)
        .cloned();
    let cells = match cached {
        Some(cells) => cells,
        None => {
            // Unwritten slots read as fresh storage-tagged unknowns that
            // stay stable for the rest of the path.
            let mut cells = Vec::with_capacity(32);
            for q in 0..4 {
                let var = state.fresh_var(64, Origin::Storage, &format!("storage_q{q}"));
                for byte in 0..8u8 {
                    cells.push(MemCell::Slice {
                        expr: Rc::clone(&var),
                        byte,
                    });
                }
            }
            state
                .host
                .eth
                .as_mut()
                .expect("just ensured")
                .storage
                .insert(key, cells.clone());
            cells
        }
    };
    state.memory.write_cells(rp, &cells);
    Ok(HostOutcome::Proceed)
}
