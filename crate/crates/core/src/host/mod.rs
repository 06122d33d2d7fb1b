//! Models of the EOSIO and Ethereum (EWasm) host interfaces. Imports the
//! models do not cover fall back to deterministic seeded concrete results,
//! so execution always proceeds.

pub mod names;

mod eosio;
mod ethereum;

pub use names::{decode_name, encode_name, NameError};

use crate::engine::memory::MemCell;
use crate::engine::state::{PathState, Site, TraceEvent};
use crate::engine::EngineError;
use crate::loader::{Module, ValType};
use crate::symbolic::{width_mask, Origin, OriginSet, Solver, SymExpr, SymRef};
use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::rc::Rc;

/// Which blockchain's host interface a module targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Eosio,
    Ethereum,
}

impl Platform {
    pub fn label(self) -> &'static str {
        match self {
            Platform::Eosio => "eosio",
            Platform::Ethereum => "ethereum",
        }
    }
}

/// Why platform auto-detection failed for a module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlatformDetectError {
    /// Both an `ethereum` import namespace and an `apply` export exist.
    Ambiguous,
    /// Neither signal is present.
    Unknown,
}

/// Picks the platform from module structure: an `ethereum.*` import means
/// Ethereum, an exported `apply` means EOSIO.
pub fn detect_platform(module: &Module) -> Result<Platform, PlatformDetectError> {
    let eth = module.imports_namespace("ethereum");
    let eos = module.export_lookup("apply").is_some();
    match (eth, eos) {
        (true, false) => Ok(Platform::Ethereum),
        (false, true) => Ok(Platform::Eosio),
        (true, true) => Err(PlatformDetectError::Ambiguous),
        (false, false) => Err(PlatformDetectError::Unknown),
    }
}

/// How a host call left the path.
#[derive(Debug)]
pub enum HostOutcome {
    Proceed,
    Trapped(String),
    Finished,
    Pruned,
    /// The solver went unknown while pinning an operand; stop gracefully.
    Exhausted(String),
}

/// The inbound EOSIO action being analyzed.
#[derive(Debug, Clone)]
pub struct ActionContext {
    /// The account the contract runs as (`apply` parameter 1).
    pub receiver: SymRef,
    /// The account the action was originally sent to (`apply` parameter 2).
    pub code: SymRef,
    /// The action name (`apply` parameter 3).
    pub action: SymRef,
    /// Serialized action payload, readable via `read_action_data`.
    pub data: Vec<MemCell>,
}

/// Default symbolic action-data size in bytes.
pub const ACTION_DATA_BYTES: usize = 128;

impl ActionContext {
    /// Fully symbolic context: fresh tagged receiver/code/action plus a
    /// 128-byte symbolic payload. Payload bytes 8..16 hold the `to` field
    /// of a token transfer, so they carry the transfer-recipient tag too.
    pub fn symbolic(state: &mut PathState) -> ActionContext {
        let receiver = state.fresh_var(64, Origin::ApplyReceiver, "receiver");
        let code = state.fresh_var(64, Origin::ApplyCode, "code");
        let action = state.fresh_var(64, Origin::ApplyAction, "action");
        let data = Self::symbolic_data(state);
        ActionContext {
            receiver,
            code,
            action,
            data,
        }
    }

    /// Context with pinned names but a symbolic payload, for replaying a
    /// concrete dispatch.
    pub fn with_names(state: &mut PathState, receiver: u64, code: u64, action: u64) -> ActionContext {
        ActionContext {
            receiver: SymExpr::concrete(receiver, 64),
            code: SymExpr::concrete(code, 64),
            action: SymExpr::concrete(action, 64),
            data: Self::symbolic_data(state),
        }
    }

    fn symbolic_data(state: &mut PathState) -> Vec<MemCell> {
        let mut data = Vec::with_capacity(ACTION_DATA_BYTES);
        for q in 0..ACTION_DATA_BYTES / 8 {
            let extra = if q == 1 {
                OriginSet::of(Origin::TransferTo)
            } else {
                OriginSet::EMPTY
            };
            let var = state.fresh_var_extra(
                64,
                Origin::ActionData,
                extra,
                &format!("action_data_q{q}"),
            );
            for byte in 0..8u8 {
                data.push(MemCell::Slice {
                    expr: Rc::clone(&var),
                    byte,
                });
            }
        }
        data
    }
}

/// Default symbolic call-data size in bytes.
pub const CALL_DATA_BYTES: usize = 128;

/// The inbound Ethereum call being analyzed.
#[derive(Debug, Clone)]
pub struct EthContext {
    /// Low 64 bits of the wei amount attached to the call; the upper bits
    /// of the 128-bit value read as zero.
    pub call_value: SymRef,
    pub call_data: Vec<MemCell>,
    /// The 20-byte caller address.
    pub caller: Vec<MemCell>,
    /// Block handles are created on first read and then stable per path.
    pub block_number: Option<SymRef>,
    pub block_timestamp: Option<SymRef>,
    pub block_hash: Option<Vec<MemCell>>,
    /// Path-local storage written/read through storageStore/storageLoad.
    pub storage: BTreeMap<Vec<u8>, Vec<MemCell>>,
}

impl EthContext {
    pub fn symbolic(state: &mut PathState) -> EthContext {
        let call_value = state.fresh_var(64, Origin::CallData, "callvalue");
        let mut call_data = Vec::with_capacity(CALL_DATA_BYTES);
        for q in 0..CALL_DATA_BYTES / 8 {
            let var = state.fresh_var(64, Origin::CallData, &format!("calldata_q{q}"));
            for byte in 0..8u8 {
                call_data.push(MemCell::Slice {
                    expr: Rc::clone(&var),
                    byte,
                });
            }
        }
        let mut caller = Vec::with_capacity(20);
        for (q, bytes) in [(0u32, 8u8), (1, 8), (2, 4)] {
            let var = state.fresh_var(u32::from(bytes) * 8, Origin::CallData, &format!("caller_q{q}"));
            for byte in 0..bytes {
                caller.push(MemCell::Slice {
                    expr: Rc::clone(&var),
                    byte,
                });
            }
        }
        EthContext {
            call_value,
            call_data,
            caller,
            block_number: None,
            block_timestamp: None,
            block_hash: None,
            storage: BTreeMap::new(),
        }
    }
}

/// Host-side state carried by each path.
#[derive(Debug, Clone, Default)]
pub struct HostState {
    pub action: Option<ActionContext>,
    pub eth: Option<EthContext>,
}

/// Entry point the engine calls for every imported function.
pub fn dispatch_import(
    module: &Module,
    solver: &Solver,
    state: &mut PathState,
    func_idx: u32,
    args: Vec<SymRef>,
    site: Site,
) -> Result<HostOutcome, EngineError> {
    let Some((ns, name)) = module.imported_func(func_idx) else {
        return Ok(HostOutcome::Trapped("call to unknown import".into()));
    };
    state.record(TraceEvent::HostCall {
        name: format!("{ns}.{name}"),
        args: args.clone(),
        site,
    });
    let results: Vec<ValType> = module
        .func_type(func_idx)
        .map(|t| t.results.clone())
        .unwrap_or_default();
    match ns {
        "env" => eosio::dispatch(name, solver, state, &args, &results, site),
        "ethereum" => ethereum::dispatch(name, solver, state, &args, &results, site),
        _ => {
            fallback(state, &results);
            Ok(HostOutcome::Proceed)
        }
    }
}

/// Unmodeled import: push a deterministic seeded concrete value per result.
pub(crate) fn fallback(state: &mut PathState, results: &[ValType]) {
    for ty in results {
        let bits = state.rng.next_u64() & width_mask(ty.bits());
        state.push(SymExpr::concrete(bits, ty.bits()));
    }
}
