//! Host-interface behavior: platform detection, the EOSIO action context
//! and intrinsics, the Ethereum call context and intrinsics, and the
//! deterministic fallback for unmodeled imports.

use proptest::prelude::*;
use wana_core::engine::{
    DelegateClass, Engine, ExploreConfig, Exploration, MemCell, PathState, PathStatus, SendKind,
    TraceEvent,
};
use wana_core::host::{
    decode_name, detect_platform, encode_name, ActionContext, EthContext, Platform,
    PlatformDetectError,
};
use wana_core::loader::decode_module;
use wana_core::symbolic::{Model, Origin, Solver, SolverConfig, SymRef, VarId};

fn run_with(
    src: &str,
    config: ExploreConfig,
    entry: &str,
    setup: impl FnOnce(&mut PathState) -> Vec<SymRef>,
) -> Exploration {
    let bytes = wat::parse_str(src).expect("fixture compiles");
    let module = decode_module(&bytes).expect("fixture decodes");
    let engine = Engine::new(&module, config, Solver::new(SolverConfig::default()));
    let mut state = engine.instantiate().expect("instantiates");
    let args = setup(&mut state);
    let entry = module.export_lookup(entry).expect("entry export");
    engine.run(state, entry, args).expect("explores")
}

fn var_named(path: &PathState, name: &str) -> VarId {
    path.created_vars
        .iter()
        .find(|v| v.name == name)
        .unwrap_or_else(|| panic!("no variable named {name}"))
        .id
}

fn host_calls<'a>(path: &'a PathState) -> Vec<&'a str> {
    path.trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::HostCall { name, .. } => Some(name.as_str()),
            _ => None,
        })
        .collect()
}

#[test]
fn platform_detection_uses_imports_and_exports() {
    let cases = [
        (
            r#"(module (func (export "apply") (param i64 i64 i64)))"#,
            Ok(Platform::Eosio),
        ),
        (
            r#"(module (import "ethereum" "getCallValue" (func (param i32))) (func (export "main")))"#,
            Ok(Platform::Ethereum),
        ),
        (
            r#"(module (import "ethereum" "getCallValue" (func (param i32)))
                       (func (export "apply") (param i64 i64 i64)))"#,
            Err(PlatformDetectError::Ambiguous),
        ),
        (
            r#"(module (func (export "main")))"#,
            Err(PlatformDetectError::Unknown),
        ),
    ];
    for (src, expected) in cases {
        let bytes = wat::parse_str(src).unwrap();
        let module = decode_module(&bytes).unwrap();
        assert_eq!(detect_platform(&module), expected, "{src}");
    }
}

#[test]
fn symbolic_apply_dispatch_forks_and_records_the_name_compare() {
    let transfer = encode_name("transfer").unwrap();
    let src = format!(
        r#"(module
          (import "env" "require_auth" (func $ra (param i64)))
          (memory 1)
          (func (export "apply") (param i64 i64 i64)
            local.get 2
            i64.const {}
            i64.eq
            if
              local.get 0
              call $ra
            end))"#,
        transfer as i64
    );
    let out = run_with(&src, ExploreConfig::default(), "apply", |state| {
        let ctx = ActionContext::symbolic(state);
        let args = vec![ctx.receiver.clone(), ctx.code.clone(), ctx.action.clone()];
        state.host.action = Some(ctx);
        args
    });
    assert_eq!(out.paths.len(), 2);
    for path in &out.paths {
        assert_eq!(path.status, PathStatus::Finished);
        assert!(path.trace.iter().any(|e| matches!(
            e,
            TraceEvent::NameCompare { constant, .. } if *constant == transfer
        )));
    }
    // The first (branch-taken) path handles the transfer and requires auth.
    assert_eq!(host_calls(&out.paths[0]), vec!["env.require_auth"]);
    assert!(host_calls(&out.paths[1]).is_empty());
    let action = var_named(&out.paths[0], "action");
    let mut is_transfer = Model::new();
    is_transfer.insert(action, transfer);
    let mut is_onerror = Model::new();
    is_onerror.insert(action, encode_name("onerror").unwrap());
    assert_eq!(out.paths[0].path_condition.holds_under(&is_transfer), Some(true));
    assert_eq!(out.paths[0].path_condition.holds_under(&is_onerror), Some(false));
    assert_eq!(out.paths[1].path_condition.holds_under(&is_transfer), Some(false));
    assert_eq!(out.paths[1].path_condition.holds_under(&is_onerror), Some(true));
}

#[test]
fn read_action_data_copies_the_payload_into_memory() {
    let src = r#"(module
      (import "env" "action_data_size" (func $ads (result i32)))
      (import "env" "read_action_data" (func $rad (param i32 i32) (result i32)))
      (memory 1)
      (func (export "run") (result i64)
        i32.const 0
        call $ads
        call $rad
        i64.extend_i32_u
        i32.const 8
        i64.load
        i64.add))"#;
    let out = run_with(src, ExploreConfig::default(), "run", |_| vec![]);
    assert_eq!(out.paths.len(), 1);
    let path = &out.paths[0];
    assert_eq!(path.status, PathStatus::Finished);
    assert_eq!(
        host_calls(path),
        vec!["env.action_data_size", "env.read_action_data"]
    );
    // Result is copied-length (128) plus the payload quadword at offset 8.
    let q1 = var_named(path, "action_data_q1");
    let mut model = Model::new();
    model.insert(q1, 0x1122_3344_5566_7788);
    assert_eq!(path.stack[0].eval(&model), Some(128 + 0x1122_3344_5566_7788));
    // That quadword carries the transfer-recipient tag.
    let loaded = path.memory.load(8, 8);
    assert!(loaded.origins().contains(Origin::TransferTo));
    assert!(loaded.origins().contains(Origin::ActionData));
}

#[test]
fn self_to_comparison_between_receiver_and_payload_is_flagged() {
    let src = r#"(module
      (import "env" "read_action_data" (func $rad (param i32 i32) (result i32)))
      (memory 1)
      (func (export "apply") (param i64 i64 i64)
        i32.const 0
        i32.const 128
        call $rad
        drop
        local.get 0
        i32.const 8
        i64.load
        i64.eq
        drop))"#;
    let out = run_with(src, ExploreConfig::default(), "apply", |state| {
        let ctx = ActionContext::symbolic(state);
        let args = vec![ctx.receiver.clone(), ctx.code.clone(), ctx.action.clone()];
        state.host.action = Some(ctx);
        args
    });
    assert_eq!(out.paths.len(), 1);
    assert!(out.paths[0]
        .trace
        .iter()
        .any(|e| matches!(e, TraceEvent::SelfToCompare { .. })));
}

#[test]
fn assertions_trap_constrain_or_prune() {
    let src = r#"(module
      (import "env" "eosio_assert" (func $assert (param i32 i32)))
      (memory 1)
      (func (export "run") (param i32)
        local.get 0
        i32.const 0
        call $assert)
      (func (export "run2") (param i32)
        local.get 0
        i32.const 0
        call $assert
        local.get 0
        i32.eqz
        i32.const 0
        call $assert))"#;

    let fail = run_with(src, ExploreConfig::default(), "run", |_| {
        vec![wana_core::symbolic::SymExpr::concrete(0, 32)]
    });
    assert_eq!(fail.paths[0].status, PathStatus::Trapped);
    assert_eq!(fail.paths[0].diagnostic.as_deref(), Some("assertion failed"));

    let pass = run_with(src, ExploreConfig::default(), "run", |_| {
        vec![wana_core::symbolic::SymExpr::concrete(3, 32)]
    });
    assert_eq!(pass.paths[0].status, PathStatus::Finished);
    assert!(pass.paths[0].path_condition.is_empty());

    let symbolic = run_with(src, ExploreConfig::default(), "run", |state| {
        vec![state.fresh_var(32, Origin::CallData, "c")]
    });
    assert_eq!(symbolic.paths.len(), 1);
    let path = &symbolic.paths[0];
    assert_eq!(path.status, PathStatus::Finished);
    assert!(path
        .trace
        .iter()
        .any(|e| matches!(e, TraceEvent::AssertFork { .. })));
    let mut zero = Model::new();
    zero.insert(VarId(0), 0);
    let mut three = Model::new();
    three.insert(VarId(0), 3);
    assert_eq!(path.path_condition.holds_under(&zero), Some(false));
    assert_eq!(path.path_condition.holds_under(&three), Some(true));

    // Two contradictory assertions leave no feasible continuation.
    let pruned = run_with(src, ExploreConfig::default(), "run2", |state| {
        vec![state.fresh_var(32, Origin::CallData, "c")]
    });
    assert!(pruned.paths.is_empty());
    assert_eq!(pruned.stats.pruned, 1);
}

#[test]
fn sends_and_tapos_reads_are_recorded_as_events() {
    let src = r#"(module
      (import "env" "tapos_block_prefix" (func $tbp (result i32)))
      (import "env" "send_inline" (func $si (param i32 i32)))
      (import "env" "send_deferred" (func $sd (param i32 i64 i32 i32 i32)))
      (memory 1)
      (func (export "run") (result i32)
        call $tbp
        call $tbp
        i32.add
        i32.const 0
        i32.const 0
        call $si
        i32.const 0
        i64.const 0
        i32.const 0
        i32.const 0
        i32.const 0
        call $sd))"#;
    let out = run_with(src, ExploreConfig::default(), "run", |_| vec![]);
    assert_eq!(out.paths.len(), 1);
    let path = &out.paths[0];
    let reads: Vec<&str> = path
        .trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::BlockInfoRead { what, .. } => Some(*what),
            _ => None,
        })
        .collect();
    assert_eq!(reads, vec!["tapos_block_prefix", "tapos_block_prefix"]);
    let sends: Vec<SendKind> = path
        .trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Send { kind, .. } => Some(*kind),
            _ => None,
        })
        .collect();
    assert_eq!(sends, vec![SendKind::Inline, SendKind::Deferred]);
    // Each tapos read produced its own fresh variable.
    let tapos: Vec<VarId> = path
        .created_vars
        .iter()
        .filter(|v| v.origin == Origin::BlockInfo)
        .map(|v| v.id)
        .collect();
    assert_eq!(tapos.len(), 2);
    assert_ne!(tapos[0], tapos[1]);
}

#[test]
fn memcpy_and_memset_really_move_bytes() {
    let src = r#"(module
      (import "env" "memcpy" (func $memcpy (param i32 i32 i32) (result i32)))
      (import "env" "memset" (func $memset (param i32 i32 i32) (result i32)))
      (memory 1)
      (data (i32.const 16) "\01\02\03\04\05\06\07\08")
      (func (export "run") (result i32)
        i32.const 64
        i32.const 16
        i32.const 8
        call $memcpy
        i32.const 200
        i32.const 171
        i32.const 4
        call $memset
        i32.add))"#;
    let out = run_with(src, ExploreConfig::default(), "run", |_| vec![]);
    let path = &out.paths[0];
    assert_eq!(path.status, PathStatus::Finished);
    assert_eq!(path.stack[0].as_concrete(), Some(264));
    for i in 0..8u64 {
        assert_eq!(path.memory.cell(64 + i), MemCell::Concrete(i as u8 + 1));
    }
    for i in 0..4u64 {
        assert_eq!(path.memory.cell(200 + i), MemCell::Concrete(171));
    }
    assert_eq!(path.memory.cell(204), MemCell::Concrete(0));
}

#[test]
fn exit_finishes_and_abort_traps() {
    let exit = r#"(module
      (import "env" "eosio_exit" (func $exit (param i32)))
      (func (export "run") i32.const 0 call $exit unreachable))"#;
    let out = run_with(exit, ExploreConfig::default(), "run", |_| vec![]);
    assert_eq!(out.paths[0].status, PathStatus::Finished);

    let abort = r#"(module
      (import "env" "abort" (func $abort))
      (func (export "run") call $abort))"#;
    let out = run_with(abort, ExploreConfig::default(), "run", |_| vec![]);
    assert_eq!(out.paths[0].status, PathStatus::Trapped);
    assert_eq!(out.paths[0].diagnostic.as_deref(), Some("abort"));
}

#[test]
fn unmodeled_imports_fall_back_to_seeded_concrete_results() {
    let src = r#"(module
      (import "env" "prints" (func $prints (param i32)))
      (import "env" "db_find_i64" (func $db (param i64 i64 i64 i64) (result i32)))
      (func (export "run") (result i32)
        i32.const 0
        call $prints
        i64.const 1
        i64.const 2
        i64.const 3
        i64.const 4
        call $db))"#;
    let run = |seed| {
        let out = run_with(
            src,
            ExploreConfig {
                seed,
                ..ExploreConfig::default()
            },
            "run",
            |_| vec![],
        );
        assert_eq!(out.paths[0].status, PathStatus::Finished);
        assert_eq!(host_calls(&out.paths[0]), vec!["env.prints", "env.db_find_i64"]);
        out.paths[0].stack[0].as_concrete().expect("concrete fallback")
    };
    assert_eq!(run(7), run(7), "same seed, same fallback");
    assert_ne!(run(7), run(8), "different seed diverges");
}

#[test]
fn get_call_value_writes_sixteen_bytes_with_zero_high_half() {
    let src = r#"(module
      (import "ethereum" "getCallValue" (func $gcv (param i32)))
      (memory 1)
      (func (export "main") (result i64)
        i32.const 32
        call $gcv
        i32.const 40
        i64.load
        i32.const 32
        i64.load
        i64.add))"#;
    let out = run_with(src, ExploreConfig::default(), "main", |state| {
        state.host.eth = Some(EthContext::symbolic(state));
        vec![]
    });
    let path = &out.paths[0];
    assert_eq!(path.status, PathStatus::Finished);
    for i in 40..48u64 {
        assert_eq!(path.memory.cell(i), MemCell::Concrete(0), "high byte {i}");
    }
    let callvalue = var_named(path, "callvalue");
    let mut model = Model::new();
    model.insert(callvalue, 123_456);
    assert_eq!(path.stack[0].eval(&model), Some(123_456));
    assert!(path.memory.load(32, 8).origins().contains(Origin::CallData));
}

#[test]
fn call_data_copy_reads_the_window_and_zero_pads_past_it() {
    let src = r#"(module
      (import "ethereum" "callDataCopy" (func $cdc (param i32 i32 i32)))
      (import "ethereum" "getCallDataSize" (func $cds (result i32)))
      (memory 1)
      (func (export "main") (result i64)
        i32.const 0
        i32.const 120
        i32.const 16
        call $cdc
        call $cds
        drop
        i32.const 8
        i64.load))"#;
    let out = run_with(src, ExploreConfig::default(), "main", |state| {
        state.host.eth = Some(EthContext::symbolic(state));
        vec![]
    });
    let path = &out.paths[0];
    assert_eq!(path.status, PathStatus::Finished);
    // Bytes past the 128-byte call data read as zero.
    assert_eq!(path.stack[0].as_concrete(), Some(0));
    // Bytes inside the window are the last call-data quadword.
    let q15 = var_named(path, "calldata_q15");
    let mut model = Model::new();
    model.insert(q15, 0xFEED_F00D);
    assert_eq!(path.memory.load(0, 8).eval(&model), Some(0xFEED_F00D));
}

#[test]
fn eth_calls_send_but_static_calls_do_not() {
    let src = r#"(module
      (import "ethereum" "getCaller" (func $gc (param i32)))
      (import "ethereum" "call" (func $call (param i64 i32 i32 i32 i32) (result i32)))
      (import "ethereum" "callStatic" (func $cs (param i64 i32 i32 i32) (result i32)))
      (memory 1)
      (func (export "main") (result i32)
        i32.const 64
        call $gc
        i64.const 10000
        i32.const 64
        i32.const 0
        i32.const 0
        i32.const 0
        call $call
        i64.const 10000
        i32.const 64
        i32.const 0
        i32.const 0
        call $cs
        i32.add))"#;
    let out = run_with(src, ExploreConfig::default(), "main", |state| {
        state.host.eth = Some(EthContext::symbolic(state));
        vec![]
    });
    let path = &out.paths[0];
    assert_eq!(path.status, PathStatus::Finished);
    let sends: Vec<SendKind> = path
        .trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Send { kind, .. } => Some(*kind),
            _ => None,
        })
        .collect();
    assert_eq!(sends, vec![SendKind::EthCall]);
    // getCaller wrote 20 tainted bytes.
    assert!(path.memory.load(64, 8).origins().contains(Origin::CallData));
    assert!(matches!(path.memory.cell(83), MemCell::Slice { .. }));
    assert!(matches!(path.memory.cell(84), MemCell::Concrete(_)));
}

#[test]
fn delegatecall_classifies_constant_and_tainted_targets() {
    let constant = r#"(module
      (import "ethereum" "callDelegate" (func $cd (param i64 i32 i32 i32) (result i32)))
      (memory 1)
      (data (i32.const 0) "\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11")
      (data (i32.const 32) "\22\22\22\22")
      (func (export "main") (result i32)
        i64.const 100000
        i32.const 0
        i32.const 32
        i32.const 4
        call $cd))"#;
    let out = run_with(constant, ExploreConfig::default(), "main", |state| {
        state.host.eth = Some(EthContext::symbolic(state));
        vec![]
    });
    let classes: Vec<DelegateClass> = out.paths[0]
        .trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::DelegateCall { class, .. } => Some(class.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(classes, vec![DelegateClass::Constant]);

    let tainted = r#"(module
      (import "ethereum" "callDataCopy" (func $cdc (param i32 i32 i32)))
      (import "ethereum" "callDelegate" (func $cd (param i64 i32 i32 i32) (result i32)))
      (memory 1)
      (data (i32.const 0) "\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11\11")
      (func (export "main") (result i32)
        i32.const 32
        i32.const 4
        i32.const 8
        call $cdc
        i64.const 100000
        i32.const 0
        i32.const 32
        i32.const 8
        call $cd))"#;
    let out = run_with(tainted, ExploreConfig::default(), "main", |state| {
        state.host.eth = Some(EthContext::symbolic(state));
        vec![]
    });
    let classes: Vec<DelegateClass> = out.paths[0]
        .trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::DelegateCall { class, .. } => Some(class.clone()),
            _ => None,
        })
        .collect();
    match &classes[..] {
        [DelegateClass::NonConstant(origins)] => {
            assert!(origins.contains(Origin::CallData));
        }
        other => panic!("wrong classification: {other:?}"),
    }
}

#[test]
fn block_handles_are_stable_within_a_path() {
    let src = r#"(module
      (import "ethereum" "getBlockNumber" (func $gbn (result i64)))
      (import "ethereum" "getBlockHash" (func $gbh (param i64 i32) (result i32)))
      (memory 1)
      (func (export "main") (result i64)
        call $gbn
        call $gbn
        i64.sub
        i64.const 5
        i32.const 64
        call $gbh
        drop
        i64.const 5
        i32.const 128
        call $gbh
        drop))"#;
    let out = run_with(src, ExploreConfig::default(), "main", |state| {
        state.host.eth = Some(EthContext::symbolic(state));
        vec![]
    });
    let path = &out.paths[0];
    assert_eq!(path.status, PathStatus::Finished);
    // One handle serves both reads, so the difference is zero.
    let number = var_named(path, "block_number");
    let mut model = Model::new();
    model.insert(number, 987);
    assert_eq!(path.stack[0].eval(&model), Some(0));
    let numbers = path
        .created_vars
        .iter()
        .filter(|v| v.name == "block_number")
        .count();
    assert_eq!(numbers, 1);
    // Both hash queries reuse the same four quadword variables.
    let hash_vars = path
        .created_vars
        .iter()
        .filter(|v| v.name.starts_with("block_hash_q"))
        .count();
    assert_eq!(hash_vars, 4);
    let reads = path
        .trace
        .iter()
        .filter(|e| matches!(e, TraceEvent::BlockInfoRead { .. }))
        .count();
    assert_eq!(reads, 4);
    // The hash bytes landed at both result offsets.
    let q0 = path.memory.load(64, 8);
    let q0_again = path.memory.load(128, 8);
    let id = var_named(path, "block_hash_q0");
    let mut hash_model = Model::new();
    hash_model.insert(id, 0xCAFE);
    assert_eq!(q0.eval(&hash_model), Some(0xCAFE));
    assert_eq!(q0_again.eval(&hash_model), Some(0xCAFE));
}

#[test]
fn storage_round_trips_and_absent_keys_read_fresh_unknowns() {
    let src = r#"(module
      (import "ethereum" "storageStore" (func $ss (param i32 i32)))
      (import "ethereum" "storageLoad" (func $sl (param i32 i32)))
      (memory 1)
      (func (export "main") (result i64)
        i32.const 32
        i64.const 3735928559
        i64.store
        i32.const 0
        i32.const 32
        call $ss
        i32.const 0
        i32.const 128
        call $sl
        i32.const 64
        i32.const 1
        i32.store8
        i32.const 64
        i32.const 192
        call $sl
        i32.const 128
        i64.load))"#;
    let out = run_with(src, ExploreConfig::default(), "main", |state| {
        state.host.eth = Some(EthContext::symbolic(state));
        vec![]
    });
    let path = &out.paths[0];
    assert_eq!(path.status, PathStatus::Finished);
    // Written slot reads back exactly.
    assert_eq!(path.stack[0].as_concrete(), Some(0xDEAD_BEEF));
    // Unwritten slot produced fresh storage-tagged unknowns.
    let fresh = path.memory.load(192, 8);
    assert!(fresh.origins().contains(Origin::Storage));
    assert!(path
        .created_vars
        .iter()
        .any(|v| v.origin == Origin::Storage && v.name.starts_with("storage_q")));
}

#[test]
fn finish_revert_and_selfdestruct_end_the_path() {
    let finish = r#"(module
      (import "ethereum" "finish" (func $f (param i32 i32)))
      (func (export "main") i32.const 0 i32.const 0 call $f unreachable))"#;
    let out = run_with(finish, ExploreConfig::default(), "main", |_| vec![]);
    assert_eq!(out.paths[0].status, PathStatus::Finished);

    let revert = r#"(module
      (import "ethereum" "revert" (func $r (param i32 i32)))
      (func (export "main") i32.const 0 i32.const 0 call $r unreachable))"#;
    let out = run_with(revert, ExploreConfig::default(), "main", |_| vec![]);
    assert_eq!(out.paths[0].status, PathStatus::Trapped);
    assert_eq!(out.paths[0].diagnostic.as_deref(), Some("revert"));

    let destruct = r#"(module
      (import "ethereum" "selfDestruct" (func $sd (param i32)))
      (func (export "main") i32.const 0 call $sd unreachable))"#;
    let out = run_with(destruct, ExploreConfig::default(), "main", |_| vec![]);
    assert_eq!(out.paths[0].status, PathStatus::Finished);
}

const INDEPENDENT_CHARMAP: &[u8; 32] = b".12345abcdefghijklmnopqrstuvwxyz";

/// A second decoder written top-down rather than bottom-up, as a check on
/// the production bit layout.
fn reference_decode(value: u64) -> String {
    let mut out = String::new();
    for i in 0..12 {
        let sym = ((value >> (59 - 5 * i)) & 0x1F) as usize;
        out.push(INDEPENDENT_CHARMAP[sym] as char);
    }
    out.push(INDEPENDENT_CHARMAP[(value & 0xF) as usize] as char);
    out.trim_end_matches('.').to_string()
}

proptest! {
    #[test]
    fn short_names_round_trip(name in "[a-z1-5.]{0,12}") {
        let value = encode_name(&name).unwrap();
        let canonical = name.trim_end_matches('.');
        prop_assert_eq!(&reference_decode(value), canonical);
        prop_assert_eq!(&decode_name(value), canonical);
    }

    #[test]
    fn thirteen_char_names_round_trip(head in "[a-z1-5.]{12}", tail in "[a-j1-5.]") {
        let name = format!("{head}{tail}");
        let value = encode_name(&name).unwrap();
        let canonical = name.trim_end_matches('.');
        prop_assert_eq!(&reference_decode(value), canonical);
        prop_assert_eq!(&decode_name(value), canonical);
    }
}
