//! EOSIO detectors: fake EOS transfer, forged transfer notification, and
//! block-information dependency.

use super::{
    confirmed_finding, exploration_uncertain, new_solver, read_then_send, Confidence,
    DetectorConfig, Finding, FindingKind, SiteInfo, Witness,
};
use crate::engine::{Engine, EngineError, Exploration, SendKind, Site, TraceEvent};
use crate::host::{encode_name, ActionContext};
use crate::loader::{Module, ValType};
use crate::symbolic::{eval_compare, CmpOp, Origin, SatStatus, SymExpr};
use std::rc::Rc;

fn apply_index(module: &Module) -> Option<u32> {
    module.export_lookup("apply")
}

fn has_three_i64_params(module: &Module, func: u32) -> bool {
    module
        .func_type(func)
        .map(|t| t.params == [ValType::I64, ValType::I64, ValType::I64])
        .unwrap_or(false)
}

/// Flags contracts whose transfer handling is reachable while `code` is
/// not the token contract: a path where an action-name comparison against
/// "transfer" succeeds and a call follows, feasible under the attack
/// constraints {code != eosio.token, action = transfer}.
pub fn detect_fake_eos_transfer(
    module: &Module,
    config: &DetectorConfig,
) -> Result<Finding, EngineError> {
    let kind = FindingKind::FakeEosTransfer;
    let Some(apply) = apply_index(module) else {
        return Ok(Finding::negative(kind, "module does not export apply"));
    };
    if !has_three_i64_params(module, apply) {
        return Ok(Finding::negative(
            kind,
            "apply does not take three i64 parameters",
        ));
    }
    if module.defined_func(apply).is_none() {
        return Ok(Finding::negative(kind, "apply is an imported function"));
    }

    let solver = new_solver(config);
    let engine = Engine::new(module, config.explore.clone(), new_solver(config));
    let mut state = engine.instantiate()?;
    let ctx = ActionContext::symbolic(&mut state);
    let args = vec![
        Rc::clone(&ctx.receiver),
        Rc::clone(&ctx.code),
        Rc::clone(&ctx.action),
    ];
    let token = SymExpr::concrete(encode_name("eosio.token").expect("constant name"), 64);
    let transfer = encode_name("transfer").expect("constant name");
    let transfer_expr = SymExpr::concrete(transfer, 64);
    state.assume(eval_compare(CmpOp::Ne, &ctx.code, &token)?);
    state.assume(eval_compare(CmpOp::Eq, &ctx.action, &transfer_expr)?);
    state.host.action = Some(ctx);
    let out = engine.run(state, apply, args)?;

    let candidates: Vec<_> = out
        .paths
        .iter()
        .filter_map(|p| transfer_sink(&p.trace, transfer).map(|sites| (p, sites)))
        .collect();
    if candidates.is_empty() {
        let mut finding = Finding::clean(kind);
        if exploration_uncertain(&out) {
            finding.confidence = Confidence::Low;
            finding
                .notes
                .push("exploration was incomplete; absence of a sink is not certain".into());
        }
        return Ok(finding);
    }
    confirmed_finding(kind, &solver, &candidates)
}

/// A successful action-name comparison against "transfer" followed by a
/// call: the pair of sites, if present on this trace.
fn transfer_sink(trace: &[TraceEvent], transfer: u64) -> Option<Vec<Site>> {
    let mut compare_site: Option<Site> = None;
    for event in trace {
        match event {
            TraceEvent::NameCompare {
                expr,
                constant,
                site,
            } if *constant == transfer
                && expr.origins().contains(Origin::ApplyAction)
                && compare_site.is_none() =>
            {
                compare_site = Some(*site);
            }
            TraceEvent::DirectCall { site, .. } | TraceEvent::IndirectCall { site, .. } => {
                if let Some(cmp) = compare_site {
                    return Some(vec![cmp, *site]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Flags transfer-notification handlers that never compare the current
/// contract with the transfer destination. Phase 1 locates the handler by
/// dispatching a concrete eosio.token transfer; phase 2 explores the
/// handler itself looking for a self-vs-to check.
pub fn detect_forged_notification(
    module: &Module,
    config: &DetectorConfig,
) -> Result<Finding, EngineError> {
    let kind = FindingKind::ForgedTransferNotification;
    let Some(apply) = apply_index(module) else {
        return Ok(Finding::negative(kind, "module does not export apply"));
    };
    if module.defined_func(apply).is_none() {
        return Ok(Finding::negative(kind, "apply is an imported function"));
    }

    // Phase 1: concrete dispatch of a genuine-looking transfer.
    let receiver = encode_name("testacc").expect("constant name");
    let code = encode_name("eosio.token").expect("constant name");
    let action = encode_name("transfer").expect("constant name");
    let engine = Engine::new(module, config.explore.clone(), new_solver(config));
    let mut state = engine.instantiate()?;
    let ctx = ActionContext::with_names(&mut state, receiver, code, action);
    let args = vec![
        Rc::clone(&ctx.receiver),
        Rc::clone(&ctx.code),
        Rc::clone(&ctx.action),
    ];
    state.host.action = Some(ctx);
    let dispatch = engine.run(state, apply, args)?;
    let Some((pt, dispatch_site)) = first_indirect_call(&dispatch) else {
        return Ok(Finding::negative(
            kind,
            "dispatch never executed call_indirect; transfer handler unreachable",
        ));
    };
    if module.defined_func(pt).is_none() {
        return Ok(Finding::negative(
            kind,
            format!("dispatch resolved to non-defined function {pt}"),
        ));
    }

    // Phase 2: symbolic exploration of the handler with its first
    // parameter as self and both to-sources (third parameter, payload
    // bytes 8..16) tagged as the transfer destination.
    let engine = Engine::new(module, config.explore.clone(), new_solver(config));
    let mut state = engine.instantiate()?;
    let ctx = ActionContext::symbolic(&mut state);
    let self_expr = Rc::clone(&ctx.receiver);
    let params: Vec<u32> = module
        .func_type(pt)
        .map(|t| t.params.iter().map(|p| p.bits()).collect())
        .unwrap_or_default();
    let mut handler_args = Vec::with_capacity(params.len());
    for (i, bits) in params.iter().enumerate() {
        let arg = if i == 0 && *bits == 64 {
            Rc::clone(&self_expr)
        } else if i == 2 && *bits == 64 {
            state.fresh_var(64, Origin::TransferTo, "to_param")
        } else {
            state.fresh_var(*bits, Origin::Other, &format!("handler_p{i}"))
        };
        handler_args.push(arg);
    }
    state.host.action = Some(ctx);
    let out = engine.run(state, pt, handler_args)?;

    let checked = out
        .paths
        .iter()
        .any(|p| p.trace.iter().any(|e| matches!(e, TraceEvent::SelfToCompare { .. })));
    if checked {
        return Ok(Finding::negative(
            kind,
            "a path compares the contract with the transfer destination",
        ));
    }

    // No path checks `to`: vulnerable. The witness replays phase 1 up to
    // the dispatch site that reaches the handler.
    let uncertain = exploration_uncertain(&out) || exploration_uncertain(&dispatch);
    let witness_path = dispatch
        .paths
        .iter()
        .find(|p| {
            p.trace
                .iter()
                .any(|e| matches!(e, TraceEvent::IndirectCall { target, .. } if *target == pt))
        })
        .expect("phase-1 path with the indirect call exists");
    let solver = new_solver(config);
    let verdict = solver.check_sat(&witness_path.path_condition)?;
    let mut finding = Finding {
        kind,
        verdict: true,
        confidence: if uncertain || verdict.status != SatStatus::Sat {
            Confidence::Low
        } else {
            Confidence::High
        },
        witness: None,
        notes: vec![format!("transfer handler resolved to function {pt}")],
    };
    if verdict.status == SatStatus::Sat {
        let model = verdict.model.unwrap_or_default();
        finding.witness = Some(Witness {
            model: super::witness_model(witness_path, &model),
            sites: vec![SiteInfo::from(dispatch_site)],
        });
    } else {
        finding
            .notes
            .push("solver could not confirm the dispatch path".into());
    }
    if uncertain {
        finding
            .notes
            .push("exploration was incomplete; absence of a check is not certain".into());
    }
    Ok(finding)
}

fn first_indirect_call(out: &Exploration) -> Option<(u32, Site)> {
    for path in &out.paths {
        for event in &path.trace {
            if let TraceEvent::IndirectCall { target, site } = event {
                return Some((*target, *site));
            }
        }
    }
    None
}

/// Flags contracts where predictable block information can flow into an
/// EOS transfer: a tapos read followed by send_inline/send_deferred on a
/// feasible path.
pub fn detect_bid_eosio(module: &Module, config: &DetectorConfig) -> Result<Finding, EngineError> {
    let kind = FindingKind::BlockInfoDependency;
    let reads_blocks = module.imports_func("env", "tapos_block_prefix")
        || module.imports_func("env", "tapos_block_num");
    if !reads_blocks {
        return Ok(Finding::negative(kind, "no tapos import"));
    }
    let sends = module.imports_func("env", "send_inline")
        || module.imports_func("env", "send_context_free_inline")
        || module.imports_func("env", "send_deferred");
    if !sends {
        return Ok(Finding::negative(kind, "no send_inline/send_deferred import"));
    }
    let Some(apply) = apply_index(module) else {
        return Ok(Finding::negative(kind, "module does not export apply"));
    };
    if module.defined_func(apply).is_none() {
        return Ok(Finding::negative(kind, "apply is an imported function"));
    }

    let solver = new_solver(config);
    let engine = Engine::new(module, config.explore.clone(), new_solver(config));
    let mut state = engine.instantiate()?;
    let ctx = ActionContext::symbolic(&mut state);
    let args = vec![
        Rc::clone(&ctx.receiver),
        Rc::clone(&ctx.code),
        Rc::clone(&ctx.action),
    ];
    state.host.action = Some(ctx);
    let out = engine.run(state, apply, args)?;

    let eos_send = |k: SendKind| matches!(k, SendKind::Inline | SendKind::Deferred);
    let candidates: Vec<_> = out
        .paths
        .iter()
        .filter_map(|p| {
            read_then_send(&p.trace, eos_send).map(|(read, send)| (p, vec![read, send]))
        })
        .collect();
    if candidates.is_empty() {
        let mut finding = Finding::clean(kind);
        if exploration_uncertain(&out) {
            finding.confidence = Confidence::Low;
            finding
                .notes
                .push("exploration was incomplete; absence of a flow is not certain".into());
        }
        return Ok(finding);
    }
    confirmed_finding(kind, &solver, &candidates)
}
