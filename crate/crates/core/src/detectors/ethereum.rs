//! Ethereum (EWasm) detectors: greedy, dangerous delegatecall, and
//! block-information dependency. All explore the exported `main`.

use super::{
    confirmed_finding, exploration_uncertain, new_solver, opaque_args, read_then_send, Confidence,
    DetectorConfig, Finding, FindingKind,
};
use crate::engine::{
    DelegateClass, Engine, EngineError, Exploration, PathStatus, SendKind, TraceEvent,
};
use crate::host::EthContext;
use crate::loader::Module;
use crate::symbolic::{eval_compare, CmpOp, Origin, SatStatus, Solver, SymExpr, SymRef};

struct MainRun {
    out: Exploration,
    call_value: SymRef,
}

fn explore_main(
    module: &Module,
    config: &DetectorConfig,
) -> Result<Result<MainRun, &'static str>, EngineError> {
    let Some(main) = module.export_lookup("main") else {
        return Ok(Err("module does not export main"));
    };
    if module.defined_func(main).is_none() {
        return Ok(Err("main is an imported function"));
    }
    let engine = Engine::new(module, config.explore.clone(), new_solver(config));
    let mut state = engine.instantiate()?;
    let ctx = EthContext::symbolic(&mut state);
    let call_value = ctx.call_value.clone();
    state.host.eth = Some(ctx);
    let args = opaque_args(module, &mut state, main, Origin::CallData, "main_p");
    let out = engine.run(state, main, args)?;
    Ok(Ok(MainRun { out, call_value }))
}

/// A finished path that still completes when the attached value is
/// nonzero: the behavioral signature of a reachable payable entry.
fn payable_path_indices(
    solver: &Solver,
    run: &MainRun,
) -> Result<(Vec<usize>, bool), EngineError> {
    let nonzero = eval_compare(
        CmpOp::Ne,
        &run.call_value,
        &SymExpr::concrete(0, run.call_value.width()),
    )?;
    let mut payable = Vec::new();
    let mut saw_unknown = false;
    for (i, path) in run.out.paths.iter().enumerate() {
        if path.status != PathStatus::Finished {
            continue;
        }
        let mut pc = path.path_condition.clone();
        pc.push(nonzero.clone());
        match solver.check_sat(&pc)?.status {
            SatStatus::Sat => payable.push(i),
            SatStatus::Unknown => saw_unknown = true,
            SatStatus::Unsat => {}
        }
    }
    Ok((payable, saw_unknown))
}

/// Flags contracts that can receive ether on some reachable entry but
/// have no feasible way to send any out.
pub fn detect_greedy(module: &Module, config: &DetectorConfig) -> Result<Finding, EngineError> {
    let kind = FindingKind::Greedy;
    let run = match explore_main(module, config)? {
        Ok(run) => run,
        Err(note) => return Ok(Finding::negative(kind, note)),
    };
    let solver = new_solver(config);

    let (payable, payable_unknown) = payable_path_indices(&solver, &run)?;
    let finished = run
        .out
        .paths
        .iter()
        .filter(|p| p.status == PathStatus::Finished)
        .count();
    let summary = format!(
        "entry branches finished: {finished}, payable-reachable: {}",
        payable.len()
    );
    let uncertain = exploration_uncertain(&run.out);

    if payable.is_empty() {
        let mut finding = Finding::negative(kind, "no payable-reachable entry branch");
        finding.notes.push(summary);
        if uncertain || payable_unknown {
            finding.confidence = Confidence::Low;
        }
        return Ok(finding);
    }

    // Send check: a value-bearing call import, or an actual Send event on
    // a feasible path, defeats the verdict.
    let has_call_import = module.imports_func("ethereum", "call")
        || module.imports_func("ethereum", "callCode");
    let sent = run.out.paths.iter().any(|p| {
        p.trace
            .iter()
            .any(|e| matches!(e, TraceEvent::Send { kind: SendKind::EthCall, .. }))
    });
    if sent {
        let mut finding = Finding::negative(kind, "a feasible path sends ether");
        finding.notes.push(summary);
        return Ok(finding);
    }
    if has_call_import && uncertain {
        // A call import exists and exploration may have missed its path.
        let mut finding = Finding {
            kind,
            verdict: true,
            confidence: Confidence::Low,
            witness: None,
            notes: vec![
                "call import present but no feasible send found in an incomplete exploration"
                    .into(),
                summary,
            ],
        };
        if payable_unknown {
            finding
                .notes
                .push("solver returned unknown on a payability check".into());
        }
        return Ok(finding);
    }

    // Confirmed: build the witness from the first payable path, with the
    // nonzero-value constraint included so the model shows real ether.
    let nonzero = eval_compare(
        CmpOp::Ne,
        &run.call_value,
        &SymExpr::concrete(0, run.call_value.width()),
    )?;
    let mut candidates = Vec::new();
    let mut owned_paths = Vec::new();
    for &i in &payable {
        let mut path = run.out.paths[i].clone();
        path.path_condition.push(nonzero.clone());
        owned_paths.push(path);
    }
    for path in &owned_paths {
        let finish_site = path
            .trace
            .iter()
            .filter_map(|e| match e {
                TraceEvent::HostCall { name, site, .. } if name == "ethereum.finish" => {
                    Some(*site)
                }
                _ => None,
            })
            .next();
        candidates.push((path, finish_site.into_iter().collect::<Vec<_>>()));
    }
    let borrowed: Vec<_> = candidates.iter().map(|(p, s)| (*p, s.clone())).collect();
    let mut finding = confirmed_finding(kind, &solver, &borrowed)?;
    finding.notes.push(if has_call_import {
        "call import present but unreachable on every feasible path".to_string()
    } else {
        "no ether-sending import".to_string()
    });
    finding.notes.push(summary);
    if finding.verdict && (uncertain || payable_unknown) {
        finding.confidence = Confidence::Low;
    }
    Ok(finding)
}

/// Flags delegatecalls whose target or payload carries attacker-supplied
/// call data.
pub fn detect_dangerous_delegatecall(
    module: &Module,
    config: &DetectorConfig,
) -> Result<Finding, EngineError> {
    let kind = FindingKind::DangerousDelegateCall;
    let run = match explore_main(module, config)? {
        Ok(run) => run,
        Err(note) => return Ok(Finding::negative(kind, note)),
    };
    let solver = new_solver(config);

    let mut candidates = Vec::new();
    let mut constant_seen = false;
    let mut untainted_seen = false;
    for path in &run.out.paths {
        for event in &path.trace {
            if let TraceEvent::DelegateCall { class, site } = event {
                match class {
                    DelegateClass::NonConstant(origins) if origins.contains(Origin::CallData) => {
                        candidates.push((path, vec![*site]));
                    }
                    DelegateClass::NonConstant(_) => untainted_seen = true,
                    DelegateClass::Constant => constant_seen = true,
                }
            }
        }
    }
    if candidates.is_empty() {
        let mut finding = Finding::clean(kind);
        if constant_seen {
            finding
                .notes
                .push("delegatecall observed with constant target and payload".into());
        }
        if untainted_seen {
            finding.notes.push(
                "delegatecall observed with non-constant but non-call-data input".into(),
            );
        }
        if exploration_uncertain(&run.out) {
            finding.confidence = Confidence::Low;
            finding
                .notes
                .push("exploration was incomplete; absence of a delegatecall is not certain".into());
        }
        return Ok(finding);
    }
    confirmed_finding(kind, &solver, &candidates)
}

/// Flags block-information reads that can flow into an outbound ether
/// transfer on a feasible path.
pub fn detect_bid_eth(module: &Module, config: &DetectorConfig) -> Result<Finding, EngineError> {
    let kind = FindingKind::EthBlockInfoDependency;
    let run = match explore_main(module, config)? {
        Ok(run) => run,
        Err(note) => return Ok(Finding::negative(kind, note)),
    };
    let solver = new_solver(config);

    let eth_send = |k: SendKind| matches!(k, SendKind::EthCall);
    let candidates: Vec<_> = run
        .out
        .paths
        .iter()
        .filter_map(|p| {
            read_then_send(&p.trace, eth_send).map(|(read, send)| (p, vec![read, send]))
        })
        .collect();
    if candidates.is_empty() {
        let mut finding = Finding::clean(kind);
        if exploration_uncertain(&run.out) {
            finding.confidence = Confidence::Low;
            finding
                .notes
                .push("exploration was incomplete; absence of a flow is not certain".into());
        }
        return Ok(finding);
    }
    confirmed_finding(kind, &solver, &candidates)
}
