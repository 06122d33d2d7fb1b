//! Vulnerability detectors. Each detector explores a module's entry
//! function through the symbolic engine, pattern-matches the recorded
//! trace events, and re-checks candidate paths with the solver to attach
//! a concrete witness.

mod eosio;
mod ethereum;

pub use eosio::{detect_bid_eosio, detect_fake_eos_transfer, detect_forged_notification};
pub use ethereum::{detect_bid_eth, detect_dangerous_delegatecall, detect_greedy};

use crate::engine::{
    EngineError, Exploration, PathState, SendKind, Site, TraceEvent,
};
use crate::host::Platform;
use crate::symbolic::{Origin, SatStatus, Solver, SolverConfig};
use crate::{engine::ExploreConfig, loader::Module};
use serde::{Deserialize, Serialize};

/// The six vulnerability classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    FakeEosTransfer,
    ForgedTransferNotification,
    BlockInfoDependency,
    Greedy,
    DangerousDelegateCall,
    EthBlockInfoDependency,
}

impl FindingKind {
    pub fn label(self) -> &'static str {
        match self {
            FindingKind::FakeEosTransfer => "fake_eos_transfer",
            FindingKind::ForgedTransferNotification => "forged_transfer_notification",
            FindingKind::BlockInfoDependency => "block_info_dependency",
            FindingKind::Greedy => "greedy",
            FindingKind::DangerousDelegateCall => "dangerous_delegate_call",
            FindingKind::EthBlockInfoDependency => "eth_block_info_dependency",
        }
    }

    /// The three detectors that apply to a platform, in report order.
    pub fn for_platform(platform: Platform) -> [FindingKind; 3] {
        match platform {
            Platform::Eosio => [
                FindingKind::FakeEosTransfer,
                FindingKind::ForgedTransferNotification,
                FindingKind::BlockInfoDependency,
            ],
            Platform::Ethereum => [
                FindingKind::Greedy,
                FindingKind::DangerousDelegateCall,
                FindingKind::EthBlockInfoDependency,
            ],
        }
    }
}

/// High unless a solver unknown (or a truncated exploration, for verdicts
/// that quantify over all paths) clouded the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Low,
}

/// A program location in serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteInfo {
    pub func: u32,
    pub offset: u32,
}

impl From<Site> for SiteInfo {
    fn from(site: Site) -> SiteInfo {
        SiteInfo {
            func: site.0,
            offset: site.1,
        }
    }
}

/// One variable assignment in a witness model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessVar {
    pub id: u32,
    pub name: String,
    pub value: u64,
}

/// A satisfying assignment plus the trace sites that substantiate a
/// positive verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub model: Vec<WitnessVar>,
    pub sites: Vec<SiteInfo>,
}

/// One detector's answer for one module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub verdict: bool,
    pub confidence: Confidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub notes: Vec<String>,
}

impl Finding {
    fn clean(kind: FindingKind) -> Finding {
        Finding {
            kind,
            verdict: false,
            confidence: Confidence::High,
            witness: None,
            notes: Vec::new(),
        }
    }

    fn negative(kind: FindingKind, note: impl Into<String>) -> Finding {
        let mut f = Finding::clean(kind);
        f.notes.push(note.into());
        f
    }
}

/// Knobs shared by every detector run.
#[derive(Debug, Clone, Default)]
pub struct DetectorConfig {
    pub explore: ExploreConfig,
    pub solver: SolverConfig,
}

/// Runs the three detectors for `platform` in report order.
pub fn findings_for(
    module: &Module,
    platform: Platform,
    config: &DetectorConfig,
) -> Result<Vec<Finding>, EngineError> {
    match platform {
        Platform::Eosio => Ok(vec![
            detect_fake_eos_transfer(module, config)?,
            detect_forged_notification(module, config)?,
            detect_bid_eosio(module, config)?,
        ]),
        Platform::Ethereum => Ok(vec![
            detect_greedy(module, config)?,
            detect_dangerous_delegatecall(module, config)?,
            detect_bid_eth(module, config)?,
        ]),
    }
}

fn new_solver(config: &DetectorConfig) -> Solver {
    Solver::new(config.solver.clone())
}

/// True when exploration may have missed paths, weakening any claim that
/// quantifies over all of them.
fn exploration_uncertain(out: &Exploration) -> bool {
    out.stats.truncated || out.paths.iter().any(|p| p.unknown_forks > 0)
}

/// The full created-variable assignment under `model`; variables the
/// solver left out default to zero, matching its model semantics.
fn witness_model(path: &PathState, model: &crate::symbolic::Model) -> Vec<WitnessVar> {
    path.created_vars
        .iter()
        .map(|v| WitnessVar {
            id: v.id.0,
            name: v.name.clone(),
            value: model.get(v.id).unwrap_or(0),
        })
        .collect()
}

/// Re-checks candidate paths and builds the positive finding from the
/// first satisfiable one. Falls back to a low-confidence verdict when the
/// solver cannot confirm any candidate.
fn confirmed_finding(
    kind: FindingKind,
    solver: &Solver,
    candidates: &[(&PathState, Vec<Site>)],
) -> Result<Finding, EngineError> {
    let mut saw_unknown = false;
    for (path, sites) in candidates {
        let verdict = solver.check_sat(&path.path_condition)?;
        match verdict.status {
            SatStatus::Sat => {
                let model = verdict.model.unwrap_or_default();
                return Ok(Finding {
                    kind,
                    verdict: true,
                    confidence: if path.unknown_forks == 0 {
                        Confidence::High
                    } else {
                        Confidence::Low
                    },
                    witness: Some(Witness {
                        model: witness_model(path, &model),
                        sites: sites.iter().copied().map(SiteInfo::from).collect(),
                    }),
                    notes: Vec::new(),
                });
            }
            SatStatus::Unknown => saw_unknown = true,
            SatStatus::Unsat => {}
        }
    }
    if saw_unknown {
        return Ok(Finding {
            kind,
            verdict: true,
            confidence: Confidence::Low,
            witness: None,
            notes: vec!["solver returned unknown re-checking every candidate path".into()],
        });
    }
    Ok(Finding::negative(
        kind,
        "all candidate paths re-checked unsatisfiable",
    ))
}

/// First block-info read followed, later on the same trace, by a send of
/// an accepted kind.
fn read_then_send(trace: &[TraceEvent], accepts: fn(SendKind) -> bool) -> Option<(Site, Site)> {
    let mut read_site: Option<Site> = None;
    for event in trace {
        match event {
            TraceEvent::BlockInfoRead { site, .. } if read_site.is_none() => {
                read_site = Some(*site);
            }
            TraceEvent::Send { kind, site } if accepts(*kind) => {
                if let Some(read) = read_site {
                    return Some((read, *site));
                }
            }
            _ => {}
        }
    }
    None
}

/// Fresh arguments for an entry function whose parameters are opaque.
fn opaque_args(
    module: &Module,
    state: &mut PathState,
    func: u32,
    origin: Origin,
    prefix: &str,
) -> Vec<crate::symbolic::SymRef> {
    let Some(ftype) = module.func_type(func) else {
        return Vec::new();
    };
    let params: Vec<u32> = ftype.params.iter().map(|t| t.bits()).collect();
    params
        .iter()
        .enumerate()
        .map(|(i, bits)| state.fresh_var(*bits, origin, &format!("{prefix}{i}")))
        .collect()
}
