//! Per-contract analysis orchestration and the serialized report schema.
//!
//! `analyze_bytes` takes one contract through decode, platform routing,
//! and the platform's three detectors, collecting timings and engine
//! diagnostics along the way. `corpus_report` wraps a batch of entries
//! with a configuration echo and the per-kind summary table.

use crate::detectors::{
    detect_bid_eosio, detect_bid_eth, detect_dangerous_delegatecall, detect_fake_eos_transfer,
    detect_forged_notification, detect_greedy, DetectorConfig, Finding, FindingKind,
};
use crate::engine::{thread_engine_stats, EngineError, ExploreConfig};
use crate::host::{detect_platform, Platform, PlatformDetectError};
use crate::loader::{decode_module, Module};
use crate::symbolic::{thread_solver_stats, SolverConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

/// Platform selection: force one interface model or infer it per module.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlatformChoice {
    #[default]
    Auto,
    Eosio,
    Ethereum,
}

/// Analysis knobs, echoed verbatim into every corpus report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub platform: PlatformChoice,
    pub loop_bound: u32,
    pub seed: u64,
    pub max_paths: usize,
    pub contract_timeout_ms: u64,
    pub solver_timeout_ms: u64,
    pub solver_path: Option<String>,
}

impl Default for AnalysisConfig {
    fn default() -> AnalysisConfig {
        let explore = ExploreConfig::default();
        AnalysisConfig {
            platform: PlatformChoice::Auto,
            loop_bound: explore.loop_bound,
            seed: explore.seed,
            max_paths: explore.max_paths,
            contract_timeout_ms: 60_000,
            solver_timeout_ms: crate::symbolic::DEFAULT_SOLVER_TIMEOUT.as_millis() as u64,
            solver_path: None,
        }
    }
}

impl AnalysisConfig {
    /// The engine and solver knob bundle this configuration denotes.
    /// Resolution order for the solver: explicit path, then the
    /// `WANA_SOLVER` environment variable, then the bundled backend.
    pub fn detector_config(&self) -> DetectorConfig {
        let explore = ExploreConfig {
            loop_bound: self.loop_bound,
            seed: self.seed,
            max_paths: self.max_paths,
            ..ExploreConfig::default()
        };
        DetectorConfig {
            explore,
            solver: SolverConfig::resolve(
                self.solver_path.as_deref(),
                Duration::from_millis(self.solver_timeout_ms),
            ),
        }
    }
}

/// Module size counters: every function in the index space, and the
/// summed instruction count of the defined bodies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleStats {
    pub functions: u32,
    pub instructions: u64,
}

impl ModuleStats {
    fn of(module: &Module) -> ModuleStats {
        ModuleStats {
            functions: module.total_funcs(),
            instructions: module
                .functions
                .iter()
                .map(|f| f.body.instrs.len() as u64)
                .sum(),
        }
    }
}

/// Wall-clock phase breakdown in milliseconds. Exploration and solving
/// interleave, so `total_ms` only dominates each single phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub decode_ms: f64,
    pub explore_ms: f64,
    pub solve_ms: f64,
    pub total_ms: f64,
}

/// Engine health counters for one contract's analysis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Always zero today: the decoder rejects unsupported opcodes before
    /// analysis starts, so a decoded module cannot hit one.
    pub unsupported_instructions: u64,
    pub unknown_verdicts: u64,
    pub budget_exhausted_paths: u64,
    pub truncated_explorations: u64,
}

/// Everything the analysis produced for one input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<Platform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module_stats: Option<ModuleStats>,
    pub findings: Vec<Finding>,
    pub timings: Timings,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timed_out: bool,
}

/// Per-kind verdict tallies. Percentages are taken over successfully
/// analyzed contracts only; error entries are excluded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub analyzed: u32,
    pub errors: u32,
    pub counts: BTreeMap<String, u32>,
    pub percentages: BTreeMap<String, f64>,
}

/// The top-level report: version, configuration echo, per-contract
/// entries, and the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub version: String,
    pub config: AnalysisConfig,
    pub contracts: Vec<ContractReport>,
    pub summary: Summary,
}

fn all_kinds() -> impl Iterator<Item = FindingKind> {
    FindingKind::for_platform(Platform::Eosio)
        .into_iter()
        .chain(FindingKind::for_platform(Platform::Ethereum))
}

fn run_detector(
    module: &Module,
    kind: FindingKind,
    config: &DetectorConfig,
) -> Result<Finding, EngineError> {
    match kind {
        FindingKind::FakeEosTransfer => detect_fake_eos_transfer(module, config),
        FindingKind::ForgedTransferNotification => detect_forged_notification(module, config),
        FindingKind::BlockInfoDependency => detect_bid_eosio(module, config),
        FindingKind::Greedy => detect_greedy(module, config),
        FindingKind::DangerousDelegateCall => detect_dangerous_delegatecall(module, config),
        FindingKind::EthBlockInfoDependency => detect_bid_eth(module, config),
    }
}

fn ms(duration: Duration) -> f64 {
    duration.as_secs_f64() * 1e3
}

/// Analyzes one contract image end to end. Decode failures, platform
/// ambiguity, and engine errors all land in the entry's `error` field;
/// this function never fails outright, so a corpus run always continues.
pub fn analyze_bytes(file: &str, bytes: &[u8], config: &AnalysisConfig) -> ContractReport {
    let started = Instant::now();
    let deadline = Instant::now().checked_add(Duration::from_millis(config.contract_timeout_ms));
    let (solve_ns0, unknown0) = thread_solver_stats();
    let (exhausted0, truncated0) = thread_engine_stats();

    let mut entry = ContractReport {
        file: file.to_string(),
        platform: None,
        module_stats: None,
        findings: Vec::new(),
        timings: Timings::default(),
        diagnostics: Diagnostics::default(),
        error: None,
        timed_out: false,
    };

    let decode_started = Instant::now();
    let module = match decode_module(bytes) {
        Ok(module) => module,
        Err(err) => {
            entry.timings.decode_ms = ms(decode_started.elapsed());
            entry.timings.total_ms = ms(started.elapsed());
            entry.error = Some(format!("decode failed: {err}"));
            return entry;
        }
    };
    entry.timings.decode_ms = ms(decode_started.elapsed());
    entry.module_stats = Some(ModuleStats::of(&module));

    let platform = match config.platform {
        PlatformChoice::Eosio => Ok(Platform::Eosio),
        PlatformChoice::Ethereum => Ok(Platform::Ethereum),
        PlatformChoice::Auto => detect_platform(&module).map_err(|err| match err {
            PlatformDetectError::Ambiguous => {
                "platform is ambiguous: both an `ethereum` import namespace and an exported `apply`"
            }
            PlatformDetectError::Unknown => {
                "platform is unknown: neither an `ethereum` import namespace nor an exported `apply`"
            }
        }),
    };
    let platform = match platform {
        Ok(platform) => platform,
        Err(message) => {
            entry.timings.total_ms = ms(started.elapsed());
            entry.error = Some(message.to_string());
            return entry;
        }
    };
    entry.platform = Some(platform);

    let base = config.detector_config();
    let explore_started = Instant::now();
    for kind in FindingKind::for_platform(platform) {
        let remaining = deadline.map(|d| d.saturating_duration_since(Instant::now()));
        if remaining.is_some_and(|r| r.is_zero()) {
            entry.timed_out = true;
            break;
        }
        let mut detector = base.clone();
        detector.explore.time_budget = Some(match (detector.explore.time_budget, remaining) {
            (Some(budget), Some(left)) => budget.min(left),
            (Some(budget), None) => budget,
            (None, Some(left)) => left,
            (None, None) => Duration::MAX,
        });
        match run_detector(&module, kind, &detector) {
            Ok(finding) => entry.findings.push(finding),
            Err(err) => {
                entry.error = Some(format!("{} detector failed: {err}", kind.label()));
                break;
            }
        }
    }
    entry.timings.explore_ms = ms(explore_started.elapsed());

    let (solve_ns1, unknown1) = thread_solver_stats();
    let (exhausted1, truncated1) = thread_engine_stats();
    entry.timings.solve_ms = (solve_ns1 - solve_ns0) as f64 / 1e6;
    entry.diagnostics.unknown_verdicts = unknown1 - unknown0;
    entry.diagnostics.budget_exhausted_paths = exhausted1 - exhausted0;
    entry.diagnostics.truncated_explorations = truncated1 - truncated0;
    entry.timings.total_ms = ms(started.elapsed());
    entry
}

/// Aggregates entry verdicts into the per-kind count and percentage
/// table. Every kind appears in both maps, including zeros.
pub fn summarize(contracts: &[ContractReport]) -> Summary {
    let mut counts: BTreeMap<String, u32> =
        all_kinds().map(|k| (k.label().to_string(), 0)).collect();
    let mut analyzed = 0u32;
    let mut errors = 0u32;
    for entry in contracts {
        if entry.error.is_some() {
            errors += 1;
            continue;
        }
        analyzed += 1;
        for finding in &entry.findings {
            if finding.verdict {
                *counts.entry(finding.kind.label().to_string()).or_insert(0) += 1;
            }
        }
    }
    let percentages = counts
        .iter()
        .map(|(kind, count)| {
            let pct = if analyzed == 0 {
                0.0
            } else {
                100.0 * f64::from(*count) / f64::from(analyzed)
            };
            (kind.clone(), pct)
        })
        .collect();
    Summary {
        analyzed,
        errors,
        counts,
        percentages,
    }
}

/// Wraps analyzed entries into the top-level report.
pub fn corpus_report(config: &AnalysisConfig, contracts: Vec<ContractReport>) -> CorpusReport {
    let summary = summarize(&contracts);
    CorpusReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        contracts,
        summary,
    }
}
