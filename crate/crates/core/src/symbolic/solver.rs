//! Satisfiability checking over the SMT-LIB2 text protocol. Queries can
//! run against any external solver process or against the bundled
//! bit-blasting backend; either way each query is a fresh session.

use super::expr::{Model, PathCondition, VarId};
use super::smtlib::{collect_vars, to_smtlib};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};
use thiserror::Error;
use wana_smt::sexpr::{parse_all, SExpr};

/// Which process answers `(check-sat)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverBackend {
    /// The in-process bit-blasting solver; no external dependency.
    Builtin,
    /// A child process such as `z3 -in` or `cvc5 --lang smt2`.
    External { program: String, args: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub backend: SolverBackend,
    /// Per-query budget; an overrun yields `unknown`, not an error.
    pub timeout: Duration,
}

pub const DEFAULT_SOLVER_TIMEOUT: Duration = Duration::from_secs(5);

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            backend: SolverBackend::Builtin,
            timeout: DEFAULT_SOLVER_TIMEOUT,
        }
    }
}

impl SolverConfig {
    /// Picks the backend: an explicit command line wins, then the
    /// `WANA_SOLVER` environment variable, then the builtin solver. The
    /// command line is split on whitespace, first token the executable.
    pub fn resolve(solver_path: Option<&str>, timeout: Duration) -> SolverConfig {
        let spec = solver_path
            .map(str::to_string)
            .or_else(|| std::env::var("WANA_SOLVER").ok())
            .filter(|s| !s.trim().is_empty());
        let backend = match spec {
            Some(line) => {
                let mut parts = line.split_whitespace().map(str::to_string);
                let program = parts.next().expect("non-blank spec has a first token");
                SolverBackend::External {
                    program,
                    args: parts.collect(),
                }
            }
            None => SolverBackend::Builtin,
        };
        SolverConfig { backend, timeout }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatStatus {
    Sat,
    Unsat,
    Unknown,
}

impl SatStatus {
    pub fn label(self) -> &'static str {
        match self {
            SatStatus::Sat => "sat",
            SatStatus::Unsat => "unsat",
            SatStatus::Unknown => "unknown",
        }
    }
}

/// Outcome of one query. A model is present exactly when `status` is
/// [`SatStatus::Sat`].
#[derive(Debug, Clone)]
pub struct SolverVerdict {
    pub status: SatStatus,
    pub model: Option<Model>,
    pub solve_time: Duration,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("cannot run solver {program}: {reason}")]
    SolverUnavailable { program: String, reason: String },
    #[error("solver protocol violation: {0}")]
    Protocol(String),
}

thread_local! {
    static SOLVE_NANOS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
    static UNKNOWN_VERDICTS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

/// Cumulative (query time in nanoseconds, unknown-verdict count) for this
/// thread. Report assembly reads deltas around each contract's analysis,
/// which stays accurate because one worker thread analyzes one contract
/// at a time.
pub fn thread_solver_stats() -> (u64, u64) {
    (SOLVE_NANOS.get(), UNKNOWN_VERDICTS.get())
}

/// One solver session owner; analysis workers hold one each and never
/// share it.
#[derive(Debug, Clone)]
pub struct Solver {
    config: SolverConfig,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Solver {
        Solver { config }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Decides satisfiability of the conjunction. Timeouts and solver
    /// give-ups surface as `unknown`; only a missing or misbehaving
    /// backend is an error.
    pub fn check_sat(&self, pc: &PathCondition) -> Result<SolverVerdict, SolverError> {
        let script = to_smtlib(pc);
        let started = Instant::now();
        let reply = match &self.config.backend {
            SolverBackend::Builtin => run_builtin(script, self.config.timeout),
            SolverBackend::External { program, args } => {
                run_external(program, args, &script, self.config.timeout)?
            }
        };
        let solve_time = started.elapsed();
        SOLVE_NANOS.set(SOLVE_NANOS.get() + solve_time.as_nanos() as u64);
        let Some(text) = reply else {
            UNKNOWN_VERDICTS.set(UNKNOWN_VERDICTS.get() + 1);
            return Ok(SolverVerdict {
                status: SatStatus::Unknown,
                model: None,
                solve_time,
            });
        };
        let (status, model) = parse_reply(&text, &collect_vars(pc))?;
        if status == SatStatus::Unknown {
            UNKNOWN_VERDICTS.set(UNKNOWN_VERDICTS.get() + 1);
        }
        Ok(SolverVerdict {
            status,
            model,
            solve_time,
        })
    }
}

/// Runs the bundled solver on its own thread so a hard query can be
/// abandoned at the deadline; the worker thread is detached and exits
/// when the query completes.
fn run_builtin(script: String, timeout: Duration) -> Option<String> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(wana_smt::run_script(&script));
    });
    rx.recv_timeout(timeout).ok()
}

fn run_external(
    program: &str,
    args: &[String],
    script: &str,
    timeout: Duration,
) -> Result<Option<String>, SolverError> {
    let unavailable = |reason: String| SolverError::SolverUnavailable {
        program: program.to_string(),
        reason,
    };
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| unavailable(e.to_string()))?;

    let mut stdin = child.stdin.take().expect("stdin was piped");
    let script = script.to_string();
    let writer = thread::spawn(move || {
        // A solver that exits early closes the pipe; that is its answer
        // to report, not a write error to propagate.
        let _ = stdin.write_all(script.as_bytes());
    });

    let stdout = child.stdout.take().expect("stdout was piped");
    let (tx, rx) = mpsc::channel();
    let reader = thread::spawn(move || {
        let mut stdout = stdout;
        let mut buf = String::new();
        let outcome = std::io::Read::read_to_string(&mut stdout, &mut buf).map(|_| buf);
        let _ = tx.send(outcome);
    });

    let reply = match rx.recv_timeout(timeout) {
        Ok(Ok(text)) => Some(text),
        Ok(Err(e)) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(unavailable(e.to_string()));
        }
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            let _ = writer.join();
            let _ = reader.join();
            return Ok(None);
        }
    };
    let _ = child.wait();
    let _ = writer.join();
    let _ = reader.join();
    Ok(reply)
}

/// Parses a solver's stdout: a verdict line, then an optional model.
/// Trailing in-band `(error ...)` forms, as produced by `(get-model)`
/// after unsat, are ignored.
fn parse_reply(
    text: &str,
    declared: &BTreeMap<VarId, u32>,
) -> Result<(SatStatus, Option<Model>), SolverError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let verdict = lines
        .next()
        .ok_or_else(|| SolverError::Protocol("empty solver reply".into()))?;
    let status = match verdict {
        "sat" => SatStatus::Sat,
        "unsat" => SatStatus::Unsat,
        "unknown" => SatStatus::Unknown,
        other => {
            return Err(SolverError::Protocol(format!(
                "unrecognized verdict line {other:?}"
            )))
        }
    };
    if status != SatStatus::Sat {
        return Ok((status, None));
    }
    let rest = text
        .split_once('\n')
        .map(|(_, tail)| tail)
        .unwrap_or_default();
    let model = parse_model(rest, declared)?;
    Ok((status, Some(model)))
}

fn parse_model(text: &str, declared: &BTreeMap<VarId, u32>) -> Result<Model, SolverError> {
    let forms =
        parse_all(text).map_err(|e| SolverError::Protocol(format!("model text: {e}")))?;
    let mut model = Model::new();
    for form in &forms {
        let Some(items) = form.list() else { continue };
        // Either a bare binding list or one wrapped as (model ...).
        let entries = match items.first().and_then(SExpr::atom) {
            Some("model") => &items[1..],
            Some("error") => continue,
            _ => items,
        };
        for entry in entries {
            if let Some((name, value)) = parse_define_fun(entry)? {
                if let Some(id) = parse_var_name(&name) {
                    model.insert(id, value);
                }
            }
        }
    }
    // A solver may omit variables that do not constrain the verdict; any
    // value satisfies the condition for those, so zero serves.
    for id in declared.keys() {
        if model.get(*id).is_none() {
            model.insert(*id, 0);
        }
    }
    Ok(model)
}

/// Reads one `(define-fun name () sort value)` form; returns `None` for
/// anything else, erring only on malformed values.
fn parse_define_fun(form: &SExpr) -> Result<Option<(String, u64)>, SolverError> {
    let Some(items) = form.list() else {
        return Ok(None);
    };
    if items.first().and_then(SExpr::atom) != Some("define-fun") || items.len() != 5 {
        return Ok(None);
    }
    let Some(name) = items[1].atom() else {
        return Ok(None);
    };
    let value = parse_value(&items[4]).ok_or_else(|| {
        SolverError::Protocol(format!("unreadable model value for {name}"))
    })?;
    Ok(Some((name.to_string(), value)))
}

fn parse_value(form: &SExpr) -> Option<u64> {
    match form {
        SExpr::Atom(a) => {
            if let Some(hex) = a.strip_prefix("#x") {
                u64::from_str_radix(hex, 16).ok()
            } else if let Some(bin) = a.strip_prefix("#b") {
                u64::from_str_radix(bin, 2).ok()
            } else {
                a.parse().ok()
            }
        }
        SExpr::List(items) => {
            // The (_ bvN w) numeral form.
            let [u, n, _w] = items.as_slice() else {
                return None;
            };
            if u.atom() != Some("_") {
                return None;
            }
            n.atom()?.strip_prefix("bv")?.parse().ok()
        }
    }
}

fn parse_var_name(name: &str) -> Option<VarId> {
    name.strip_prefix('v')?.parse().ok().map(VarId)
}

#[cfg(test)]
mod tests {
    use super::super::expr::{eval_compare, CmpOp, Origin, SymExpr, VarId};
    use super::*;

    fn simple_condition() -> PathCondition {
        let x = SymExpr::variable(VarId(0), 32, Origin::Other, "x");
        let mut pc = PathCondition::new();
        pc.push(eval_compare(CmpOp::Eq, &x, &SymExpr::concrete(7, 32)).unwrap());
        pc
    }

    #[test]
    fn builtin_satisfies_a_simple_equality() {
        let solver = Solver::new(SolverConfig::default());
        let verdict = solver.check_sat(&simple_condition()).unwrap();
        assert_eq!(verdict.status, SatStatus::Sat);
        let model = verdict.model.expect("sat carries a model");
        assert_eq!(model.get(VarId(0)), Some(7));
    }

    #[test]
    fn empty_condition_is_sat() {
        let solver = Solver::new(SolverConfig::default());
        let verdict = solver.check_sat(&PathCondition::new()).unwrap();
        assert_eq!(verdict.status, SatStatus::Sat);
        assert!(verdict.model.expect("model").is_empty());
    }

    #[test]
    fn resolve_prefers_explicit_path() {
        let cfg = SolverConfig::resolve(Some("z3 -in"), Duration::from_secs(1));
        assert_eq!(
            cfg.backend,
            SolverBackend::External {
                program: "z3".into(),
                args: vec!["-in".into()],
            }
        );
        let cfg = SolverConfig::resolve(None, Duration::from_secs(1));
        // The suite leaves WANA_SOLVER unset, so this falls to builtin.
        if std::env::var("WANA_SOLVER").is_err() {
            assert_eq!(cfg.backend, SolverBackend::Builtin);
        }
    }

    #[test]
    fn wrapped_and_bare_model_blocks_both_parse() {
        let declared: BTreeMap<VarId, u32> = [(VarId(3), 64u32)].into_iter().collect();
        for text in [
            "sat\n(model\n  (define-fun v3 () (_ BitVec 64) #x00000000000000ff)\n)\n",
            "sat\n(\n  (define-fun v3 () (_ BitVec 64) (_ bv255 64))\n)\n",
        ] {
            let (status, model) = parse_reply(text, &declared).unwrap();
            assert_eq!(status, SatStatus::Sat);
            assert_eq!(model.unwrap().get(VarId(3)), Some(255));
        }
    }

    #[test]
    fn missing_model_entries_default_to_zero() {
        let declared: BTreeMap<VarId, u32> =
            [(VarId(0), 32u32), (VarId(1), 32u32)].into_iter().collect();
        let text = "sat\n((define-fun v1 () (_ BitVec 32) #x00000009))\n";
        let (_, model) = parse_reply(text, &declared).unwrap();
        let model = model.unwrap();
        assert_eq!(model.get(VarId(0)), Some(0));
        assert_eq!(model.get(VarId(1)), Some(9));
    }

    #[test]
    fn garbage_verdicts_are_protocol_errors() {
        let declared = BTreeMap::new();
        assert!(matches!(
            parse_reply("flurble\n", &declared),
            Err(SolverError::Protocol(_))
        ));
        assert!(matches!(
            parse_reply("", &declared),
            Err(SolverError::Protocol(_))
        ));
    }

    #[test]
    fn unsat_ignores_trailing_error_forms() {
        let declared = BTreeMap::new();
        let (status, model) =
            parse_reply("unsat\n(error \"model is not available\")\n", &declared).unwrap();
        assert_eq!(status, SatStatus::Unsat);
        assert!(model.is_none());
    }
}
