//! Command-line front end: analyzes single files or whole directories of
//! Wasm contracts and emits a text or JSON report.

mod text;

use clap::{Parser, ValueEnum};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use wana_core::report::{
    analyze_bytes, corpus_report, AnalysisConfig, ContractReport, CorpusReport, Diagnostics,
    PlatformChoice, Timings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlatformArg {
    Auto,
    Eosio,
    Ethereum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

/// Symbolic-execution vulnerability scanner for Wasm smart contracts.
///
/// Analyzes EOSIO contracts (entered through `apply`) for fake EOS
/// transfers, forged transfer notifications, and block-information
/// dependency, and Ethereum-flavored Wasm contracts (entered through
/// `main`) for greedy behavior, dangerous delegatecalls, and
/// block-information dependency.
#[derive(Debug, Parser)]
#[command(name = "wana", version)]
struct Cli {
    /// Wasm files or directories; a directory is scanned for *.wasm.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    /// Host interface to assume, or auto to infer it per file.
    #[arg(long, value_enum, default_value_t = PlatformArg::Auto)]
    platform: PlatformArg,

    /// Loop back-edge bound per label.
    #[arg(long, default_value_t = 10)]
    loop_depth: u32,

    /// Seed for the deterministic fallback models.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// External SMT-LIB2 solver command, e.g. "z3 -in". Overrides the
    /// WANA_SOLVER environment variable; without either, the bundled
    /// solver is used.
    #[arg(long)]
    solver_path: Option<String>,

    /// Per-contract wall-clock budget in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,

    /// Per-query solver budget in seconds.
    #[arg(long, default_value_t = 5.0)]
    solver_timeout: f64,

    /// Cap on completed paths per entry-point exploration.
    #[arg(long, default_value_t = 2000)]
    max_paths: usize,

    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,

    /// Worker threads for corpus analysis; defaults to the CPU count.
    #[arg(long)]
    jobs: Option<usize>,

    /// Write the report to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(message) => {
            eprintln!("wana: {message}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<i32, String> {
    let files = collect_inputs(&cli.inputs)?;
    let config = analysis_config(&cli);
    let jobs = cli
        .jobs
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(NonZeroUsize::get)
                .unwrap_or(1)
        })
        .clamp(1, files.len().max(1));

    let contracts = analyze_all(&files, &config, jobs);
    let report = corpus_report(&config, contracts);

    let rendered = match cli.format {
        FormatArg::Json => {
            let mut json =
                serde_json::to_string_pretty(&report).map_err(|e| format!("serialize: {e}"))?;
            json.push('\n');
            json
        }
        FormatArg::Text => text::render(&report),
    };
    match &cli.output {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{rendered}"),
    }

    Ok(exit_code(&report))
}

/// Resolves files and directories into the flat analysis list, keeping
/// the order inputs were given and sorting within each directory.
fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, String> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found = scan_dir(input)?;
            if found.is_empty() {
                return Err(format!("{}: directory contains no .wasm files", input.display()));
            }
            found.sort();
            files.append(&mut found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(format!("{}: no such file or directory", input.display()));
        }
    }
    Ok(files)
}

fn scan_dir(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| format!("{}: {e}", dir.display()))?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == "wasm") {
            found.push(path);
        }
    }
    Ok(found)
}

fn analysis_config(cli: &Cli) -> AnalysisConfig {
    AnalysisConfig {
        platform: match cli.platform {
            PlatformArg::Auto => PlatformChoice::Auto,
            PlatformArg::Eosio => PlatformChoice::Eosio,
            PlatformArg::Ethereum => PlatformChoice::Ethereum,
        },
        loop_bound: cli.loop_depth,
        seed: cli.seed,
        max_paths: cli.max_paths,
        contract_timeout_ms: secs_to_ms(cli.timeout),
        solver_timeout_ms: secs_to_ms(cli.solver_timeout),
        solver_path: cli.solver_path.clone(),
    }
}

fn secs_to_ms(secs: f64) -> u64 {
    (secs.max(0.0) * 1000.0).round() as u64
}

/// Fans the files out to a bounded worker pool; each worker analyzes one
/// contract at a time, and results keep input order.
fn analyze_all(files: &[PathBuf], config: &AnalysisConfig, jobs: usize) -> Vec<ContractReport> {
    let cursor = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<ContractReport>>> =
        files.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                let Some(file) = files.get(i) else { break };
                let entry = analyze_file(file, config);
                *results[i].lock().expect("result slot") = Some(entry);
            });
        }
    });
    results
        .into_iter()
        .map(|slot| slot.into_inner().expect("result slot").expect("worker filled every slot"))
        .collect()
}

fn analyze_file(file: &Path, config: &AnalysisConfig) -> ContractReport {
    let label = file.display().to_string();
    match std::fs::read(file) {
        Ok(bytes) => analyze_bytes(&label, &bytes, config),
        Err(e) => ContractReport {
            file: label,
            platform: None,
            module_stats: None,
            findings: Vec::new(),
            timings: Timings::default(),
            diagnostics: Diagnostics::default(),
            error: Some(format!("read failed: {e}")),
            timed_out: false,
        },
    }
}

/// 0 clean, 1 findings present, 2 operational errors.
fn exit_code(report: &CorpusReport) -> i32 {
    if report.contracts.iter().any(|c| c.error.is_some()) {
        return 2;
    }
    let found = report
        .contracts
        .iter()
        .any(|c| c.findings.iter().any(|f| f.verdict));
    if found {
        1
    } else {
        0
    }
}
