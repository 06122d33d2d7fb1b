//! Human-readable report rendering.

use std::fmt::Write;
use wana_core::detectors::{Confidence, Finding};
use wana_core::report::{ContractReport, CorpusReport};

pub fn render(report: &CorpusReport) -> String {
    let mut out = String::new();
    for contract in &report.contracts {
        render_contract(&mut out, contract);
        out.push('\n');
    }
    render_summary(&mut out, report);
    out
}

fn render_contract(out: &mut String, c: &ContractReport) {
    let _ = writeln!(out, "{}", c.file);
    if let Some(error) = &c.error {
        let _ = writeln!(out, "  error: {error}");
        return;
    }
    if let (Some(platform), Some(stats)) = (c.platform, &c.module_stats) {
        let _ = writeln!(
            out,
            "  platform {}, {} functions, {} instructions",
            platform.label(),
            stats.functions,
            stats.instructions
        );
    }
    let _ = writeln!(
        out,
        "  decode {:.1} ms, explore {:.1} ms (solver {:.1} ms), total {:.1} ms",
        c.timings.decode_ms, c.timings.explore_ms, c.timings.solve_ms, c.timings.total_ms
    );
    let d = &c.diagnostics;
    if d.unknown_verdicts + d.budget_exhausted_paths + d.truncated_explorations > 0 {
        let _ = writeln!(
            out,
            "  diagnostics: {} unknown solver verdicts, {} budget-exhausted paths, {} truncated explorations",
            d.unknown_verdicts, d.budget_exhausted_paths, d.truncated_explorations
        );
    }
    if c.timed_out {
        let _ = writeln!(out, "  timed out: detectors past the budget were skipped");
    }
    for finding in &c.findings {
        render_finding(out, finding);
    }
}

fn render_finding(out: &mut String, f: &Finding) {
    let verdict = if f.verdict { "VULNERABLE" } else { "ok" };
    let confidence = match (f.verdict, f.confidence) {
        (true, Confidence::High) => " (high confidence)",
        (true, Confidence::Low) => " (low confidence)",
        (false, Confidence::High) => "",
        (false, Confidence::Low) => " (low confidence)",
    };
    let _ = writeln!(out, "  {:<30} {verdict}{confidence}", f.kind.label());
    for note in &f.notes {
        let _ = writeln!(out, "      note: {note}");
    }
    if let Some(witness) = &f.witness {
        for site in &witness.sites {
            let _ = writeln!(out, "      site: func {} offset {}", site.func, site.offset);
        }
        if !witness.model.is_empty() {
            let vars: Vec<String> = witness
                .model
                .iter()
                .map(|v| format!("{} = {:#x}", v.name, v.value))
                .collect();
            let _ = writeln!(out, "      model: {}", vars.join(", "));
        }
    }
}

fn render_summary(out: &mut String, report: &CorpusReport) {
    let s = &report.summary;
    let _ = writeln!(
        out,
        "summary: {} analyzed, {} errors",
        s.analyzed, s.errors
    );
    for (label, count) in &s.counts {
        let pct = s.percentages.get(label).copied().unwrap_or(0.0);
        let _ = writeln!(out, "  {:<30} {:>3}  ({:.1}%)", label, count, pct);
    }
}
