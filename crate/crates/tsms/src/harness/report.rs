//! Line-oriented evaluation report with a versioned schema header.
//!
//! Everything except the trailing `runtime` lines is deterministic for a
//! fixed config and seed; reproducibility checks compare reports after
//! dropping lines that start with `runtime `.

use crate::harness::experiment::EvaluationReport;
use std::fmt::Write as _;

pub const REPORT_HEADER: &str = "tsms-report v1";

/// Render a report. Key order is fixed; floats use Rust's shortest
/// round-trip formatting so equal values render identically. Runtime lines
/// come last so they can be stripped for byte comparison.
pub fn report_to_text(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{REPORT_HEADER}");
    let _ = writeln!(out, "seed {}", report.seed);
    let _ = writeln!(out, "config_hash {}", report.config_hash);
    for m in &report.methods {
        let _ = writeln!(out, "method {m}");
    }
    let _ = writeln!(out, "reference {}", report.methods[report.reference]);
    let _ = writeln!(out, "best_single {}", report.best_single_id);
    for (d, row) in report.datasets.iter().zip(&report.rmse) {
        for (m, v) in report.methods.iter().zip(row) {
            let _ = writeln!(out, "rmse {d} {m} {v}");
        }
    }
    for (m, r) in report.methods.iter().zip(&report.avg_ranks) {
        let _ = writeln!(out, "avg_rank {m} {r}");
    }
    for (m, (w, l)) in report.methods.iter().zip(&report.wins_losses) {
        let _ = writeln!(out, "wins_losses {m} {w} {l}");
    }
    for (name, reason) in &report.failures {
        let _ = writeln!(out, "failure {name} {}", reason.replace('\n', " "));
    }
    for (d, row) in report.datasets.iter().zip(&report.runtime_secs) {
        for (m, secs) in report.methods.iter().zip(row) {
            let _ = writeln!(out, "runtime {d} {m} {secs:.6}");
        }
    }
    out
}
