//! Structured-text explanation reports.
//!
//! Schema (`tsms-explanation v1`, one record per line, fixed key order):
//!
//! ```text
//! step t=<i> model=<id> min_distance=<d> fallback=<bool> forecast=<f> actual=<a>
//! attr t=<i> base=<v> phi=<c1,...,cL>
//! stability t=<i> lo=<l1,...,lL> hi=<h1,...,hL>
//! closest t=<i> model=<id> distance=<d> offset=<o> chunk=<c> window=<w> created=<s>
//! furthest t=<i> model=<id> distance=<d>
//! drift t=<i> delta=<d> bound=<b> w=<n>
//! rebuild t=<i> trigger=<drift|periodic> performed=<bool> region_start=<s> region_len=<n>
//! rebuild_closest t=<i> pre=<id>:<d> post=<id>:<d>      (`-` when no member exists)
//! rocsize t=<i> pre=<n1,...> post=<n1,...>
//! roc model=<id> members=<n>
//! roc_member model=<id> offset=<o> chunk=<c> window=<w> created=<s> pattern=<v1,...>
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so parsing a report
//! reproduces the emitted values bit-exactly.

use crate::error::{Result, TsmsError};
use crate::selector::{RebuildTrigger, RunOutput};
use std::fmt::Write as _;
use std::path::Path;

pub const EXPLANATION_HEADER: &str = "tsms-explanation v1";

/// The per-step fields recovered by [`parse_explanation_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExplanationStep {
    pub t: usize,
    pub chosen_model: usize,
    pub min_distance: f64,
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn explanation_report_to_text(output: &RunOutput) -> Result<String> {
    if output.records.is_empty() {
        return Err(TsmsError::EmptySequence);
    }
    let mut out = String::new();
    let _ = writeln!(out, "{EXPLANATION_HEADER}");
    let mut drifts = output.drifts.iter().peekable();
    let mut rebuilds = output.rebuilds.iter().peekable();
    for r in &output.records {
        let _ = writeln!(
            out,
            "step t={} model={} min_distance={} fallback={} forecast={} actual={}",
            r.t, r.chosen_model, r.min_distance, r.fallback, r.forecast[0], r.actual[0]
        );
        if let Some(attr) = &r.attributions {
            let _ = writeln!(
                out,
                "attr t={} base={} phi={}",
                r.t,
                attr.base_value,
                join(&attr.phi)
            );
        }
        if let Some(s) = &r.stability {
            let _ = writeln!(out, "stability t={} lo={} hi={}", r.t, join(&s.lo), join(&s.hi));
        }
        if let Some(m) = &r.closest_member {
            let _ = writeln!(
                out,
                "closest t={} model={} distance={} offset={} chunk={} window={} created={}",
                r.t,
                r.chosen_model,
                r.min_distance,
                m.series_offset,
                m.chunk_index,
                m.window_index,
                m.created_at
            );
        }
        if let Some((id, d)) = r.furthest {
            let _ = writeln!(out, "furthest t={} model={} distance={}", r.t, id, d);
        }
        while drifts.peek().map_or(false, |d| d.t == r.t) {
            let d = drifts.next().unwrap();
            let _ = writeln!(
                out,
                "drift t={} delta={} bound={} w={}",
                d.t, d.delta, d.bound, d.w
            );
        }
        while rebuilds.peek().map_or(false, |e| e.t == r.t) {
            let e = rebuilds.next().unwrap();
            let trigger = match e.trigger {
                RebuildTrigger::Drift => "drift",
                RebuildTrigger::Periodic => "periodic",
            };
            let _ = writeln!(
                out,
                "rebuild t={} trigger={trigger} performed={} region_start={} region_len={}",
                e.t, e.performed, e.region_start, e.region_len
            );
            let fmt_closest = |c: Option<(usize, f64)>| match c {
                Some((id, d)) => format!("{id}:{d}"),
                None => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "rebuild_closest t={} pre={} post={}",
                e.t,
                fmt_closest(e.pre_closest),
                fmt_closest(e.post_closest)
            );
            let _ = writeln!(
                out,
                "rocsize t={} pre={} post={}",
                e.t,
                join_usize(&e.pre_sizes),
                join_usize(&e.post_sizes)
            );
        }
    }
    for roc in &output.final_rocs {
        let _ = writeln!(out, "roc model={} members={}", roc.model_id, roc.members.len());
        for m in &roc.members {
            let _ = writeln!(
                out,
                "roc_member model={} offset={} chunk={} window={} created={} pattern={}",
                roc.model_id,
                m.series_offset,
                m.chunk_index,
                m.window_index,
                m.created_at,
                join(&m.pattern)
            );
        }
    }
    Ok(out)
}

pub fn emit_explanation_report(output: &RunOutput, path: &Path) -> Result<()> {
    let text = explanation_report_to_text(output)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Recover the per-step selection fields from a report.
pub fn parse_explanation_report(text: &str) -> Result<Vec<ExplanationStep>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == EXPLANATION_HEADER => {}
        other => {
            return Err(TsmsError::ParseError {
                line: 1,
                message: format!("unexpected header {:?}", other.map(|(_, l)| l)),
            })
        }
    }
    let mut steps = Vec::new();
    for (lineno, line) in lines {
        let Some(rest) = line.strip_prefix("step ") else {
            continue;
        };
        let mut t = None;
        let mut model = None;
        let mut min_distance = None;
        for field in rest.split_whitespace() {
            let bad = |what: &str| TsmsError::ParseError {
                line: lineno + 1,
                message: format!("invalid {what} in {field:?}"),
            };
            let Some((key, value)) = field.split_once('=') else {
                return Err(bad("field"));
            };
            match key {
                "t" => t = Some(value.parse().map_err(|_| bad("t"))?),
                "model" => model = Some(value.parse().map_err(|_| bad("model"))?),
                "min_distance" => {
                    min_distance = Some(value.parse().map_err(|_| bad("min_distance"))?)
                }
                _ => {}
            }
        }
        match (t, model, min_distance) {
            (Some(t), Some(chosen_model), Some(min_distance)) => steps.push(ExplanationStep {
                t,
                chosen_model,
                min_distance,
            }),
            _ => {
                return Err(TsmsError::ParseError {
                    line: lineno + 1,
                    message: "step line missing t/model/min_distance".into(),
                })
            }
        }
    }
    Ok(steps)
}
