//! Splicing runtime checks into SSA text as non-overlapping byte-range edits.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{Category, GroundedCheck, Placement, RESULT_NAME};
use crate::python;
use crate::ssa::{SiteMode, SsaProgram};

/// Module alias every inserted call goes through.
pub const SHIM_ALIAS: &str = "__cbfl";
/// Importable name of the runtime shim.
pub const SHIM_MODULE: &str = "cbfl_runtime";
/// Marker that identifies an inserted check call.
pub const CHECK_MARKER: &str = "__cbfl.check(";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstrumentError {
    #[error("edits {first:?} and {second:?} overlap")]
    Overlap { first: Range<usize>, second: Range<usize> },
    #[error("instrumented text no longer parses (line {line})")]
    Unparseable { line: usize },
}

/// An inserted check call: which constraint it evaluates and the original
/// line it is anchored at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub constraint_id: String,
    pub site_line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub byte_range: Range<usize>,
    pub replacement: String,
    /// Check calls the replacement contains, in textual order.
    #[serde(default)]
    pub checks: Vec<CheckEntry>,
}

impl Edit {
    pub fn new(byte_range: Range<usize>, replacement: impl Into<String>) -> Self {
        Self { byte_range, replacement: replacement.into(), checks: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Applied {
    /// Start of the replacement in the instrumented text.
    at: usize,
    len: usize,
    original: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentedProgram {
    pub text: String,
    /// 1-based line of each check call in `text`.
    pub check_index: BTreeMap<usize, CheckEntry>,
    applied: Vec<Applied>,
}

impl InstrumentedProgram {
    /// Undo every edit, recovering the input text exactly.
    pub fn strip(&self) -> String {
        let mut text = self.text.clone();
        for a in self.applied.iter().rev() {
            text.replace_range(a.at..a.at + a.len, &a.original);
        }
        text
    }

    /// Original site line for a check executed at instrumented `line`.
    pub fn site_line(&self, line: usize) -> Option<usize> {
        self.check_index.get(&line).and_then(|e| e.site_line)
    }
}

/// The bit-exact check call for `cid` evaluating `expr`.
pub fn check_call(cid: &str, expr: &str) -> String {
    format!("{SHIM_ALIAS}.check({}, lambda: {})", quote(cid), one_line(expr))
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn one_line(expr: &str) -> String {
    expr.split(['\n', '\r']).map(str::trim).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
}

/// Rewrite `return <expr>` so the value is bound to `result`, then run
/// `between` (already indented lines), then return it.
pub fn rewrite_result_binding(return_stmt_text: &str, indent: &str, between: &[String]) -> String {
    let value = return_stmt_text
        .trim_start()
        .strip_prefix("return")
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .unwrap_or("None");
    let mut out = format!("{RESULT_NAME} = {value}");
    for line in between {
        out.push('\n');
        out.push_str(indent);
        out.push_str(line);
    }
    out.push('\n');
    out.push_str(indent);
    out.push_str("return ");
    out.push_str(RESULT_NAME);
    out
}

#[derive(Default)]
struct Group {
    indent: String,
    mode: Option<SiteMode>,
    span: Option<Range<usize>>,
    lines: Vec<(String, Option<CheckEntry>)>,
}

impl Group {
    fn push_check(&mut self, c: &GroundedCheck) {
        let entry = CheckEntry { constraint_id: c.constraint_id.clone(), site_line: Some(c.site_line) };
        self.lines.push((check_call(&c.constraint_id, &c.expr), Some(entry)));
    }
}

/// One edit per insertion point. Checks sharing a point are stacked in the
/// order given; temporal bookkeeping precedes checks at entry and follows
/// them at returns.
pub fn plan_edits(checks: &[GroundedCheck], ssa: &SsaProgram) -> Result<Vec<Edit>, InstrumentError> {
    let mut groups: BTreeMap<(usize, u8), Group> = BTreeMap::new();
    let mut entry_bookkeeping = Vec::new();
    let mut exits = Vec::new();
    for c in checks {
        match c.category {
            Category::TemporalCallSnapshot
                if !entry_bookkeeping.iter().any(|(_, id): &(String, String)| *id == c.constraint_id) =>
            {
                entry_bookkeeping.push((
                    format!("{SHIM_ALIAS}.snapshot({}, lambda: {})", quote(&c.constraint_id), one_line(&c.expr)),
                    c.constraint_id.clone(),
                ));
            }
            Category::TemporalUntilOverwritten | Category::TemporalResourceLifetime
                if !exits.contains(&c.constraint_id) =>
            {
                entry_bookkeeping.push((
                    format!("{SHIM_ALIAS}.temporal_enter({})", quote(&c.constraint_id)),
                    c.constraint_id.clone(),
                ));
                exits.push(c.constraint_id.clone());
            }
            _ => {}
        }
    }

    if !entry_bookkeeping.is_empty() {
        let site = &ssa.entry_site;
        let g = groups.entry((site.offset, 0)).or_default();
        g.indent = site.indent.clone();
        g.mode = Some(SiteMode::Before);
        g.lines.extend(entry_bookkeeping.into_iter().map(|(l, _)| (l, None)));
    }
    if !exits.is_empty() {
        for r in &ssa.returns {
            let g = groups.entry((r.span.start, 2)).or_default();
            g.indent = r.indent.clone();
            g.span = Some(r.span.clone());
        }
    }
    for c in checks {
        match &c.placement {
            Placement::Site(site) => {
                let tag = if site.mode == SiteMode::Before { 0 } else { 1 };
                let g = groups.entry((site.offset, tag)).or_default();
                g.indent = site.indent.clone();
                g.mode = Some(site.mode);
                g.push_check(c);
            }
            Placement::Return { span, indent } => {
                let g = groups.entry((span.start, 2)).or_default();
                g.indent = indent.clone();
                g.span = Some(span.clone());
                g.push_check(c);
            }
        }
    }

    let mut edits = Vec::new();
    for ((offset, _), g) in groups {
        let checks: Vec<CheckEntry> = g.lines.iter().filter_map(|(_, e)| e.clone()).collect();
        let edit = match (&g.span, g.mode) {
            (Some(span), _) => {
                let mut between: Vec<String> = g.lines.into_iter().map(|(l, _)| l).collect();
                between.extend(exits.iter().map(|id| format!("{SHIM_ALIAS}.temporal_exit({})", quote(id))));
                let text = &ssa.ssa_text[span.clone()];
                Edit {
                    byte_range: span.clone(),
                    replacement: rewrite_result_binding(text, &g.indent, &between),
                    checks,
                }
            }
            (None, Some(SiteMode::Before)) => Edit {
                byte_range: offset..offset,
                replacement: g.lines.iter().map(|(l, _)| format!("{}{l}\n", g.indent)).collect(),
                checks,
            },
            (None, _) => Edit {
                byte_range: offset..offset,
                replacement: g.lines.iter().map(|(l, _)| format!("\n{}{l}", g.indent)).collect(),
                checks,
            },
        };
        edits.push(edit);
    }
    sorted_checked(&mut edits)?;
    Ok(edits)
}

fn sorted_checked(edits: &mut [Edit]) -> Result<(), InstrumentError> {
    edits.sort_by_key(|e| (e.byte_range.start, e.byte_range.end));
    for pair in edits.windows(2) {
        let (a, b) = (&pair[0].byte_range, &pair[1].byte_range);
        if a.end > b.start || a == b {
            return Err(InstrumentError::Overlap { first: a.clone(), second: b.clone() });
        }
    }
    Ok(())
}

/// Apply edits from the highest start offset down so earlier offsets stay
/// valid, then index every check call in the result.
pub fn apply_edits(ssa_text: &str, edits: &[Edit]) -> Result<InstrumentedProgram, InstrumentError> {
    let mut edits = edits.to_vec();
    sorted_checked(&mut edits)?;
    let mut text = ssa_text.to_string();
    for e in edits.iter().rev() {
        text.replace_range(e.byte_range.clone(), &e.replacement);
    }

    let mut applied = Vec::with_capacity(edits.len());
    let mut delta: isize = 0;
    for e in &edits {
        let at = (e.byte_range.start as isize + delta) as usize;
        applied.push(Applied {
            at,
            len: e.replacement.len(),
            original: ssa_text[e.byte_range.clone()].to_string(),
        });
        delta += e.replacement.len() as isize - e.byte_range.len() as isize;
    }

    let mut known = edits.iter().flat_map(|e| e.checks.iter());
    let mut check_index = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let Some(cid) = line.trim_start().strip_prefix(CHECK_MARKER).and_then(leading_string) else {
            continue;
        };
        let site_line = match known.next() {
            Some(e) if e.constraint_id == cid => e.site_line,
            _ => None,
        };
        check_index.insert(i + 1, CheckEntry { constraint_id: cid, site_line });
    }
    Ok(InstrumentedProgram { text, check_index, applied })
}

/// The JSON string literal at the start of `s`, decoded.
fn leading_string(s: &str) -> Option<String> {
    let mut de = serde_json::Deserializer::from_str(s).into_iter::<String>();
    de.next()?.ok()
}

/// Offset where the shim import goes: the top of the file, or after the
/// last `from __future__` import.
fn import_offset(text: &str) -> usize {
    let tree = python::parse(text);
    python::named_children(tree.root_node())
        .into_iter()
        .filter(|n| n.kind() == "future_import_statement")
        .map(|n| match text[n.end_byte()..].find('\n') {
            Some(i) => n.end_byte() + i + 1,
            None => text.len(),
        })
        .last()
        .unwrap_or(0)
}

/// Plan, add the shim import and apply. The result is verified to parse.
pub fn instrument(checks: &[GroundedCheck], ssa: &SsaProgram) -> Result<InstrumentedProgram, InstrumentError> {
    let mut edits = plan_edits(checks, ssa)?;
    if !edits.is_empty() {
        let at = import_offset(&ssa.ssa_text);
        let mut import = format!("import {SHIM_MODULE} as {SHIM_ALIAS}\n");
        if at == ssa.ssa_text.len() && !ssa.ssa_text.ends_with('\n') {
            import.insert(0, '\n');
        }
        edits.push(Edit::new(at..at, import));
    }
    let program = apply_edits(&ssa.ssa_text, &edits)?;
    let tree = python::parse(&program.text);
    if let Some(err) = python::first_error(tree.root_node()) {
        return Err(InstrumentError::Unparseable { line: err.start_position().row + 1 });
    }
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_call_shape() {
        assert_eq!(
            check_call("c3", "all(v <= 0\n   for v in shifted__1)"),
            r#"__cbfl.check("c3", lambda: all(v <= 0 for v in shifted__1))"#
        );
        assert_eq!(check_call("a\"b", "True"), r#"__cbfl.check("a\"b", lambda: True)"#);
    }

    #[test]
    fn result_binding() {
        let out = rewrite_result_binding("return [e / s for e in exps]", "    ", &["C".into()]);
        assert_eq!(out, "result = [e / s for e in exps]\n    C\n    return result");
        assert_eq!(rewrite_result_binding("return", "  ", &[]), "result = None\n  return result");
        let nested = "return (f(a, (b + c)) * [d[(e)]])";
        assert!(rewrite_result_binding(nested, "", &[]).starts_with("result = (f(a, (b + c)) * [d[(e)]])\n"));
    }

    #[test]
    fn overlaps_and_reverse_application() {
        let text = "0123456789";
        let err = apply_edits(text, &[Edit::new(2..5, "x"), Edit::new(4..6, "y")]).unwrap_err();
        assert!(matches!(err, InstrumentError::Overlap { .. }));
        let err = apply_edits(text, &[Edit::new(3..3, "x"), Edit::new(3..3, "y")]).unwrap_err();
        assert!(matches!(err, InstrumentError::Overlap { .. }));
        let p = apply_edits(text, &[Edit::new(8..9, "EIGHT"), Edit::new(1..1, "+"), Edit::new(10..10, "!")]).unwrap();
        assert_eq!(p.text, "0+1234567EIGHT9!");
        assert_eq!(p.strip(), text);
    }

    #[test]
    fn future_imports_stay_first() {
        assert_eq!(import_offset("from __future__ import annotations\nx = 1\n"), 35);
        assert_eq!(import_offset("x = 1\n"), 0);
    }
}
