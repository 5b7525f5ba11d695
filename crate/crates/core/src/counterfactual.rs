//! Counterfactual verification: probe each suspicious constraint with a
//! one-line patch, rerun the tests, and classify its causal role.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{content_hash, strip_fences, Backend, InferenceError, PATCH_KEY_PREFIX};
use crate::ir::Constraint;
use crate::python;
use crate::records::{Record, Verdict};
use crate::spectrum::{RankedLine, Ranking, SpectrumMatrix};

pub type RunnerError = Box<dyn std::error::Error + Send + Sync>;

/// Runs the test suite against a version of the program module.
pub trait TestRunner {
    /// Ids of the tests that fail when the module's source is `source`.
    fn failing_tests(&self, source: &str) -> Result<BTreeSet<String>, RunnerError>;
}

/// Proposes a replacement for one line of the program.
pub trait PatchGenerator {
    fn generate(&self, request: &PatchRequest) -> Result<String, InferenceError>;
}

#[derive(Debug, Error)]
pub enum CounterfactualError {
    #[error("baseline failing tests {baseline:?} differ from the recorded run's {recorded:?}")]
    BaselineMismatch { baseline: BTreeSet<String>, recorded: BTreeSet<String> },
    #[error("test run failed: {0}")]
    Runner(RunnerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalStatus {
    Primary,
    Secondary,
    Irrelevant,
    OverApproximate,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalVerdict {
    pub constraint_id: String,
    pub status: CausalStatus,
    /// The line the patch targets.
    pub line: Option<usize>,
    pub score: f64,
    pub patch: Option<String>,
    /// Baseline-failing tests still failing after the patch.
    pub failing_after: BTreeSet<String>,
    /// Set by dominance pruning.
    pub redundant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CausalVerdict {
    fn new(constraint_id: &str, status: CausalStatus, line: Option<usize>, score: f64) -> Self {
        Self {
            constraint_id: constraint_id.to_string(),
            status,
            line,
            score,
            patch: None,
            failing_after: BTreeSet::new(),
            redundant: false,
            note: None,
        }
    }

    fn reran(&self) -> bool {
        matches!(
            self.status,
            CausalStatus::Primary | CausalStatus::Secondary | CausalStatus::Irrelevant
        )
    }
}

/// A constraint queued for verification with its score and target line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedConstraint {
    pub constraint: Constraint,
    pub score: f64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchRequest {
    pub constraint: Constraint,
    pub line: usize,
    /// Line `line` of the original program, verbatim.
    pub statement_text: String,
    pub full_source: String,
}

impl PatchRequest {
    pub fn prompt(&self) -> String {
        let c = &self.constraint;
        format!(
            "A semantic constraint on the program below is violated by the failing tests.\n\
             Constraint {} ({}, {}): {}\nIntent: {}\n\n\
             Line {} is suspected:\n{}\n\n\
             Program:\n{}\n\n\
             Propose a minimal fix confined to line {} that restores the constraint. \
             Reply with exactly one line of code, the full replacement for line {}, and nothing else.",
            c.id,
            c.category,
            c.region,
            c.expr,
            c.intent,
            self.line,
            self.statement_text,
            self.full_source,
            self.line,
            self.line
        )
    }

    /// Replay key for this request.
    pub fn key(&self) -> String {
        format!("{PATCH_KEY_PREFIX}{}", content_hash(&[&self.prompt()]))
    }
}

/// Patch generation through an inference backend, always at temperature 0.
pub struct BackendPatcher {
    backend: Backend,
}

impl BackendPatcher {
    pub fn new(backend: &Backend) -> Self {
        Self { backend: backend.at_temperature(0.0) }
    }
}

impl PatchGenerator for BackendPatcher {
    fn generate(&self, request: &PatchRequest) -> Result<String, InferenceError> {
        self.backend.complete(&request.key(), &request.prompt())
    }
}

/// Causal status from the failing sets before and after a patch.
pub fn classify(baseline_failing: &BTreeSet<String>, patched_failing: &BTreeSet<String>) -> CausalStatus {
    let after: BTreeSet<&String> = patched_failing.intersection(baseline_failing).collect();
    if after.is_empty() {
        CausalStatus::Primary
    } else if after.len() < baseline_failing.len() {
        CausalStatus::Secondary
    } else {
        CausalStatus::Irrelevant
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatchError {
    #[error("patch is empty")]
    Empty,
    #[error("line {0} is outside the program")]
    NoSuchLine(usize),
    #[error("patched program does not parse (line {0})")]
    Unparseable(usize),
}

/// Replace exactly line `line` of `source` with the first non-empty line of
/// `replacement`, keeping the original indentation.
pub fn apply_patch(source: &str, line: usize, replacement: &str) -> Result<String, PatchError> {
    let cleaned = strip_fences(replacement);
    let new_line = cleaned
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or(PatchError::Empty)?;
    let idx = python::LineIndex::new(source);
    if line == 0 || line > idx.line_count() {
        return Err(PatchError::NoSuchLine(line));
    }
    let (start, end) = (idx.line_start(line), idx.line_end(line));
    let indent: String = source[start..end].chars().take_while(|c| *c == ' ' || *c == '\t').collect();
    let mut out = String::with_capacity(source.len() + new_line.len());
    out.push_str(&source[..start]);
    out.push_str(&indent);
    out.push_str(new_line);
    out.push_str(&source[end..]);
    let tree = python::parse(&out);
    if let Some(err) = python::first_error(tree.root_node()) {
        return Err(PatchError::Unparseable(err.start_position().row + 1));
    }
    Ok(out)
}

/// The line most often reported by `cid`'s violations in failing tests,
/// lowest on ties.
pub fn violation_line(records: &[Record], cid: &str, failing: &BTreeSet<String>) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for r in records {
        if let Record::Check(c) = r {
            if c.cid == cid && c.verdict == Verdict::Violated && failing.contains(&c.test_id) {
                *counts.entry(c.line).or_default() += 1;
            }
        }
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|(_, n)| *n == best).map(|(l, _)| l)
}

/// Verify `ranked` (non-increasing score) in order, stopping at the first
/// Primary, then prune dominated verdicts.
pub fn verify(
    ranked: &[RankedConstraint],
    source: &str,
    spectrum: &SpectrumMatrix,
    runner: &dyn TestRunner,
    patcher: &dyn PatchGenerator,
) -> Result<Vec<CausalVerdict>, CounterfactualError> {
    let baseline = runner.failing_tests(source).map_err(CounterfactualError::Runner)?;
    let recorded: BTreeSet<String> = spectrum.failing_tests().map(str::to_string).collect();
    if baseline.is_empty() {
        return Ok(Vec::new());
    }
    if baseline != recorded {
        return Err(CounterfactualError::BaselineMismatch { baseline, recorded });
    }

    let mut verdicts = Vec::new();
    for rc in ranked {
        let c = &rc.constraint;
        let fires_on_passing = spectrum.column(&c.id).is_some_and(|j| spectrum.fires_on_passing(j));
        if fires_on_passing {
            verdicts.push(CausalVerdict::new(&c.id, CausalStatus::OverApproximate, Some(rc.line), rc.score));
            continue;
        }
        if rc.score <= 0.0 {
            continue;
        }
        let mut v = CausalVerdict::new(&c.id, CausalStatus::Error, Some(rc.line), rc.score);
        let request = PatchRequest {
            constraint: c.clone(),
            line: rc.line,
            statement_text: source.lines().nth(rc.line.saturating_sub(1)).unwrap_or_default().to_string(),
            full_source: source.to_string(),
        };
        let patch = match patcher.generate(&request) {
            Ok(p) => p,
            Err(e) => {
                v.note = Some(e.to_string());
                verdicts.push(v);
                continue;
            }
        };
        v.patch = Some(patch.clone());
        let patched = match apply_patch(source, rc.line, &patch) {
            Ok(p) => p,
            Err(e) => {
                v.note = Some(e.to_string());
                verdicts.push(v);
                continue;
            }
        };
        let after = runner.failing_tests(&patched).map_err(CounterfactualError::Runner)?;
        v.status = classify(&baseline, &after);
        v.failing_after = after.intersection(&baseline).cloned().collect();
        let stop = v.status == CausalStatus::Primary;
        verdicts.push(v);
        if stop {
            break;
        }
    }
    prune_redundant(&mut verdicts);
    Ok(verdicts)
}

/// Mark verdict `k` redundant when a higher-ranked Primary or Secondary `j`
/// leaves a subset of what `k` leaves failing.
pub fn prune_redundant(verdicts: &mut [CausalVerdict]) {
    for k in 0..verdicts.len() {
        if !verdicts[k].reran() {
            continue;
        }
        let dominated = verdicts[..k].iter().any(|j| {
            !j.redundant
                && matches!(j.status, CausalStatus::Primary | CausalStatus::Secondary)
                && j.failing_after.is_subset(&verdicts[k].failing_after)
        });
        if dominated {
            verdicts[k].redundant = true;
        }
    }
}

/// Primary lines at full score, then surviving Secondary lines, then the
/// fallback ranking; with no Primary, the fallback alone.
pub fn final_ranking(verdicts: &[CausalVerdict], fallback: &Ranking) -> Ranking {
    let live = |s: CausalStatus| verdicts.iter().filter(move |v| v.status == s && !v.redundant && v.line.is_some());
    if live(CausalStatus::Primary).next().is_none() {
        return fallback.clone();
    }
    let mut entries: Vec<RankedLine> = Vec::new();
    let mut add = |line: usize, score: f64, cid: &str| {
        if let Some(e) = entries.iter_mut().find(|e| e.line == line) {
            if !e.constraints.iter().any(|c| c == cid) {
                e.constraints.push(cid.to_string());
            }
            return;
        }
        entries.push(RankedLine { line, score, constraints: vec![cid.to_string()] });
    };
    for v in live(CausalStatus::Primary) {
        add(v.line.expect("filtered"), 1.0, &v.constraint_id);
    }
    for v in live(CausalStatus::Secondary) {
        add(v.line.expect("filtered"), (2.0 + v.score.min(1.0)) / 4.0, &v.constraint_id);
    }
    for e in &fallback.entries {
        if !entries.iter().any(|x| x.line == e.line) {
            entries.push(RankedLine {
                line: e.line,
                score: (1.0 + e.score.min(1.0)) / 4.0,
                constraints: e.constraints.clone(),
            });
        }
    }
    Ranking::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn classify_truth_table() {
        let base = set(&["t3", "t4"]);
        assert_eq!(classify(&base, &set(&[])), CausalStatus::Primary);
        assert_eq!(classify(&base, &set(&["t4"])), CausalStatus::Secondary);
        assert_eq!(classify(&base, &set(&["t3", "t4"])), CausalStatus::Irrelevant);
        // New failures outside the baseline do not count against a patch.
        assert_eq!(classify(&base, &set(&["t1"])), CausalStatus::Primary);
    }

    #[test]
    fn patches_replace_one_line_keeping_indent() {
        let src = "def f(x):\n    y = x + 1\n    return y\n";
        let out = apply_patch(src, 2, "```python\ny = x - 1\n```").unwrap();
        assert_eq!(out, "def f(x):\n    y = x - 1\n    return y\n");
        assert_eq!(apply_patch(src, 2, "y = (x"), Err(PatchError::Unparseable(2)));
        assert_eq!(apply_patch(src, 9, "y = 1"), Err(PatchError::NoSuchLine(9)));
        assert_eq!(apply_patch(src, 2, "\n  \n"), Err(PatchError::Empty));
    }
}
