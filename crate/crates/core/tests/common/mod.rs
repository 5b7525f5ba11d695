//! Shared helpers for integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use cbfl::ir::{Anchor, Category, Constraint, Region};
use cbfl::ssa::SsaProgram;
use serde::Deserialize;

pub fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixtures() -> PathBuf {
    manifest().join("fixtures")
}

pub fn corpus() -> PathBuf {
    fixtures().join("corpus")
}

pub fn shim_dir() -> PathBuf {
    fixtures().join("shim")
}

pub fn python_available() -> bool {
    Command::new("python3")
        .args(["-c", "import pytest"])
        .output()
        .is_ok_and(|o| o.status.success())
}

/// Sorted `*.py` files directly under `dir`.
pub fn python_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .expect("fixture directory exists")
        .map(|e| e.expect("readable entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "py"))
        .collect();
    files.sort();
    files
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct DriverOutput {
    pub outcomes: Vec<(String, String)>,
    #[serde(default)]
    pub checks: Option<usize>,
    #[serde(default)]
    pub eval_errors: Vec<Option<String>>,
}

/// Run `f` on each of the module's INPUTS in a fresh interpreter.
pub fn run_driver(module_text: &str, shim: bool) -> Result<DriverOutput, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("subject.py");
    std::fs::write(&path, module_text).map_err(|e| e.to_string())?;
    let mut cmd = Command::new("python3");
    cmd.arg(fixtures().join("support/equivalence_driver.py")).arg(&path).env("PYTHONDONTWRITEBYTECODE", "1");
    if shim {
        cmd.arg("--shim").env("PYTHONPATH", shim_dir());
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    serde_json::from_slice(&out.stdout).map_err(|e| format!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn constraint(id: String, category: Category, region: Region, anchor: Anchor, expr: &str) -> Constraint {
    Constraint { id, category, region, anchor, expr: expr.to_string(), intent: String::new() }
}

/// One trivially true constraint for every groundable anchor of `ssa`:
/// each definition, each used name, each loop end, each line, each
/// conditional, the entry and the returns.
pub fn always_true_constraints(ssa: &SsaProgram) -> Vec<Constraint> {
    let mut out = Vec::new();
    let next = |out: &mut Vec<Constraint>, category, region, anchor, expr: &str| {
        let id = format!("t{}", out.len() + 1);
        out.push(constraint(id, category, region, anchor, expr));
    };
    next(&mut out, Category::Precondition, Region::Entry, Anchor::default(), "True");
    if !ssa.returns.is_empty() {
        next(&mut out, Category::Postcondition, Region::AnyReturn, Anchor::default(), "len([result]) == 1");
    }
    for d in &ssa.def_map {
        let expr = format!("len([{}]) == 1", d.ssa_name);
        next(&mut out, Category::ValueRange, Region::AfterDef, Anchor::var(&d.ssa_name), &expr);
    }
    for name in ssa.uses.keys() {
        if cbfl::ssa::split_ssa_name(name).is_some() {
            let expr = format!("len([{name}]) == 1");
            next(&mut out, Category::Relation, Region::BeforeUse, Anchor::var(name), &expr);
        }
    }
    for l in &ssa.loop_ids {
        next(&mut out, Category::InvariantLoop, Region::LoopHead, Anchor::loop_id(l.loop_id), "True");
        next(&mut out, Category::InvariantLoop, Region::LoopTail, Anchor::loop_id(l.loop_id), "True");
    }
    for line in ssa.line_sites.keys() {
        next(&mut out, Category::ValueRange, Region::Line, Anchor::line(*line), "True");
    }
    for m in &ssa.merges {
        next(&mut out, Category::Relation, Region::AfterBranch, Anchor::line(m.end_line), "True");
    }
    out
}
