//! Record replay fixtures for a corpus entry: the constraint document in
//! `constraints.json` under the entry's prompt key, each patch probe in
//! `patches.json` under its request key, and one instrumented shim run as
//! `records.jsonl`.
//!
//! `cargo run --example record_fixture -- <entry-dir> <shim-dir>` rewrites
//! the entry's `fixtures.json` and `records.jsonl` in place. Without
//! arguments it records a scratch copy of the softmax entry.

use std::collections::BTreeMap;
use std::error::Error;
use std::path::{Path, PathBuf};

use cbfl::counterfactual::PatchRequest;
use cbfl::harness::{self, BackendSpec, Mode, PytestRunner, RunConfig};
use cbfl::inference::{record_fixture, FixtureStore};
use cbfl::ir::validate_ir;
use cbfl::records::to_jsonl;

#[derive(serde::Deserialize)]
struct Probe {
    line: usize,
    replacement: String,
}

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn record_entry(entry_dir: &Path, shim_dir: &Path) -> Result<String, Box<dyn Error>> {
    let entry = harness::load_entry(entry_dir)?;
    let mut config = RunConfig::new(entry.buggy(), entry.tests(), &entry.meta.function, entry.module());
    config.runner = PytestRunner { shim_dir: Some(shim_dir.to_path_buf()), ..PytestRunner::default() };
    let prepared = harness::prepare(&config)?;

    let doc = std::fs::read_to_string(entry_dir.join("constraints.json"))?;
    let mut log = format!("prompt {} -> {:?}\n", prepared.prompt.hash(), record_fixture(&prepared.prompt, &doc, entry.fixtures())?);

    let constraints = validate_ir(&doc)?.accepted;
    let probes: BTreeMap<String, Probe> = match std::fs::read_to_string(entry_dir.join("patches.json")) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => BTreeMap::new(),
    };
    let store = FixtureStore::open(entry.fixtures())?;
    for (cid, probe) in &probes {
        let constraint = constraints.iter().find(|c| &c.id == cid).ok_or(format!("no constraint {cid}"))?;
        let request = PatchRequest {
            constraint: constraint.clone(),
            line: probe.line,
            statement_text: prepared.unit.line_text(probe.line).unwrap_or_default().to_string(),
            full_source: prepared.unit.text.clone(),
        };
        log += &format!("patch {cid} line {} -> {:?}\n", probe.line, store.insert(&request.key(), &probe.replacement)?);
    }

    config.mode = Mode::SpectrumOnly;
    config.backend = BackendSpec::Replay { fixtures: entry.fixtures() };
    let report = harness::localize(&config)?;
    std::fs::write(entry.records(), to_jsonl(&report.trace.records))?;
    log += &format!("records {} lines\n", report.trace.records.len());
    Ok(log)
}

fn copy_dir(from: &Path, to: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(to)?;
    for e in std::fs::read_dir(from)? {
        let e = e?;
        if e.file_type()?.is_dir() {
            copy_dir(&e.path(), &to.join(e.file_name()))?;
        } else {
            std::fs::copy(e.path(), to.join(e.file_name()))?;
        }
    }
    Ok(())
}

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let scratch = tempfile::tempdir()?;
    let entry = scratch.path().join("softmax");
    copy_dir(&manifest().join("fixtures/corpus/softmax"), &entry)?;
    std::fs::remove_file(entry.join("fixtures.json")).ok();
    let mut log = record_entry(&entry, &manifest().join("fixtures/shim"))?;
    let committed = std::fs::read_to_string(manifest().join("fixtures/corpus/softmax/fixtures.json"))?;
    let fresh = std::fs::read_to_string(entry.join("fixtures.json"))?;
    log += &format!("matches committed fixtures: {}\n", committed == fresh);
    Ok(log)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let log = match args.as_slice() {
        [entry, shim] => record_entry(Path::new(entry), Path::new(shim))?,
        _ => run_example()?,
    };
    print!("{log}");
    Ok(())
}
