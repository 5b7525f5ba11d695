//! The whole pipeline on the softmax corpus entry: replayed constraints,
//! recorded shim output, and counterfactual reruns under pytest.
//!
//! `cargo run --example localize_softmax` (needs python3 with pytest)

use std::error::Error;
use std::fmt::Write;
use std::path::Path;

use cbfl::harness::{self, BackendSpec, PytestRunner, RunConfig};

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let entry = harness::load_entry(&root.join("fixtures/corpus/softmax"))?;
    let mut config = RunConfig::new(entry.buggy(), entry.tests(), &entry.meta.function, entry.module());
    config.backend = BackendSpec::Replay { fixtures: entry.fixtures() };
    config.records = Some(entry.records());
    config.ground_truth = Some(entry.meta.ground_truth_line);
    config.runner = PytestRunner { shim_dir: Some(root.join("fixtures/shim")), ..PytestRunner::default() };
    let report = harness::localize(&config)?;

    let mut out = String::new();
    for s in &report.scores {
        writeln!(out, "sigma({}) = {:.4}{}", s.constraint_id, s.score, if s.fires_on_passing { "  (fires on passing tests)" } else { "" })?;
    }
    for v in &report.verdicts {
        writeln!(out, "{}: {:?} at line {:?}", v.constraint_id, v.status, v.line)?;
    }
    for (i, e) in report.ranking.entries.iter().take(3).enumerate() {
        writeln!(out, "#{} line {} ({:.4})", i + 1, e.line, e.score)?;
    }
    if let Some(m) = &report.metrics {
        writeln!(out, "ground truth rank {}", m.rank)?;
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
