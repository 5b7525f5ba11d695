//! Insert runtime checks for the softmax constraints and show the
//! instrumented program alongside the check index.
//!
//! `cargo run --example instrument_softmax`

use std::error::Error;
use std::fmt::Write;
use std::path::Path;

use cbfl::instrument::instrument;
use cbfl::ir::{ground, validate_ir};
use cbfl::ssa::{to_ssa, SourceUnit};

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let entry = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus/softmax");
    let ssa = to_ssa(&SourceUnit::from_file(entry.join("buggy.py"), "softmax")?)?;
    let constraints = validate_ir(&std::fs::read_to_string(entry.join("constraints.json"))?)?.accepted;
    let program = instrument(&ground(&constraints, &ssa).checks, &ssa)?;

    let mut out = program.text.clone();
    writeln!(out, "\n# check index (instrumented line -> constraint @ original line)")?;
    for (line, e) in &program.check_index {
        writeln!(out, "# {line:>3} -> {} @ {:?}", e.constraint_id, e.site_line)?;
    }
    assert_eq!(program.strip(), ssa.ssa_text, "instrumentation is reversible");
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
