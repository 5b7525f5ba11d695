//! Assemble the four-section constraint-inference prompt for softmax and
//! show its replay key.
//!
//! `cargo run --example build_prompt`

use std::error::Error;
use std::path::Path;

use cbfl::inference::{build_prompt, TestCaseDoc, TestKind};
use cbfl::ssa::{to_ssa, SourceUnit};

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus/softmax/buggy.py");
    let unit = SourceUnit::from_file(&path, "softmax")?;
    let ssa = to_ssa(&unit)?;
    let doc = |id: &str, kind, call: &str, outcome: &str| TestCaseDoc {
        test_id: id.into(),
        kind,
        input_repr: call.into(),
        expected_or_traceback: outcome.into(),
    };
    let tests = [
        doc("t1", TestKind::Passing, "softmax([0.0, 1.0])", "[0.2689, 0.7311]"),
        doc("t2", TestKind::Failing, "softmax([1000.0, 1001.0])", "AssertionError: output is not a distribution"),
    ];
    let prompt = build_prompt(&unit, &ssa, &tests)?;
    Ok(format!("{}\n\n-- replay key {}\n", prompt.text(), prompt.hash()))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
