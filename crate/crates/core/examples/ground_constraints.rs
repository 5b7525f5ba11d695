//! Validate a constraint document and ground each constraint to insertion
//! sites in the SSA text.
//!
//! `cargo run --example ground_constraints`

use std::error::Error;
use std::fmt::Write;
use std::path::Path;

use cbfl::ir::{ground, validate_ir};
use cbfl::ssa::{to_ssa, SourceUnit};

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let entry = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus/softmax");
    let ssa = to_ssa(&SourceUnit::from_file(entry.join("buggy.py"), "softmax")?)?;
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(entry.join("constraints.json"))?)?;
    // One deliberately bad entry of each kind: a label outside the closed
    // set and an anchor naming no definition.
    doc["constraints"].as_array_mut().expect("array").extend([
        serde_json::json!({"id": "X1", "category": "RANGE_CHECK", "instrument": {"region": "ENTRY", "anchor": {}},
                           "spec": {"expr": "True"}, "intent": "bad label"}),
        serde_json::json!({"id": "X2", "category": "VALUE_RANGE", "instrument": {"region": "AFTER_DEF", "anchor": {"var": "ghost__9"}},
                           "spec": {"expr": "ghost__9 > 0"}, "intent": "no such name"}),
    ]);
    let validated = validate_ir(&doc.to_string())?;
    let grounding = ground(&validated.accepted, &ssa);

    let mut out = String::new();
    for r in &validated.rejected {
        writeln!(out, "rejected   {:<3} {:?} at `{}`", r.id.as_deref().unwrap_or("?"), r.reason, r.field)?;
    }
    for u in &grounding.ungroundable {
        writeln!(out, "ungrounded {:<3} {}", u.constraint_id, u.reason)?;
    }
    for c in &grounding.checks {
        writeln!(
            out,
            "grounded   {:<3} {:<11} line {:<2} byte {:<4} weight {:.1}  {}",
            c.constraint_id,
            c.region.as_str(),
            c.site_line,
            c.site_byte_offset(),
            c.region_weight,
            c.expr
        )?;
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
