//! Turn a recorded shim stream into the violation spectrum, score every
//! constraint, and attribute scores to source lines.
//!
//! `cargo run --example spectrum_scores`

use std::collections::BTreeMap;
use std::error::Error;
use std::fmt::Write;
use std::path::Path;

use cbfl::instrument::instrument;
use cbfl::ir::{ground, validate_ir};
use cbfl::records::{map_to_site_lines, read_jsonl};
use cbfl::spectrum::{attribute, build_matrix, metrics, Scorer};
use cbfl::ssa::{to_ssa, SourceUnit};

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let entry = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus/softmax");
    let ssa = to_ssa(&SourceUnit::from_file(entry.join("buggy.py"), "softmax")?)?;
    let constraints = validate_ir(&std::fs::read_to_string(entry.join("constraints.json"))?)?.accepted;
    let checks = ground(&constraints, &ssa).checks;
    let program = instrument(&checks, &ssa)?;
    let mut records = read_jsonl(entry.join("records.jsonl"))?;
    map_to_site_lines(&mut records, &program);

    let ids: Vec<String> = constraints.iter().map(|c| c.id.clone()).collect();
    let matrix = build_matrix(&records, &ids)?;
    let mut out = String::new();
    writeln!(out, "{} failing, {} passing", matrix.failing_count(), matrix.passing_count())?;
    writeln!(out, "id   ef ep nf np  ochiai  tarantula")?;
    let ochiai = matrix.scores(Scorer::Ochiai);
    let tarantula = matrix.scores(Scorer::Tarantula);
    for (j, id) in matrix.constraints.iter().enumerate() {
        let c = matrix.cells(j);
        writeln!(out, "{id:<4} {:>2} {:>2} {:>2} {:>2}  {:.4}  {:.4}", c.ef, c.ep, c.nf, c.np, ochiai[j].1, tarantula[j].1)?;
    }

    let scores: BTreeMap<String, f64> = ochiai.into_iter().collect();
    let ranking = attribute(&checks, &scores);
    writeln!(out, "\nranking")?;
    for e in &ranking.entries {
        writeln!(out, "  line {:<2} {:.4}  {}", e.line, e.score, e.constraints.join(","))?;
    }
    let m = metrics(&ranking, 5, &ssa.executable_lines);
    writeln!(out, "\ntruth line 5: rank {}  acc@1 {}  %susp {:.1}", m.rank, m.acc1, 100.0 * m.pct_susp)?;
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
