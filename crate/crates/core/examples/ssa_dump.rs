//! Print the light SSA form and definition map of a function.
//!
//! `cargo run --example ssa_dump -- path/to/file.py function_name`

use std::path::Path;

use cbfl::ssa::{render_def_map, to_ssa, SourceUnit};

fn dump(path: &Path, function: &str) -> Result<String, Box<dyn std::error::Error>> {
    let unit = SourceUnit::from_file(path, function)?;
    let ssa = to_ssa(&unit)?;
    Ok(format!("{}\n{}\n", render_def_map(&ssa), ssa.function_text()))
}

pub fn run_example() -> Result<String, Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus/softmax/buggy.py");
    dump(&path, "softmax")
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let text = match args.as_slice() {
        [path, function] => dump(Path::new(path), function)?,
        _ => run_example()?,
    };
    print!("{text}");
    Ok(())
}
