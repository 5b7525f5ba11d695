//! Benchmark the bundled corpus with replayed constraints and recorded
//! shim streams, and print the metrics table.
//!
//! `cargo run --example bench_corpus -- [corpus-dir] [jobs]` (needs python3
//! with pytest)

use std::error::Error;
use std::path::{Path, PathBuf};

use cbfl::harness::{bench, BenchConfig, PytestRunner};

fn run(corpus: &Path, jobs: usize) -> Result<String, Box<dyn Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let config = BenchConfig {
        jobs,
        use_recorded: true,
        runner: PytestRunner { shim_dir: Some(root.join("fixtures/shim")), ..PytestRunner::default() },
        ..BenchConfig::default()
    };
    Ok(bench(corpus, &config)?.table())
}

pub fn run_example() -> Result<String, Box<dyn Error>> {
    run(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus"), 2)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let text = match args.as_slice() {
        [] => run_example()?,
        [corpus] => run(&PathBuf::from(corpus), 1)?,
        [corpus, jobs, ..] => run(&PathBuf::from(corpus), jobs.parse()?)?,
    };
    print!("{text}");
    Ok(())
}
