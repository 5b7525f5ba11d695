use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cbfl::harness::{self, BackendSpec, BenchConfig, BenchError, LocalizeError, Mode, PytestRunner, RunConfig};
use cbfl::spectrum::Scorer;
use cbfl::ssa::{self, SourceUnit};

#[derive(Parser)]
#[command(name = "cbfl", version, about = "Constraint-based fault localization for Python functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and print the verified ranking.
    Localize(ProgramArgs),
    /// Stop after the spectrum ranking.
    Spectrum(ProgramArgs),
    /// Verify against a recorded spectrum (requires --records).
    Verify(ProgramArgs),
    /// Localize every entry of a corpus and print the metrics table.
    Bench(BenchArgs),
    /// Print the SSA form of a function with its definition map.
    Ssa {
        path: PathBuf,
        #[arg(long)]
        function: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Live,
    Replay,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "replay")]
    backend: BackendKind,
    /// Replay source, or where a live backend records its responses.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long, default_value = "ochiai")]
    scorer: Scorer,
    /// Sampling temperature for live constraint inference.
    #[arg(long, default_value_t = cbfl::inference::DEFAULT_TEMPERATURE)]
    temperature: f64,
    /// Per test-run timeout in seconds.
    #[arg(long, default_value_t = 120)]
    timeout: u64,
    /// Directory holding the cbfl_runtime shim module.
    #[arg(long, env = "CBFL_SHIM_PATH")]
    shim_path: Option<PathBuf>,
    #[arg(long, default_value = "python3")]
    python: String,
    /// Write the JSON report here as well as summarising on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProgramArgs {
    /// A program file, or a corpus entry directory.
    program: PathBuf,
    #[arg(long)]
    tests: Option<PathBuf>,
    #[arg(long)]
    function: Option<String>,
    /// Module name the tests import; defaults to the function name.
    #[arg(long)]
    module: Option<String>,
    /// Recorded shim output to use instead of an instrumented run.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Faulty line, to report metrics.
    #[arg(long)]
    ground_truth: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenchArgs {
    corpus: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Use each entry's records.jsonl instead of instrumented runs.
    #[arg(long)]
    recorded: bool,
    #[command(flatten)]
    common: Common,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_NO_FAILING: u8 = 3;
const EXIT_EMPTY_CORPUS: u8 = 4;

impl Common {
    fn runner(&self) -> PytestRunner {
        PytestRunner {
            python: self.python.clone(),
            timeout: Duration::from_secs(self.timeout),
            shim_dir: self.shim_path.clone(),
        }
    }

    fn backend(&self, default_fixtures: Option<PathBuf>) -> Result<BackendSpec, String> {
        match self.backend {
            BackendKind::Replay => self
                .fixtures
                .clone()
                .or(default_fixtures)
                .map(|fixtures| BackendSpec::Replay { fixtures })
                .ok_or_else(|| "replay backend needs --fixtures".to_string()),
            BackendKind::Live => Ok(BackendSpec::Live { record_to: self.fixtures.clone(), temperature: self.temperature }),
        }
    }
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("writing {}: {e}", p.display())),
        None => Ok(()),
    }
}

fn run_program(args: ProgramArgs, mode: Mode) -> Result<ExitCode, String> {
    let entry = args.program.is_dir().then(|| harness::load_entry(&args.program)).transpose().map_err(|e| e.to_string())?;
    let program = entry.as_ref().map_or(args.program.clone(), |e| e.buggy());
    let tests = args.tests.or(entry.as_ref().map(|e| e.tests())).ok_or("--tests is required")?;
    let function = args.function.or(entry.as_ref().map(|e| e.meta.function.clone())).ok_or("--function is required")?;
    let module = args.module.or(entry.as_ref().map(|e| e.module().to_string())).unwrap_or_else(|| function.clone());
    let mut config = RunConfig::new(program, tests, &function, &module);
    config.mode = mode;
    config.scorer = args.common.scorer;
    config.runner = args.common.runner();
    config.backend = args.common.backend(entry.as_ref().map(|e| e.fixtures()))?;
    config.records = args.records;
    config.ground_truth = args.ground_truth.or(entry.as_ref().map(|e| e.meta.ground_truth_line));

    let report = match harness::localize(&config) {
        Ok(r) => r,
        Err(LocalizeError::NoFailingTests) => {
            eprintln!("cbfl: no failing tests; nothing to localize");
            return Ok(ExitCode::from(EXIT_NO_FAILING));
        }
        Err(e) => return Err(e.to_string()),
    };
    write_out(&args.common.out, &report.to_json())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for v in &report.verdicts {
        println!("verdict {} {:?}{}", v.constraint_id, v.status, if v.redundant { " (redundant)" } else { "" });
    }
    for (i, e) in report.ranking.entries.iter().enumerate() {
        println!("{:>3}. line {:<4} {:.4}  {}", i + 1, e.line, e.score, e.constraints.join(","));
    }
    if let Some(m) = &report.metrics {
        println!("rank {}  acc@1 {}  acc@3 {}  acc@5 {}  %susp {:.2}", m.rank, m.acc1, m.acc3, m.acc5, 100.0 * m.pct_susp);
    }
    Ok(ExitCode::SUCCESS)
}

fn run_bench(args: BenchArgs) -> Result<ExitCode, String> {
    let backend = match args.common.backend {
        BackendKind::Replay => args.common.fixtures.clone().map(|fixtures| BackendSpec::Replay { fixtures }),
        BackendKind::Live => Some(args.common.backend(None)?),
    };
    let config = BenchConfig {
        backend,
        scorer: args.common.scorer,
        jobs: args.jobs,
        runner: args.common.runner(),
        use_recorded: args.recorded,
    };
    match harness::bench(&args.corpus, &config) {
        Ok(report) => {
            print!("{}", report.table());
            write_out(&args.common.out, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
            Ok(ExitCode::SUCCESS)
        }
        Err(BenchError::EmptyCorpus(c)) => {
            eprintln!("cbfl: corpus {c} has no entries");
            Ok(ExitCode::from(EXIT_EMPTY_CORPUS))
        }
        Err(e) => Err(e.to_string()),
    }
}

fn run_ssa(path: &Path, function: &str) -> Result<ExitCode, String> {
    let unit = SourceUnit::from_file(path, function).map_err(|e| e.to_string())?;
    let program = ssa::to_ssa(&unit).map_err(|e| e.to_string())?;
    println!("{}{}", ssa::render_def_map(&program), program.function_text());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("CBFL_LOG"))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Localize(a) => run_program(a, Mode::Localize),
        Command::Spectrum(a) => run_program(a, Mode::SpectrumOnly),
        Command::Verify(a) => run_program(a, Mode::VerifyOnly),
        Command::Bench(a) => run_bench(a),
        Command::Ssa { path, function } => run_ssa(&path, &function),
    };
    result.unwrap_or_else(|e| {
        eprintln!("cbfl: {e}");
        ExitCode::from(EXIT_FAILURE)
    })
}
