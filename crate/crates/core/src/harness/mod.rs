//! End-to-end orchestration: running test suites, localizing one program,
//! and benchmarking a corpus.

mod bench;
mod corpus;
mod localize;
mod report;
mod runner;

pub use bench::{bench, Aggregate, BenchConfig, BenchError, BenchReport, EntryResult, EntryRow};
pub use corpus::{discover, load_entry, CorpusEntry, CorpusEntryInvalid, EntryMeta};
pub use localize::{localize, prepare, Prepared, rank_constraints, test_case_docs, BackendSpec, LocalizeError, Mode, RunConfig, Stage};
pub use report::{ConstraintScore, Report, Trace};
pub use runner::{ModuleRunner, ProgramTree, PytestRunner, RunError, TestOutcome, TestRunResult, DEFAULT_TIMEOUT};
