//! Running the pipeline over a corpus and aggregating accuracy metrics.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::corpus::{self, CorpusEntry};
use super::localize::{localize, BackendSpec, Mode, RunConfig};
use super::runner::{ProgramTree, PytestRunner};
use crate::spectrum::{median_rank, Metrics, Rank, Scorer};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// `None` replays each entry's own `fixtures.json`.
    pub backend: Option<BackendSpec>,
    pub scorer: Scorer,
    pub jobs: usize,
    pub runner: PytestRunner,
    /// Use each entry's `records.jsonl`, when present, instead of an
    /// instrumented run.
    pub use_recorded: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { backend: None, scorer: Scorer::Ochiai, jobs: 1, runner: PytestRunner::default(), use_recorded: false }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("corpus {0} has no entries")]
    EmptyCorpus(String),
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EntryResult {
    Ok { metrics: Metrics },
    /// Failed the sanity gate; excluded from aggregates.
    Invalid { reason: String },
    /// A pipeline stage failed; counted as unranked.
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRow {
    pub entry: String,
    #[serde(flatten)]
    pub result: EntryResult,
}

impl EntryRow {
    fn rank(&self) -> Option<Rank> {
        match &self.result {
            EntryResult::Ok { metrics } => Some(metrics.rank),
            EntryResult::Error { .. } => Some(Rank(None)),
            EntryResult::Invalid { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub programs: usize,
    pub acc1: f64,
    pub acc3: f64,
    pub acc5: f64,
    pub mean_pct_susp: f64,
    pub median_rank: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<EntryRow>,
    pub aggregate: Aggregate,
}

fn sanity_check(entry: &CorpusEntry, runner: &PytestRunner) -> Result<(), String> {
    let tree = ProgramTree { module: entry.module().to_string(), tests_dir: entry.tests() };
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let buggy = runner.run_tests(&tree, &read(&entry.buggy())?, false, &[]).map_err(|e| format!("buggy run: {e}"))?;
    if buggy.failing().is_empty() {
        return Err("buggy version passes every test".into());
    }
    let reference =
        runner.run_tests(&tree, &read(&entry.reference())?, false, &[]).map_err(|e| format!("reference run: {e}"))?;
    if let Some(t) = reference.failing().first() {
        return Err(format!("reference fails {t}"));
    }
    Ok(())
}

fn run_entry(entry: &CorpusEntry, config: &BenchConfig) -> EntryResult {
    if let Err(reason) = sanity_check(entry, &config.runner) {
        return EntryResult::Invalid { reason };
    }
    let mut rc = RunConfig::new(entry.buggy(), entry.tests(), &entry.meta.function, entry.module());
    rc.mode = Mode::Localize;
    rc.scorer = config.scorer;
    rc.runner = config.runner.clone();
    rc.ground_truth = Some(entry.meta.ground_truth_line);
    rc.backend = config.backend.clone().unwrap_or(BackendSpec::Replay { fixtures: entry.fixtures() });
    if config.use_recorded && entry.records().exists() {
        rc.records = Some(entry.records());
    }
    match localize(&rc) {
        Ok(report) => EntryResult::Ok { metrics: report.metrics.expect("ground truth was set") },
        Err(e) => EntryResult::Error { message: e.to_string() },
    }
}

fn aggregate(rows: &[EntryRow]) -> Aggregate {
    let ranks: Vec<Rank> = rows.iter().filter_map(EntryRow::rank).collect();
    let n = ranks.len();
    let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * ranks.iter().filter(|r| r.within(k)).count() as f64 / n as f64 };
    let susp: Vec<f64> = rows
        .iter()
        .filter_map(|r| match &r.result {
            EntryResult::Ok { metrics } => Some(metrics.pct_susp),
            EntryResult::Error { .. } => Some(0.0),
            EntryResult::Invalid { .. } => None,
        })
        .collect();
    Aggregate {
        programs: n,
        acc1: pct(1),
        acc3: pct(3),
        acc5: pct(5),
        mean_pct_susp: if susp.is_empty() { 0.0 } else { 100.0 * susp.iter().sum::<f64>() / susp.len() as f64 },
        median_rank: median_rank(&ranks),
    }
}

/// Sanity-check and localize every entry of `corpus` on `config.jobs`
/// workers. Rows come back in entry-name order whatever the worker count.
pub fn bench(corpus: &Path, config: &BenchConfig) -> Result<BenchReport, BenchError> {
    let entries = corpus::discover(corpus)?;
    if entries.is_empty() {
        return Err(BenchError::EmptyCorpus(corpus.display().to_string()));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.jobs.max(1)).build()?;
    let rows: Vec<EntryRow> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| match e {
                Ok(entry) => EntryRow { entry: entry.name.clone(), result: run_entry(entry, config) },
                Err(invalid) => EntryRow {
                    entry: invalid.entry.clone(),
                    result: EntryResult::Invalid { reason: invalid.reason.clone() },
                },
            })
            .collect()
    });
    let aggregate = aggregate(&rows);
    Ok(BenchReport { rows, aggregate })
}

impl BenchReport {
    /// Plain-text table; a pure function of the report.
    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.entry.len()).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let yes = |b: bool| if b { "yes" } else { "no" };
        writeln!(out, "{:width$}  {:7}  {:>5}  {:>5}  {:>5}  {:>5}  {:>7}", "entry", "status", "rank", "acc@1", "acc@3", "acc@5", "%susp")
            .unwrap();
        for row in &self.rows {
            match &row.result {
                EntryResult::Ok { metrics: m } => writeln!(
                    out,
                    "{:width$}  {:7}  {:>5}  {:>5}  {:>5}  {:>5}  {:>7.2}",
                    row.entry,
                    "ok",
                    m.rank.to_string(),
                    yes(m.acc1),
                    yes(m.acc3),
                    yes(m.acc5),
                    100.0 * m.pct_susp
                ),
                EntryResult::Invalid { reason } => writeln!(out, "{:width$}  {:7}  {reason}", row.entry, "invalid"),
                EntryResult::Error { message } => writeln!(out, "{:width$}  {:7}  {message}", row.entry, "error"),
            }
            .unwrap();
        }
        let a = &self.aggregate;
        let median = a.median_rank.map_or("n/a".to_string(), |m| if m.is_finite() { format!("{m:.1}") } else { "inf".into() });
        writeln!(
            out,
            "\nprograms {}  Acc@1 {:.1}%  Acc@3 {:.1}%  Acc@5 {:.1}%  Mean %Susp {:.2}  Med. Rank {median}",
            a.programs, a.acc1, a.acc3, a.acc5, a.mean_pct_susp
        )
        .unwrap();
        out
    }
}
