//! The end-to-end pipeline for one program.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::report::{ConstraintScore, Report, Trace};
use super::runner::{ModuleRunner, ProgramTree, PytestRunner, TestOutcome, TestRunResult};
use crate::counterfactual::{self, violation_line, BackendPatcher, RankedConstraint};
use crate::inference::{self, Backend, InferenceError, PromptBundle, TestCaseDoc, TestKind, DEFAULT_TEMPERATURE};
use crate::instrument;
use crate::ir::{self, Constraint};
use crate::python;
use crate::records::{self, Record};
use crate::spectrum::{self, attribute, Scorer};
use crate::ssa::{self, SourceUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every stage including counterfactual verification.
    Localize,
    /// Stop after the spectrum ranking.
    SpectrumOnly,
    /// Verify against a pre-recorded spectrum; requires `records`.
    VerifyOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Replay { fixtures: PathBuf },
    /// Credentials come from the environment; responses are recorded to
    /// `record_to` when given.
    Live { record_to: Option<PathBuf>, temperature: f64 },
}

impl BackendSpec {
    pub fn build(&self) -> Result<Backend, InferenceError> {
        match self {
            BackendSpec::Replay { fixtures } => Backend::replay(fixtures),
            BackendSpec::Live { record_to, temperature } => Backend::live_from_env(*temperature, record_to.clone()),
        }
    }

    pub fn live_default() -> Self {
        BackendSpec::Live { record_to: None, temperature: DEFAULT_TEMPERATURE }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Source file holding the function under test.
    pub program: PathBuf,
    /// Directory of tests, copied as `tests/` next to the module.
    pub tests: PathBuf,
    pub function: String,
    /// Dotted module name the tests import the program as.
    pub module: String,
    pub mode: Mode,
    pub backend: BackendSpec,
    pub scorer: Scorer,
    /// Pre-recorded shim output standing in for the instrumented run.
    pub records: Option<PathBuf>,
    pub runner: PytestRunner,
    /// Ground-truth line, for metrics.
    pub ground_truth: Option<usize>,
}

impl RunConfig {
    pub fn new(program: impl Into<PathBuf>, tests: impl Into<PathBuf>, function: &str, module: &str) -> Self {
        Self {
            program: program.into(),
            tests: tests.into(),
            function: function.to_string(),
            module: module.to_string(),
            mode: Mode::Localize,
            backend: BackendSpec::live_default(),
            scorer: Scorer::Ochiai,
            records: None,
            runner: PytestRunner::default(),
            ground_truth: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.runner.timeout = timeout;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Parse,
    Anchors,
    Ssa,
    BaselineRun,
    Prompt,
    Inference,
    Validation,
    Instrumentation,
    InstrumentedRun,
    Spectrum,
    Verification,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().expect("unit variant"))
    }
}

#[derive(Debug, Error)]
pub enum LocalizeError {
    #[error("no failing tests: nothing to localize")]
    NoFailingTests,
    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

impl LocalizeError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            LocalizeError::Stage { stage, .. } => Some(*stage),
            LocalizeError::NoFailingTests => None,
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, LocalizeError>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, LocalizeError> {
        self.map_err(|e| LocalizeError::Stage { stage, source: Box::new(e) })
    }
}

fn config_error(message: String) -> LocalizeError {
    LocalizeError::Stage { stage: Stage::Config, source: message.into() }
}

/// Source text of test function `test_id` (a pytest node id) under `root`.
fn test_source(root: &Path, test_id: &str) -> Option<String> {
    let mut parts = test_id.split("::");
    let file = parts.next()?;
    let scopes: Vec<&str> = parts.collect();
    let name = scopes.last()?.split('[').next()?;
    let text = std::fs::read_to_string(root.join(file.strip_prefix("tests/").unwrap_or(file))).ok()?;
    let tree = python::parse(&text);
    let mut stack = vec![tree.root_node()];
    while let Some(node) = stack.pop() {
        if node.kind() == "function_definition"
            && node.child_by_field_name("name").is_some_and(|n| python::text(n, &text) == name)
        {
            let start = node.parent().filter(|p| p.kind() == "decorated_definition").unwrap_or(node);
            return Some(python::text(start, &text).to_string());
        }
        stack.extend(python::named_children(node));
    }
    None
}

/// Prompt-facing description of each test from a plain run.
pub fn test_case_docs(tests_dir: &Path, outcomes: &[TestOutcome]) -> Vec<TestCaseDoc> {
    outcomes
        .iter()
        .map(|o| TestCaseDoc {
            test_id: o.test_id.clone(),
            kind: if o.passed { TestKind::Passing } else { TestKind::Failing },
            input_repr: test_source(tests_dir, &o.test_id).unwrap_or_else(|| o.test_id.clone()),
            expected_or_traceback: if o.passed {
                "passes".to_string()
            } else {
                // Only the first line: the rest varies across interpreter versions.
                o.message.as_deref().and_then(|m| m.lines().next()).unwrap_or("failed").to_string()
            },
        })
        .collect()
}

/// Distinct grounded constraint ids, in grounding order.
fn grounded_ids(checks: &[ir::GroundedCheck]) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for c in checks {
        if !ids.contains(&c.constraint_id) {
            ids.push(c.constraint_id.clone());
        }
    }
    ids
}

/// Constraints in verification order: non-increasing score, then document
/// order. Each carries the line its violations point at.
pub fn rank_constraints(
    accepted: &[Constraint],
    checks: &[ir::GroundedCheck],
    scores: &BTreeMap<String, f64>,
    records: &[Record],
    failing: &std::collections::BTreeSet<String>,
) -> Vec<RankedConstraint> {
    let mut ranked: Vec<RankedConstraint> = accepted
        .iter()
        .filter_map(|c| {
            let score = *scores.get(&c.id)?;
            let fallback = checks.iter().find(|k| k.constraint_id == c.id)?.site_line;
            let line = violation_line(records, &c.id, failing).unwrap_or(fallback);
            Some(RankedConstraint { constraint: c.clone(), score, line })
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    ranked
}

/// Everything up to and including the inference prompt.
pub struct Prepared {
    pub unit: SourceUnit,
    pub anchors: Vec<ssa::AnchorSite>,
    pub program: ssa::SsaProgram,
    pub tree: ProgramTree,
    pub baseline: TestRunResult,
    pub prompt: PromptBundle,
}

/// Parse, transform, run the tests once and build the prompt. Fails with
/// `NoFailingTests` when the baseline run passes.
pub fn prepare(config: &RunConfig) -> Result<Prepared, LocalizeError> {
    let unit = SourceUnit::from_file(&config.program, &config.function).at(Stage::Parse)?;
    let anchors = ssa::extract_anchors(&unit).at(Stage::Anchors)?;
    let program = ssa::to_ssa(&unit).at(Stage::Ssa)?;
    let tree = ProgramTree { module: config.module.clone(), tests_dir: config.tests.clone() };
    let baseline = config.runner.run_tests(&tree, &unit.text, false, &[]).at(Stage::BaselineRun)?;
    if baseline.failing().is_empty() {
        return Err(LocalizeError::NoFailingTests);
    }
    let docs = test_case_docs(&config.tests, &baseline.outcomes);
    let prompt = inference::build_prompt(&unit, &program, &docs).at(Stage::Prompt)?;
    Ok(Prepared { unit, anchors, program, tree, baseline, prompt })
}

/// Run the pipeline on one program.
pub fn localize(config: &RunConfig) -> Result<Report, LocalizeError> {
    if config.mode == Mode::VerifyOnly && config.records.is_none() {
        return Err(config_error("verify-only mode needs pre-recorded records".into()));
    }
    for p in [&config.program, &config.tests] {
        if !p.exists() {
            return Err(config_error(format!("{} does not exist", p.display())));
        }
    }
    let mut warnings = Vec::new();
    let mut trace = Trace::default();

    let Prepared { unit, anchors, program, tree, baseline, prompt } = prepare(config)?;
    trace.anchors = anchors;
    trace.ssa_text = program.ssa_text.clone();
    trace.def_map = program.def_map.clone();
    trace.rendered_def_map = ssa::render_def_map(&program);
    trace.prompt_hash = prompt.hash();
    let backend = config.backend.build().at(Stage::Inference)?;
    trace.raw_document = inference::infer_constraints(&prompt, &backend).at(Stage::Inference)?;

    let validated = ir::validate_ir(&trace.raw_document).at(Stage::Validation)?;
    for r in &validated.rejected {
        warnings.push(format!("rejected constraint #{} ({}): {:?}", r.index, r.field, r.reason));
    }
    let grounding = ir::ground(&validated.accepted, &program);
    for u in &grounding.ungroundable {
        warnings.push(format!("ungroundable constraint {}: {}", u.constraint_id, u.reason));
    }
    trace.accepted = validated.accepted.clone();
    trace.rejected = validated.rejected;
    trace.grounded = grounding.checks.clone();
    trace.ungroundable = grounding.ungroundable;

    let instrumented = instrument::instrument(&grounding.checks, &program).at(Stage::Instrumentation)?;
    trace.instrumented_text = instrumented.text.clone();

    let mut recs = match &config.records {
        Some(path) => records::read_jsonl(path).at(Stage::InstrumentedRun)?,
        // No checks to record: outcomes come from the plain run.
        None if grounding.checks.is_empty() => baseline
            .outcomes
            .iter()
            .map(|o| Record::Outcome(records::OutcomeRecord { test_id: o.test_id.clone(), passed: o.passed }))
            .collect(),
        None => config.runner.run_tests(&tree, &instrumented.text, true, &[]).at(Stage::InstrumentedRun)?.records,
    };
    trace.records = recs.clone();
    records::map_to_site_lines(&mut recs, &instrumented);

    let ids = grounded_ids(&grounding.checks);
    let matrix = spectrum::build_matrix(&recs, &ids).at(Stage::Spectrum)?;
    trace.tests = matrix.tests.clone();
    let score_list = matrix.scores(config.scorer);
    let scores: BTreeMap<String, f64> = score_list.iter().cloned().collect();
    let constraint_scores = score_list
        .iter()
        .enumerate()
        .map(|(j, (id, s))| ConstraintScore {
            constraint_id: id.clone(),
            cells: matrix.cells(j),
            score: *s,
            fires_on_passing: matrix.fires_on_passing(j),
        })
        .collect();
    let pre = attribute(&grounding.checks, &scores);
    if pre.is_empty() {
        warnings.push("no constraint was violated in a failing test; the ranking is empty".into());
    }

    let mut verdicts = Vec::new();
    let ranking = if config.mode == Mode::SpectrumOnly {
        pre.clone()
    } else {
        let failing = matrix.failing_tests().map(str::to_string).collect();
        let ranked = rank_constraints(&validated.accepted, &grounding.checks, &scores, &recs, &failing);
        let runner = ModuleRunner { runner: &config.runner, tree: &tree };
        let patcher = BackendPatcher::new(&backend);
        verdicts = counterfactual::verify(&ranked, &unit.text, &matrix, &runner, &patcher).at(Stage::Verification)?;
        counterfactual::final_ranking(&verdicts, &pre)
    };

    let metrics = config
        .ground_truth
        .map(|truth| spectrum::metrics(&ranking, truth, &program.executable_lines));
    Ok(Report {
        program: config.program.display().to_string(),
        function: config.function.clone(),
        scorer: config.scorer,
        ranking,
        pre_verification: pre,
        scores: constraint_scores,
        verdicts,
        metrics,
        warnings,
        trace,
    })
}
