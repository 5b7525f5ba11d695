//! Prompt construction and constraint generation through a pluggable
//! backend with content-addressed replay.

mod backend;
mod fixtures;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ir::{Region, ALLOWED_CALLS, DOCUMENT_VERSION};
use crate::ssa::{render_def_map, SourceUnit, SsaProgram};

pub use backend::{strip_fences, Backend, BackendKind, HttpTransport, Transport, DEFAULT_TEMPERATURE};
pub use fixtures::{record_fixture, FixtureStore, RecordOutcome, PATCH_KEY_PREFIX};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InferenceError {
    #[error("no tests to describe")]
    EmptyTests,
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no fixture for prompt hash {0}")]
    FixtureMiss(String),
    #[error("response is not JSON: {0}")]
    NotJson(String),
    #[error("fixture file {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Passing,
    Failing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCaseDoc {
    pub test_id: String,
    pub kind: TestKind,
    /// How the test drives the function, usually its source.
    pub input_repr: String,
    /// Expected behaviour for passing tests, the failure report otherwise.
    pub expected_or_traceback: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub task_and_schema: String,
    pub anchor_rules: String,
    pub program_section: String,
    pub tests_section: String,
}

impl PromptBundle {
    pub fn sections(&self) -> [&str; 4] {
        [
            &self.task_and_schema,
            &self.anchor_rules,
            &self.program_section,
            &self.tests_section,
        ]
    }

    /// The prompt as sent to a model.
    pub fn text(&self) -> String {
        self.sections().join("\n\n")
    }

    /// Stable replay key: SHA-256 over the sections, each length-prefixed.
    pub fn hash(&self) -> String {
        content_hash(&self.sections())
    }
}

pub fn content_hash(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn task_and_schema() -> String {
    let categories = crate::ir::Category::ALL.map(|c| c.as_str()).join(" | ");
    let regions = Region::ALL.map(|r| r.as_str()).join(" | ");
    format!(
        "You will see one function that contains a bug, together with tests that pass and tests that fail.\n\
         Write semantic constraints on the function's state that capture what it is meant to do and that \
         hold on the passing tests but not on the failing ones.\n\n\
         Reply with JSON only, in exactly this shape:\n\
         {{\"version\": \"{DOCUMENT_VERSION}\",\n \
         \"constraints\": [{{\n  \
         \"id\": \"<short unique id>\",\n  \
         \"category\": \"<{categories}>\",\n  \
         \"instrument\": {{\"region\": \"<{regions}>\", \"anchor\": {{...}}}},\n  \
         \"spec\": {{\"expr\": \"<boolean expression>\"}},\n  \
         \"intent\": \"<one sentence>\"\n \
         }}]\n}}\n\n\
         Expressions may use comparisons, and/or/not, arithmetic, subscripts, slices, comprehensions, \
         literals and calls to {} only. No attribute access, assignment, lambda or import.",
        ALLOWED_CALLS.join(", ")
    )
}

fn anchor_rules() -> String {
    [
        "Anchor rules (names refer to the SSA form below):",
        "  ENTRY: anchor = {}. Evaluated before the first statement; use parameter names only.",
        "  ANY_RETURN: anchor = {}. Evaluated at every return; the returned value is `result`.",
        "  AFTER_DEF: anchor = {\"var\": \"<ssa_name>\"}, e.g. \"x__2\". The name must be the SSA-versioned name from the definition map.",
        "  BEFORE_USE: anchor = {\"var\": \"<ssa_name>\"}. Evaluated before every statement that reads it; it must be the SSA-versioned name.",
        "  LOOP_HEAD: anchor = {\"loop_id\": <int>}. Evaluated at the top of every iteration of the loop marked `# loop__id: <int>`.",
        "  LOOP_TAIL: anchor = {\"loop_id\": <int>}. Evaluated at the end of every iteration.",
        "  AFTER_BRANCH: anchor = {\"line\": <int>}. The line of the last statement of a conditional; evaluated where its branches merge.",
        "  LINE: anchor = {\"line\": <int>}. Evaluated right after the given line of the original program.",
        "Inside AFTER_DEF and BEFORE_USE expressions every variable other than a parameter must be SSA-versioned.",
    ]
    .join("\n")
}

fn program_section(unit: &SourceUnit, ssa: &SsaProgram) -> String {
    format!(
        "### Program:\n{}\n\n### SSA Form\n{}{}",
        unit.function_text(),
        render_def_map(ssa),
        ssa.function_text()
    )
}

fn tests_section(tests: &[TestCaseDoc]) -> String {
    let render = |kind: TestKind| -> String {
        let body: Vec<String> = tests
            .iter()
            .filter(|t| t.kind == kind)
            .map(|t| {
                let label = if kind == TestKind::Passing { "Expected" } else { "Error" };
                format!(
                    "# {}\n{}\n# {label}:\n{}",
                    t.test_id,
                    t.input_repr.trim_end(),
                    t.expected_or_traceback.trim_end()
                )
            })
            .collect();
        if body.is_empty() {
            "none".to_string()
        } else {
            body.join("\n\n")
        }
    };
    format!(
        "### Passing Tests:\n{}\n\n### Failing Tests with Errors:\n{}",
        render(TestKind::Passing),
        render(TestKind::Failing)
    )
}

/// Assemble the four prompt sections. Deterministic in its inputs.
pub fn build_prompt(
    unit: &SourceUnit,
    ssa: &SsaProgram,
    tests: &[TestCaseDoc],
) -> Result<PromptBundle, InferenceError> {
    if tests.is_empty() {
        return Err(InferenceError::EmptyTests);
    }
    Ok(PromptBundle {
        task_and_schema: task_and_schema(),
        anchor_rules: anchor_rules(),
        program_section: program_section(unit, ssa),
        tests_section: tests_section(tests),
    })
}

/// An empty but valid constraint document.
pub fn empty_document() -> String {
    format!("{{\"version\": \"{DOCUMENT_VERSION}\", \"constraints\": []}}")
}

/// Obtain the raw constraint document for `prompt`. Nothing is filtered
/// here; validation happens downstream.
pub fn infer_constraints(prompt: &PromptBundle, backend: &Backend) -> Result<String, InferenceError> {
    let key = prompt.hash();
    match backend.kind() {
        BackendKind::Replay => backend.lookup(&key),
        BackendKind::Live => {
            let text = prompt.text();
            let first = strip_fences(&backend.send(&text)?);
            let doc = if serde_json::from_str::<serde_json::Value>(&first).is_ok() {
                first
            } else {
                tracing::warn!("model output is not JSON; retrying once");
                let retry = format!("{text}\n\nOutput only valid JSON. No prose, no code fences.");
                let second = strip_fences(&backend.send(&retry)?);
                if serde_json::from_str::<serde_json::Value>(&second).is_ok() {
                    second
                } else {
                    tracing::warn!("model output is still not JSON; using no constraints");
                    empty_document()
                }
            };
            backend.remember(&key, &doc)?;
            Ok(doc)
        }
    }
}
