//! The JSONL stream the runtime shim writes: one check record per executed
//! check call and one outcome record per test.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instrument::InstrumentedProgram;

/// Environment variable naming the JSONL sink file.
pub const SINK_ENV: &str = "CBFL_VIOLATIONS_PATH";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violated,
    Satisfied,
    EvalError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub test_id: String,
    pub cid: String,
    pub verdict: Verdict,
    pub line: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err: Option<String>,
    /// Ordinal of the record within its test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub test_id: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Check(CheckRecord),
    Outcome(OutcomeRecord),
}

impl Record {
    pub fn test_id(&self) -> &str {
        match self {
            Record::Check(c) => &c.test_id,
            Record::Outcome(o) => &o.test_id,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecordError {
    #[error("record stream line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

pub fn parse_jsonl(text: &str) -> Result<Vec<Record>, RecordError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RecordError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<Record>, RecordError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| RecordError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_jsonl(&text)
}

pub fn to_jsonl(records: &[Record]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

/// Replace each check record's `line`, which the shim reports as the call's
/// line in the instrumented file, with the original line the check is
/// anchored at. Records from unknown lines are left untouched.
pub fn map_to_site_lines(records: &mut [Record], program: &InstrumentedProgram) {
    for r in records {
        if let Record::Check(c) = r {
            if let Some(line) = program.site_line(c.line) {
                c.line = line;
            }
        }
    }
}
