//! Fixture corpus layout: one directory per program holding `buggy.py`,
//! `reference.py`, `tests/` and `meta.json`. Optional `fixtures.json`
//! (replay responses) and `records.jsonl` (a recorded instrumented run).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryMeta {
    pub function: String,
    /// Module the tests import; defaults to the function name.
    #[serde(default)]
    pub module: Option<String>,
    /// Faulty line in `buggy.py`.
    pub ground_truth_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub name: String,
    pub dir: PathBuf,
    pub meta: EntryMeta,
}

impl CorpusEntry {
    pub fn buggy(&self) -> PathBuf {
        self.dir.join("buggy.py")
    }

    pub fn reference(&self) -> PathBuf {
        self.dir.join("reference.py")
    }

    pub fn tests(&self) -> PathBuf {
        self.dir.join("tests")
    }

    pub fn fixtures(&self) -> PathBuf {
        self.dir.join("fixtures.json")
    }

    pub fn records(&self) -> PathBuf {
        self.dir.join("records.jsonl")
    }

    pub fn module(&self) -> &str {
        self.meta.module.as_deref().unwrap_or(&self.meta.function)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("corpus entry {entry} is invalid: {reason}")]
pub struct CorpusEntryInvalid {
    pub entry: String,
    pub reason: String,
}

pub fn load_entry(dir: &Path) -> Result<CorpusEntry, CorpusEntryInvalid> {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let invalid = |reason: String| CorpusEntryInvalid { entry: name.clone(), reason };
    for required in ["buggy.py", "reference.py", "tests", "meta.json"] {
        if !dir.join(required).exists() {
            return Err(invalid(format!("missing {required}")));
        }
    }
    let meta_text = std::fs::read_to_string(dir.join("meta.json")).map_err(|e| invalid(e.to_string()))?;
    let meta: EntryMeta = serde_json::from_str(&meta_text).map_err(|e| invalid(format!("meta.json: {e}")))?;
    if meta.ground_truth_line == 0 {
        return Err(invalid("ground_truth_line must be at least 1".into()));
    }
    Ok(CorpusEntry { name: name.clone(), dir: dir.to_path_buf(), meta })
}

/// Every subdirectory of `corpus`, sorted by name, loaded or rejected.
pub fn discover(corpus: &Path) -> std::io::Result<Vec<Result<CorpusEntry, CorpusEntryInvalid>>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(corpus)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs.iter().map(|d| load_entry(d)).collect())
}
