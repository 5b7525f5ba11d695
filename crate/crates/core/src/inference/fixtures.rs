//! The replay fixture file: a JSON object mapping content hashes to raw
//! responses.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use super::{InferenceError, PromptBundle};

/// Key prefix separating patch responses from constraint documents.
pub const PATCH_KEY_PREFIX: &str = "patch:";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordOutcome {
    Added,
    Unchanged,
    /// An existing entry under the same key was overwritten.
    Replaced,
}

#[derive(Debug)]
pub struct FixtureStore {
    path: PathBuf,
    entries: RwLock<BTreeMap<String, String>>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> InferenceError {
    InferenceError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn load(path: &Path) -> Result<BTreeMap<String, String>, InferenceError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    if text.trim().is_empty() {
        return Ok(BTreeMap::new());
    }
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

impl FixtureStore {
    /// Open a store that must already exist.
    pub fn open_existing(path: impl Into<PathBuf>) -> Result<Self, InferenceError> {
        let path = path.into();
        if !path.is_file() {
            return Err(InferenceError::BackendUnavailable(format!(
                "replay fixture {} does not exist",
                path.display()
            )));
        }
        let entries = load(&path)?;
        Ok(Self { path, entries: RwLock::new(entries) })
    }

    /// Open a store, starting empty when the file is absent.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, InferenceError> {
        let path = path.into();
        let entries = if path.exists() { load(&path)? } else { BTreeMap::new() };
        Ok(Self { path, entries: RwLock::new(entries) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.read().expect("fixture lock poisoned").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("fixture lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert and persist. Writers are serialized by an exclusive lock on a
    /// sidecar file, and entries other processes wrote meanwhile are kept.
    pub fn insert(&self, key: &str, response: &str) -> Result<RecordOutcome, InferenceError> {
        let mut entries = self.entries.write().expect("fixture lock poisoned");
        let lock_path = self.path.with_extension("lock");
        let lock = File::create(&lock_path).map_err(|e| io_err(&lock_path, e))?;
        lock.lock().map_err(|e| io_err(&lock_path, e))?;

        let mut on_disk = if self.path.exists() { load(&self.path)? } else { BTreeMap::new() };
        let outcome = match on_disk.insert(key.to_string(), response.to_string()) {
            None => RecordOutcome::Added,
            Some(old) if old == response => RecordOutcome::Unchanged,
            Some(_) => {
                tracing::warn!(key, path = %self.path.display(), "fixture entry replaced");
                RecordOutcome::Replaced
            }
        };
        let dir = self.path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(&self.path, e))?;
        let text = serde_json::to_string_pretty(&on_disk).expect("maps serialize");
        tmp.write_all(text.as_bytes())
            .and_then(|_| tmp.write_all(b"\n"))
            .map_err(|e| io_err(&self.path, e))?;
        tmp.persist(&self.path).map_err(|e| io_err(&self.path, e.error))?;
        *entries = on_disk;
        drop(lock);
        Ok(outcome)
    }
}

/// Record `response` as the replay answer for `prompt`. The response must
/// be JSON.
pub fn record_fixture(
    prompt: &PromptBundle,
    response: &str,
    path: impl Into<PathBuf>,
) -> Result<RecordOutcome, InferenceError> {
    serde_json::from_str::<serde_json::Value>(response)
        .map_err(|e| InferenceError::NotJson(e.to_string()))?;
    FixtureStore::open(path)?.insert(&prompt.hash(), response)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(tag: &str) -> PromptBundle {
        PromptBundle {
            task_and_schema: "t".into(),
            anchor_rules: "a".into(),
            program_section: tag.into(),
            tests_section: "x".into(),
        }
    }

    #[test]
    fn record_replace_and_reject() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.json");
        let p = bundle("p");
        assert_eq!(record_fixture(&p, "{\"a\": 1}", &path).unwrap(), RecordOutcome::Added);
        assert_eq!(record_fixture(&p, "{\"a\": 1}", &path).unwrap(), RecordOutcome::Unchanged);
        assert_eq!(record_fixture(&p, "{\"a\": 2}", &path).unwrap(), RecordOutcome::Replaced);
        assert!(matches!(record_fixture(&p, "{nope", &path), Err(InferenceError::NotJson(_))));
        let store = FixtureStore::open_existing(&path).unwrap();
        assert_eq!(store.get(&p.hash()).as_deref(), Some("{\"a\": 2}"));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn hash_separates_sections() {
        let mut a = bundle("ab");
        let mut b = bundle("ab");
        a.anchor_rules = "x".into();
        b.anchor_rules = "xa".into();
        b.program_section = "b".into();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
