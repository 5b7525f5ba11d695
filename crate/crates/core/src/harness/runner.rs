//! Running a pytest suite against one version of a program module in an
//! isolated scratch tree.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use quick_xml::events::Event;
use quick_xml::{Reader, XmlVersion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counterfactual::{RunnerError, TestRunner};
use crate::records::{self, Record, SINK_ENV};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Error)]
pub enum RunError {
    #[error("python interpreter unavailable: {0}")]
    InterpreterMissing(String),
    #[error("test run exceeded {0:?} and was killed")]
    Timeout(Duration),
    #[error("test run crashed (exit {status:?}): {diagnostic}")]
    HarnessCrash { status: Option<i32>, diagnostic: String },
    #[error("scratch tree: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Records(#[from] records::RecordError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    /// pytest node id, e.g. `tests/test_m.py::test_a`.
    pub test_id: String,
    pub passed: bool,
    /// Failure report for failed tests.
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRunResult {
    pub outcomes: Vec<TestOutcome>,
    /// Shim records, when the shim was enabled.
    pub records: Vec<Record>,
    pub exit_status: Option<i32>,
    #[serde(skip)]
    pub duration: Duration,
}

impl TestRunResult {
    pub fn failing(&self) -> BTreeSet<String> {
        self.outcomes.iter().filter(|o| !o.passed).map(|o| o.test_id.clone()).collect()
    }
}

/// Where a program's module lives and which tests exercise it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramTree {
    /// Dotted module name the tests import, e.g. `softmax` or `pkg.mod`.
    pub module: String,
    /// Directory copied into the scratch tree as `tests/`.
    pub tests_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct PytestRunner {
    pub python: String,
    pub timeout: Duration,
    /// Directory containing the `cbfl_runtime` module, for shim-on runs.
    pub shim_dir: Option<PathBuf>,
}

impl Default for PytestRunner {
    fn default() -> Self {
        Self { python: "python3".into(), timeout: DEFAULT_TIMEOUT, shim_dir: None }
    }
}

fn copy_dir(from: &Path, to: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(to)?;
    for entry in std::fs::read_dir(from)? {
        let entry = entry?;
        let name = entry.file_name();
        if name == "__pycache__" || name == ".pytest_cache" {
            continue;
        }
        let target = to.join(&name);
        if entry.file_type()?.is_dir() {
            copy_dir(&entry.path(), &target)?;
        } else {
            std::fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

/// Write `source` as `module` under `root`, creating package directories.
fn write_module(root: &Path, module: &str, source: &str) -> std::io::Result<()> {
    let parts: Vec<&str> = module.split('.').collect();
    let mut dir = root.to_path_buf();
    for p in &parts[..parts.len() - 1] {
        dir.push(p);
        std::fs::create_dir_all(&dir)?;
        let init = dir.join("__init__.py");
        if !init.exists() {
            std::fs::write(init, "")?;
        }
    }
    std::fs::write(dir.join(format!("{}.py", parts[parts.len() - 1])), source)
}

impl PytestRunner {
    /// Run the tests against `source` installed as the tree's module.
    pub fn run_tests(
        &self,
        tree: &ProgramTree,
        source: &str,
        shim: bool,
        env: &[(String, String)],
    ) -> Result<TestRunResult, RunError> {
        let scratch = tempfile::Builder::new().prefix("cbfl-run-").tempdir()?;
        let root = scratch.path();
        copy_dir(&tree.tests_dir, &root.join("tests"))?;
        write_module(root, &tree.module, source)?;
        let junit = root.join("junit.xml");
        let sink = root.join("violations.jsonl");

        let mut path_entries = vec![root.to_path_buf()];
        let mut cmd = Command::new(&self.python);
        cmd.args(["-m", "pytest", "-q", "-p", "no:cacheprovider", "-o", "junit_family=xunit2"])
            .arg(format!("--junitxml={}", junit.display()));
        if shim {
            if let Some(dir) = &self.shim_dir {
                path_entries.push(std::path::absolute(dir)?);
            }
            cmd.args(["-p", "cbfl_runtime"]).env(SINK_ENV, &sink);
        }
        cmd.arg("tests")
            .current_dir(root)
            .env("PYTHONPATH", std::env::join_paths(&path_entries).map_err(std::io::Error::other)?)
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .envs(env.iter().map(|(k, v)| (k, v)))
            .stdin(Stdio::null())
            .stdout(File::create(root.join("stdout.txt"))?)
            .stderr(File::create(root.join("stderr.txt"))?);

        let started = Instant::now();
        let mut child = cmd.spawn().map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => RunError::InterpreterMissing(format!("`{}` not found", self.python)),
            _ => RunError::Io(e),
        })?;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if started.elapsed() > self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Err(RunError::Timeout(self.timeout));
            }
            std::thread::sleep(Duration::from_millis(10));
        };
        let duration = started.elapsed();
        let code = status.code();
        let diagnostic = || {
            let out = std::fs::read_to_string(root.join("stdout.txt")).unwrap_or_default();
            let err = std::fs::read_to_string(root.join("stderr.txt")).unwrap_or_default();
            let mut text = format!("{out}{err}");
            if text.len() > 4000 {
                text = text[text.len() - 4000..].to_string();
            }
            text.replace(&root.display().to_string(), "<root>")
        };
        if !matches!(code, Some(0 | 1)) {
            let diag = diagnostic();
            if diag.contains("No module named pytest") {
                return Err(RunError::InterpreterMissing("pytest is not installed".into()));
            }
            let diagnostic = if code == Some(5) { format!("no tests collected\n{diag}") } else { diag };
            return Err(RunError::HarnessCrash { status: code, diagnostic });
        }

        let xml = std::fs::read_to_string(&junit).map_err(|e| RunError::HarnessCrash {
            status: code,
            diagnostic: format!("missing junit report: {e}\n{}", diagnostic()),
        })?;
        let mut outcomes = parse_junit(&xml, root).map_err(|e| RunError::HarnessCrash {
            status: code,
            diagnostic: format!("unreadable junit report: {e}"),
        })?;
        let root_str = root.display().to_string();
        for o in &mut outcomes {
            if let Some(m) = &mut o.message {
                *m = m.replace(&root_str, "<root>");
            }
        }

        let mut records = Vec::new();
        if shim {
            if sink.exists() {
                records = records::read_jsonl(&sink)?;
            }
            // With the shim on, its outcome records are authoritative.
            for o in &mut outcomes {
                if let Some(passed) = records.iter().find_map(|r| match r {
                    Record::Outcome(x) if x.test_id == o.test_id => Some(x.passed),
                    _ => None,
                }) {
                    o.passed = passed;
                }
            }
        }
        Ok(TestRunResult { outcomes, records, exit_status: code, duration })
    }
}

/// Runs one program tree with the shim off; the counterfactual rerun.
pub struct ModuleRunner<'a> {
    pub runner: &'a PytestRunner,
    pub tree: &'a ProgramTree,
}

impl TestRunner for ModuleRunner<'_> {
    fn failing_tests(&self, source: &str) -> Result<BTreeSet<String>, RunnerError> {
        Ok(self.runner.run_tests(self.tree, source, false, &[])?.failing())
    }
}

/// pytest node id for a JUnit `classname`/`name` pair, resolving which
/// dotted prefix of `classname` is the test file under `root`.
fn node_id(classname: &str, name: &str, root: &Path) -> String {
    let parts: Vec<&str> = classname.split('.').collect();
    for split in (1..=parts.len()).rev() {
        let file = format!("{}.py", parts[..split].join("/"));
        if root.join(&file).is_file() {
            let mut id = file;
            for class in &parts[split..] {
                id.push_str("::");
                id.push_str(class);
            }
            id.push_str("::");
            id.push_str(name);
            return id;
        }
    }
    format!("{}::{name}", parts.join("/"))
}

fn resolve_entity(name: &str) -> Option<char> {
    match name {
        "lt" => Some('<'),
        "gt" => Some('>'),
        "amp" => Some('&'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        _ => {
            let n = name.strip_prefix('#')?;
            let code = match n.strip_prefix('x') {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => n.parse().ok()?,
            };
            char::from_u32(code)
        }
    }
}

pub(crate) fn parse_junit(xml: &str, root: &Path) -> Result<Vec<TestOutcome>, quick_xml::Error> {
    let mut reader = Reader::from_str(xml);
    let mut outcomes = Vec::new();
    let mut current: Option<TestOutcome> = None;
    let mut in_failure = false;
    let mut text = String::new();
    loop {
        match reader.read_event()? {
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == "testcase" => {
                let mut classname = String::new();
                let mut name = String::new();
                for a in e.attributes().flatten() {
                    let v = a.normalized_value(XmlVersion::Implicit1_0)?.into_owned();
                    match a.key.as_ref() {
                        "classname" => classname = v,
                        "name" => name = v,
                        _ => {}
                    }
                }
                let outcome = TestOutcome { test_id: node_id(&classname, &name, root), passed: true, message: None };
                if let Some(done) = current.replace(outcome) {
                    outcomes.push(done);
                }
            }
            Event::Start(e) | Event::Empty(e)
                if matches!(e.name().as_ref(), "failure" | "error") =>
            {
                if let Some(cur) = current.as_mut() {
                    cur.passed = false;
                    let message = e
                        .attributes()
                        .flatten()
                        .find(|a| a.key.as_ref() == "message")
                        .map(|a| a.normalized_value(XmlVersion::Implicit1_0).map(|v| v.into_owned()))
                        .transpose()?;
                    cur.message = message;
                    in_failure = true;
                    text.clear();
                }
            }
            Event::Text(t) if in_failure => text.push_str(&t.xml10_content()),
            Event::CData(t) if in_failure => text.push_str(t.as_ref()),
            Event::GeneralRef(r) if in_failure => {
                let name = r.as_ref().to_string();
                match resolve_entity(&name) {
                    Some(c) => text.push(c),
                    None => {
                        text.push('&');
                        text.push_str(&name);
                        text.push(';');
                    }
                }
            }
            Event::End(e) if matches!(e.name().as_ref(), "failure" | "error") => {
                in_failure = false;
                if let Some(cur) = current.as_mut() {
                    if !text.trim().is_empty() {
                        cur.message = Some(text.trim_end().to_string());
                    }
                }
            }
            Event::End(e) if e.name().as_ref() == "testcase" => {
                if let Some(done) = current.take() {
                    outcomes.push(done);
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(done) = current.take() {
        outcomes.push(done);
    }
    Ok(outcomes)
}
