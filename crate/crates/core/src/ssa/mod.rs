//! Anchor extraction and the executable light SSA form.
//!
//! The SSA form is ordinary Python: every local definition is renamed to a
//! versioned identifier `base__k`, augmented assignments are lowered,
//! if/else merge points get join assignments guarded by branch flags, and
//! every loop header carries a `# loop__id: N` comment. Variables assigned
//! inside a loop keep one version for the whole loop; a seed copy before the
//! loop carries the incoming value.

mod analyze;
mod anchors;
mod render;
mod scope;
mod transform;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::python;

pub use anchors::extract_anchors;
pub use render::render_def_map;
pub use transform::to_ssa;

pub(crate) use scope::visit_reads;

/// Prefix shared by every identifier the SSA pass introduces for branch flags.
pub const BRANCH_FLAG_PREFIX: &str = "__cbfl_b";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SsaError {
    #[error("{path}: syntax error at line {line}")]
    Parse { path: String, line: usize },
    #[error("{path}: no top-level function named `{name}`")]
    FunctionNotFound { path: String, name: String },
    #[error("unsupported construct `{kind}` at line {line}")]
    UnsupportedConstruct { kind: String, line: usize },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

/// One function of a source file, the unit every analysis operates on.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: PathBuf,
    pub text: String,
    pub function_name: String,
    pub function_byte_range: Range<usize>,
}

impl SourceUnit {
    /// Locate the top-level function `function_name` in `text`.
    pub fn new(
        path: impl Into<PathBuf>,
        text: impl Into<String>,
        function_name: &str,
    ) -> Result<Self, SsaError> {
        let path = path.into();
        let text = text.into();
        let tree = python::parse(&text);
        let root = tree.root_node();
        if let Some(err) = python::first_error(root) {
            return Err(SsaError::Parse {
                path: path.display().to_string(),
                line: err.start_position().row + 1,
            });
        }
        let range = find_function(root, &text, function_name).ok_or_else(|| {
            SsaError::FunctionNotFound {
                path: path.display().to_string(),
                name: function_name.to_string(),
            }
        })?;
        Ok(Self {
            path,
            text,
            function_name: function_name.to_string(),
            function_byte_range: range,
        })
    }

    pub fn from_file(path: impl AsRef<Path>, function_name: &str) -> Result<Self, SsaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SsaError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::new(path, text, function_name)
    }

    /// Source text of the function alone.
    pub fn function_text(&self) -> &str {
        &self.text[self.function_byte_range.clone()]
    }

    /// Text of 1-based line `line` of the whole file, without terminator.
    pub fn line_text(&self, line: usize) -> Option<&str> {
        self.text.lines().nth(line.checked_sub(1)?)
    }
}

pub(crate) fn find_function(
    root: tree_sitter::Node<'_>,
    text: &str,
    name: &str,
) -> Option<Range<usize>> {
    python::named_children(root).into_iter().find_map(|node| {
        let def = match node.kind() {
            "function_definition" => node,
            "decorated_definition" => node.child_by_field_name("definition")?,
            _ => return None,
        };
        if def.kind() != "function_definition" {
            return None;
        }
        let n = def.child_by_field_name("name")?;
        (python::text(n, text) == name).then(|| def.byte_range())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnchorFamily {
    FunctionEntry,
    ReturnSite,
    LoopHead,
    LoopTail,
    Definition,
    Use,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSite {
    pub family: AnchorFamily,
    pub byte_offset: usize,
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loop_id: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefKind {
    /// A plain or lowered augmented assignment in the source.
    Assignment,
    /// The target of a `for` header.
    ForTarget,
    /// A join inserted at an if/else merge point.
    Join,
}

/// Where a runtime check can be spliced into the SSA text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckSite {
    /// For `Before`, the start of the line to precede; for `After`, the
    /// offset of the terminator of the line to follow.
    pub offset: usize,
    pub indent: String,
    pub mode: SiteMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteMode {
    Before,
    After,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefEntry {
    pub ssa_name: String,
    pub base_name: String,
    pub version: u32,
    /// End of the defining statement's line in the original file.
    pub original_byte_offset: usize,
    pub original_line: usize,
    pub kind: DefKind,
    /// Where an after-definition check goes in the SSA text.
    pub site: CheckSite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopInfo {
    pub loop_id: u32,
    pub head_byte_offset: usize,
    pub tail_byte_offset: usize,
    /// Original line of the loop header.
    pub header_line: usize,
    pub head_site: CheckSite,
    pub tail_site: CheckSite,
    /// Original lines of every statement in the body.
    pub body_lines: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnSite {
    /// Span of the `return` statement in the SSA text.
    pub span: Range<usize>,
    pub indent: String,
    pub line: usize,
    /// SSA names read by the returned expression.
    pub reads: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseSite {
    pub site: CheckSite,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchMerge {
    pub start_line: usize,
    pub end_line: usize,
    /// After the conditional and its join assignments.
    pub site: CheckSite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsaProgram {
    /// The whole file with the target function rewritten.
    pub ssa_text: String,
    pub function_name: String,
    /// Span of the rewritten function inside `ssa_text`.
    pub function_range: Range<usize>,
    pub params: Vec<String>,
    pub def_map: Vec<DefEntry>,
    pub loop_ids: Vec<LoopInfo>,
    /// Original line for each SSA line (index 0 is SSA line 1); `None` for
    /// lines the transformation inserted.
    pub line_origins: Vec<Option<usize>>,
    pub entry_site: CheckSite,
    /// Original line of the first body statement.
    pub entry_line: usize,
    pub returns: Vec<ReturnSite>,
    pub uses: BTreeMap<String, Vec<UseSite>>,
    pub merges: Vec<BranchMerge>,
    /// Where a check "at the end of original line L" goes.
    pub line_sites: BTreeMap<usize, CheckSite>,
    /// SSA names read by the statements defining each SSA name.
    pub def_reads: BTreeMap<String, BTreeSet<String>>,
    /// Original lines of the statements defining each SSA name.
    pub def_lines: BTreeMap<String, BTreeSet<usize>>,
    /// Original lines holding a statement of the function body.
    pub executable_lines: BTreeSet<usize>,
}

impl SsaProgram {
    pub fn function_text(&self) -> &str {
        &self.ssa_text[self.function_range.clone()]
    }

    pub fn def_entry(&self, ssa_name: &str) -> Option<&DefEntry> {
        self.def_map.iter().find(|d| d.ssa_name == ssa_name)
    }

    pub fn loop_info(&self, loop_id: u32) -> Option<&LoopInfo> {
        self.loop_ids.iter().find(|l| l.loop_id == loop_id)
    }

    /// Original lines of every statement in the backward def-use slice of
    /// the given SSA names, following join and seed copies transitively.
    pub fn backward_slice(&self, roots: &BTreeSet<String>) -> BTreeSet<usize> {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut stack: Vec<&str> = roots.iter().map(String::as_str).collect();
        let mut lines = BTreeSet::new();
        while let Some(name) = stack.pop() {
            if !seen.insert(name) {
                continue;
            }
            if let Some(ls) = self.def_lines.get(name) {
                lines.extend(ls.iter().copied());
            }
            if let Some(reads) = self.def_reads.get(name) {
                stack.extend(reads.iter().map(String::as_str));
            }
        }
        lines
    }
}

/// Split `name` into `(base, version)` when it has the `base__k` shape.
pub fn split_ssa_name(name: &str) -> Option<(&str, u32)> {
    let (base, version) = name.rsplit_once("__")?;
    if base.is_empty() || version.is_empty() || version.starts_with('0') {
        return None;
    }
    let version: u32 = version.parse().ok()?;
    let first = base.chars().next()?;
    if !(first.is_alphabetic() || first == '_') {
        return None;
    }
    base.chars()
        .all(|c| c.is_alphanumeric() || c == '_')
        .then_some((base, version))
}
