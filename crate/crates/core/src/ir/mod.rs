//! The closed constraint representation: categories, regions, anchors,
//! schema validation, expression safety and grounding onto SSA sites.

mod ground;
mod safety;
mod validate;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ssa::CheckSite;

pub use ground::{ground, GroundedCheck, Grounding, Ungroundable};
pub use safety::{check_expr_safety, SafetyViolation, ALLOWED_CALLS, RESULT_NAME};
pub use validate::{validate_ir, IrError, Reject, RejectReason, Validated};

/// Version tag every constraint document carries.
pub const DOCUMENT_VERSION: &str = "cbfl-ir";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Precondition,
    Postcondition,
    ValueRange,
    Relation,
    DerivedConsistency,
    InvariantLoop,
    TemporalCallSnapshot,
    TemporalUntilOverwritten,
    TemporalResourceLifetime,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::Precondition,
        Category::Postcondition,
        Category::ValueRange,
        Category::Relation,
        Category::DerivedConsistency,
        Category::InvariantLoop,
        Category::TemporalCallSnapshot,
        Category::TemporalUntilOverwritten,
        Category::TemporalResourceLifetime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Precondition => "PRECONDITION",
            Category::Postcondition => "POSTCONDITION",
            Category::ValueRange => "VALUE_RANGE",
            Category::Relation => "RELATION",
            Category::DerivedConsistency => "DERIVED_CONSISTENCY",
            Category::InvariantLoop => "INVARIANT_LOOP",
            Category::TemporalCallSnapshot => "TEMPORAL_CALL_SNAPSHOT",
            Category::TemporalUntilOverwritten => "TEMPORAL_UNTIL_OVERWRITTEN",
            Category::TemporalResourceLifetime => "TEMPORAL_RESOURCE_LIFETIME",
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == label)
    }

    pub fn is_temporal(self) -> bool {
        matches!(
            self,
            Category::TemporalCallSnapshot
                | Category::TemporalUntilOverwritten
                | Category::TemporalResourceLifetime
        )
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    Entry,
    AnyReturn,
    AfterDef,
    BeforeUse,
    LoopHead,
    LoopTail,
    AfterBranch,
    Line,
}

impl Region {
    pub const ALL: [Region; 8] = [
        Region::Entry,
        Region::AnyReturn,
        Region::AfterDef,
        Region::BeforeUse,
        Region::LoopHead,
        Region::LoopTail,
        Region::AfterBranch,
        Region::Line,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Entry => "ENTRY",
            Region::AnyReturn => "ANY_RETURN",
            Region::AfterDef => "AFTER_DEF",
            Region::BeforeUse => "BEFORE_USE",
            Region::LoopHead => "LOOP_HEAD",
            Region::LoopTail => "LOOP_TAIL",
            Region::AfterBranch => "AFTER_BRANCH",
            Region::Line => "LINE",
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == label)
    }

    /// Granularity weight applied to a constraint's score before the
    /// per-statement maximum.
    pub fn weight(self) -> f64 {
        match self {
            Region::Line => 0.6,
            Region::AfterDef => 1.0,
            Region::AfterBranch => 1.0,
            Region::BeforeUse => 1.0,
            Region::LoopTail => 0.9,
            Region::AnyReturn => 0.3,
            Region::Entry => 1.0,
            Region::LoopHead => 0.9,
        }
    }

    /// The single anchor field this region requires, if any.
    pub fn anchor_field(self) -> Option<&'static str> {
        match self {
            Region::AfterDef | Region::BeforeUse => Some("var"),
            Region::LoopHead | Region::LoopTail => Some("loop_id"),
            Region::Line | Region::AfterBranch => Some("line"),
            Region::Entry | Region::AnyReturn => None,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl Anchor {
    pub fn var(name: impl Into<String>) -> Self {
        Self { var: Some(name.into()), ..Self::default() }
    }

    pub fn loop_id(id: u32) -> Self {
        Self { loop_id: Some(id), ..Self::default() }
    }

    pub fn line(line: usize) -> Self {
        Self { line: Some(line), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub id: String,
    pub category: Category,
    pub region: Region,
    pub anchor: Anchor,
    pub expr: String,
    pub intent: String,
}

impl Constraint {
    /// This constraint as one element of a document's `constraints` array.
    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "category": self.category,
            "instrument": {"region": self.region, "anchor": self.anchor},
            "spec": {"expr": self.expr},
            "intent": self.intent,
        })
    }
}

/// Render constraints as a complete document that `validate_ir` accepts.
pub fn to_document(constraints: &[Constraint]) -> String {
    let doc = json!({
        "version": DOCUMENT_VERSION,
        "constraints": constraints.iter().map(Constraint::to_json).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&doc).expect("values serialize")
}

/// Where a grounded check is placed in the SSA text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    /// A check line inserted at a site.
    Site(CheckSite),
    /// The return statement at `span` is rewritten to bind `result`.
    Return { span: Range<usize>, indent: String },
}

impl Placement {
    pub fn offset(&self) -> usize {
        match self {
            Placement::Site(s) => s.offset,
            Placement::Return { span, .. } => span.start,
        }
    }
}

/// Lines a check's score is attributed to.
pub type LineSet = BTreeSet<usize>;
