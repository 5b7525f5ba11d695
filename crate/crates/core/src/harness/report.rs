//! Machine-readable output of one localization run.

use serde::{Deserialize, Serialize};

use crate::counterfactual::CausalVerdict;
use crate::ir::{Constraint, GroundedCheck, Reject, Ungroundable};
use crate::records::Record;
use crate::spectrum::{ConstraintCells, Metrics, Ranking, Scorer};
use crate::ssa::{AnchorSite, DefEntry};

/// Per-constraint spectrum summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintScore {
    pub constraint_id: String,
    pub cells: ConstraintCells,
    pub score: f64,
    pub fires_on_passing: bool,
}

/// Every stage's intermediate artifacts, for debugging.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub anchors: Vec<AnchorSite>,
    pub ssa_text: String,
    pub def_map: Vec<DefEntry>,
    pub rendered_def_map: String,
    pub prompt_hash: String,
    pub raw_document: String,
    pub accepted: Vec<Constraint>,
    pub rejected: Vec<Reject>,
    pub grounded: Vec<GroundedCheck>,
    pub ungroundable: Vec<Ungroundable>,
    pub instrumented_text: String,
    /// Records as the shim wrote them, before mapping to site lines.
    pub records: Vec<Record>,
    pub tests: Vec<(String, bool)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub program: String,
    pub function: String,
    pub scorer: Scorer,
    /// The final ranking: verified when verification ran, otherwise the
    /// spectrum ranking.
    pub ranking: Ranking,
    pub pre_verification: Ranking,
    pub scores: Vec<ConstraintScore>,
    pub verdicts: Vec<CausalVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    pub warnings: Vec<String>,
    pub trace: Trace,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
