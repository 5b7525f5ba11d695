use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ir::GroundedCheck;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLine {
    pub line: usize,
    pub score: f64,
    /// Constraints with a positive contribution to this line, by id.
    pub constraints: Vec<String>,
}

/// Lines by non-increasing score; equal scores are ordered by line. Only
/// lines with a positive score appear.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ranking {
    pub entries: Vec<RankedLine>,
}

impl Ranking {
    /// Sort into canonical order, dropping non-positive scores.
    pub fn from_entries(mut entries: Vec<RankedLine>) -> Self {
        entries.retain(|e| e.score > 0.0);
        entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.line.cmp(&b.line)));
        Self { entries }
    }

    pub fn lines(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.line).collect()
    }

    pub fn score_of(&self, line: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.line == line).map(|e| e.score)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rankings serialize")
    }
}

/// Propagate each constraint's score, times its region weight, to the lines
/// its checks attribute to; a line keeps the maximum it receives.
pub fn attribute(checks: &[GroundedCheck], scores: &BTreeMap<String, f64>) -> Ranking {
    let mut lines: BTreeMap<usize, (f64, Vec<String>)> = BTreeMap::new();
    for c in checks {
        let sigma = scores.get(&c.constraint_id).copied().unwrap_or(0.0);
        let s = sigma * c.region_weight;
        if s <= 0.0 {
            continue;
        }
        for &line in &c.attributed_lines {
            let (best, ids) = lines.entry(line).or_insert((0.0, Vec::new()));
            if s > *best {
                *best = s;
            }
            if !ids.contains(&c.constraint_id) {
                ids.push(c.constraint_id.clone());
            }
        }
    }
    Ranking::from_entries(
        lines
            .into_iter()
            .map(|(line, (score, mut constraints))| {
                constraints.sort();
                RankedLine { line, score, constraints }
            })
            .collect(),
    )
}
