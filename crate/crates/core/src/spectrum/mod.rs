//! The semantic violation spectrum: which constraints were violated in
//! which tests, and the suspiciousness derived from it.

mod attribute;
mod metrics;
mod score;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::{Record, Verdict};

pub use attribute::{attribute, RankedLine, Ranking};
pub use metrics::{median_rank, metrics, worst_case_rank, Metrics, Rank};
pub use score::{ochiai, tarantula, Scorer};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpectrumError {
    #[error("test `{0}` has check records but no outcome record")]
    MissingOutcome(String),
    #[error("test `{0}` has more than one outcome record")]
    DuplicateOutcome(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCells {
    /// Failing tests that violate the constraint.
    pub ef: usize,
    /// Passing tests that violate the constraint.
    pub ep: usize,
    pub nf: usize,
    pub np: usize,
}

impl ConstraintCells {
    pub fn failing_total(&self) -> usize {
        self.ef + self.nf
    }

    pub fn passing_total(&self) -> usize {
        self.ep + self.np
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumMatrix {
    /// `(test_id, passed)` in order of first appearance.
    pub tests: Vec<(String, bool)>,
    pub constraints: Vec<String>,
    /// `v[i][j]`: constraint `j` was violated at least once in test `i`.
    pub v: Vec<Vec<bool>>,
}

impl SpectrumMatrix {
    pub fn failing_tests(&self) -> impl Iterator<Item = &str> {
        self.tests.iter().filter(|(_, p)| !p).map(|(t, _)| t.as_str())
    }

    pub fn failing_count(&self) -> usize {
        self.tests.iter().filter(|(_, p)| !p).count()
    }

    pub fn passing_count(&self) -> usize {
        self.tests.len() - self.failing_count()
    }

    pub fn column(&self, cid: &str) -> Option<usize> {
        self.constraints.iter().position(|c| c == cid)
    }

    pub fn cells(&self, j: usize) -> ConstraintCells {
        let mut cells = ConstraintCells::default();
        for (i, (_, passed)) in self.tests.iter().enumerate() {
            match (*passed, self.v[i][j]) {
                (false, true) => cells.ef += 1,
                (true, true) => cells.ep += 1,
                (false, false) => cells.nf += 1,
                (true, false) => cells.np += 1,
            }
        }
        cells
    }

    /// Whether constraint `j` was violated in any passing test.
    pub fn fires_on_passing(&self, j: usize) -> bool {
        self.tests.iter().enumerate().any(|(i, (_, p))| *p && self.v[i][j])
    }

    /// Score every constraint, in column order.
    pub fn scores(&self, scorer: Scorer) -> Vec<(String, f64)> {
        let (f, p) = (self.failing_count(), self.passing_count());
        (0..self.constraints.len())
            .map(|j| (self.constraints[j].clone(), scorer.score(self.cells(j), f, p)))
            .collect()
    }
}

/// Build the matrix over `constraint_ids`, appending any further constraint
/// ids the records mention. Eval errors never mark a cell.
pub fn build_matrix(records: &[Record], constraint_ids: &[String]) -> Result<SpectrumMatrix, SpectrumError> {
    let mut constraints: Vec<String> = constraint_ids.to_vec();
    let mut col: HashMap<String, usize> =
        constraints.iter().enumerate().map(|(j, c)| (c.clone(), j)).collect();
    let mut order: Vec<String> = Vec::new();
    let mut outcome: HashMap<String, bool> = HashMap::new();
    let mut violated: HashMap<String, Vec<usize>> = HashMap::new();

    for r in records {
        let test = r.test_id();
        if !outcome.contains_key(test) && !violated.contains_key(test) {
            order.push(test.to_string());
        }
        match r {
            Record::Outcome(o) => {
                if outcome.insert(o.test_id.clone(), o.passed).is_some() {
                    return Err(SpectrumError::DuplicateOutcome(o.test_id.clone()));
                }
            }
            Record::Check(c) => {
                let j = *col.entry(c.cid.clone()).or_insert_with(|| {
                    constraints.push(c.cid.clone());
                    constraints.len() - 1
                });
                let cells = violated.entry(c.test_id.clone()).or_default();
                if c.verdict == Verdict::Violated {
                    cells.push(j);
                }
            }
        }
    }

    let n = constraints.len();
    let mut tests = Vec::with_capacity(order.len());
    let mut v = Vec::with_capacity(order.len());
    for t in order {
        let passed = *outcome.get(&t).ok_or_else(|| SpectrumError::MissingOutcome(t.clone()))?;
        let mut row = vec![false; n];
        for j in violated.get(&t).into_iter().flatten() {
            row[*j] = true;
        }
        tests.push((t, passed));
        v.push(row);
    }
    Ok(SpectrumMatrix { tests, constraints, v })
}
