use serde::{Deserialize, Serialize};

use super::ConstraintCells;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scorer {
    #[default]
    Ochiai,
    Tarantula,
}

impl Scorer {
    pub fn score(self, cells: ConstraintCells, failing_total: usize, passing_total: usize) -> f64 {
        match self {
            Scorer::Ochiai => ochiai(cells, failing_total),
            Scorer::Tarantula => tarantula(cells, failing_total, passing_total),
        }
    }
}

impl std::str::FromStr for Scorer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ochiai" => Ok(Scorer::Ochiai),
            "tarantula" => Ok(Scorer::Tarantula),
            other => Err(format!("unknown scorer `{other}`")),
        }
    }
}

/// `ef / sqrt(F * (ef + ep))`, zero when `ef` is zero.
pub fn ochiai(cells: ConstraintCells, failing_total: usize) -> f64 {
    if cells.ef == 0 || failing_total == 0 {
        return 0.0;
    }
    let ef = cells.ef as f64;
    ef / (failing_total as f64 * (ef + cells.ep as f64)).sqrt()
}

/// `(ef/F) / ((ef/F) + (ep/P))`, with an empty total contributing zero and
/// `0/0` read as zero.
pub fn tarantula(cells: ConstraintCells, failing_total: usize, passing_total: usize) -> f64 {
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let f = ratio(cells.ef, failing_total);
    let p = ratio(cells.ep, passing_total);
    if f + p == 0.0 {
        0.0
    } else {
        f / (f + p)
    }
}
