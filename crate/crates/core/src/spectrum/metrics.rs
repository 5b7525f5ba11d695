use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Ranking;

/// A worst-case rank; `None` when the line is not ranked at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rank(pub Option<usize>);

impl Rank {
    pub fn within(self, k: usize) -> bool {
        matches!(self.0, Some(r) if r <= k)
    }

    fn as_f64(self) -> f64 {
        self.0.map_or(f64::INFINITY, |r| r as f64)
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(r) => write!(f, "{r}"),
            None => f.write_str("inf"),
        }
    }
}

/// Position of `truth` when it is placed after every line with an equal
/// score.
pub fn worst_case_rank(ranking: &Ranking, truth: usize) -> Rank {
    let Some(score) = ranking.score_of(truth) else {
        return Rank(None);
    };
    Rank(Some(ranking.entries.iter().filter(|e| e.score >= score).count()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc1: bool,
    pub acc3: bool,
    pub acc5: bool,
    /// Fraction of executable lines with a positive score.
    pub pct_susp: f64,
    pub rank: Rank,
}

pub fn metrics(ranking: &Ranking, truth: usize, executable_lines: &BTreeSet<usize>) -> Metrics {
    let rank = worst_case_rank(ranking, truth);
    let flagged = ranking.entries.iter().filter(|e| e.score > 0.0).count();
    let pct_susp = if executable_lines.is_empty() {
        0.0
    } else {
        flagged as f64 / executable_lines.len() as f64
    };
    Metrics {
        acc1: rank.within(1),
        acc3: rank.within(3),
        acc5: rank.within(5),
        pct_susp,
        rank,
    }
}

/// Median of worst-case ranks; an even count averages the middle pair, and
/// an unranked value in the pair makes the median unranked.
pub fn median_rank(ranks: &[Rank]) -> Option<f64> {
    if ranks.is_empty() {
        return None;
    }
    let mut sorted: Vec<f64> = ranks.iter().map(|r| r.as_f64()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::super::RankedLine;
    use super::*;

    fn ranking(pairs: &[(usize, f64)]) -> Ranking {
        Ranking::from_entries(
            pairs.iter().map(|&(line, score)| RankedLine { line, score, constraints: vec![] }).collect(),
        )
    }

    #[test]
    fn ties_rank_the_truth_last() {
        let r = ranking(&[(5, 1.0), (3, 1.0), (8, 0.5)]);
        let m = metrics(&r, 3, &BTreeSet::from([1, 2, 3, 4, 5, 8]));
        assert_eq!(m.rank, Rank(Some(2)));
        assert!(!m.acc1 && m.acc3 && m.acc5);
        assert_eq!(worst_case_rank(&r, 8), Rank(Some(3)));
        assert_eq!(worst_case_rank(&r, 4), Rank(None));
        assert_eq!(r.lines(), vec![3, 5, 8]);
    }

    #[test]
    fn medians() {
        assert_eq!(median_rank(&[]), None);
        assert_eq!(median_rank(&[Rank(Some(3)), Rank(Some(1)), Rank(None)]), Some(3.0));
        assert_eq!(median_rank(&[Rank(Some(3)), Rank(Some(1))]), Some(2.0));
        assert_eq!(median_rank(&[Rank(Some(3)), Rank(None)]), Some(f64::INFINITY));
    }
}
