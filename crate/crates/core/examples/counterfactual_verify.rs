//! Counterfactual verification with an in-process test runner: each ranked
//! constraint gets a one-line patch, the suite is rerun, and the change in
//! failing tests decides the constraint's causal role.
//!
//! `cargo run --example counterfactual_verify`

use std::collections::BTreeSet;
use std::error::Error;
use std::fmt::Write;

use cbfl::counterfactual::{final_ranking, verify, PatchGenerator, PatchRequest, RankedConstraint, RunnerError, TestRunner};
use cbfl::inference::InferenceError;
use cbfl::ir::{Anchor, Category, Constraint, Region};
use cbfl::records::{OutcomeRecord, Record};
use cbfl::spectrum::{build_matrix, RankedLine, Ranking};

const SOURCE: &str = "\
def clamp_sum(xs, hi):
    total = 0
    for x in xs:
        total += x
    capped = max(total, hi)
    return capped
";

/// Stands in for pytest: evaluates the three tests against the source text.
struct Suite;

impl TestRunner for Suite {
    fn failing_tests(&self, source: &str) -> Result<BTreeSet<String>, RunnerError> {
        let fixed = source.contains("min(total, hi)");
        let cases = [("t_small", true), ("t_over_1", fixed), ("t_over_2", fixed)];
        Ok(cases.iter().filter(|(_, ok)| !ok).map(|(t, _)| t.to_string()).collect())
    }
}

/// Proposes the same fix a model would for each targeted line.
struct Patcher;

impl PatchGenerator for Patcher {
    fn generate(&self, request: &PatchRequest) -> Result<String, InferenceError> {
        Ok(match request.line {
            5 => "capped = min(total, hi)".into(),
            other => request.full_source.lines().nth(other - 1).unwrap_or_default().trim().into(),
        })
    }
}

fn constraint(id: &str, region: Region, anchor: Anchor, expr: &str) -> Constraint {
    Constraint { id: id.into(), category: Category::Relation, region, anchor, expr: expr.into(), intent: String::new() }
}

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let outcome = |t: &str, passed| Record::Outcome(OutcomeRecord { test_id: t.into(), passed });
    let spectrum = build_matrix(&[outcome("t_small", true), outcome("t_over_1", false), outcome("t_over_2", false)], &[])?;
    let ranked = vec![
        RankedConstraint { constraint: constraint("K1", Region::AnyReturn, Anchor::default(), "result <= hi"), score: 1.0, line: 4 },
        RankedConstraint { constraint: constraint("K2", Region::AfterDef, Anchor::var("capped__1"), "capped__1 <= hi"), score: 1.0, line: 5 },
    ];
    let verdicts = verify(&ranked, SOURCE, &spectrum, &Suite, &Patcher)?;
    let fallback = Ranking::from_entries(vec![
        RankedLine { line: 4, score: 0.3, constraints: vec!["K1".into()] },
        RankedLine { line: 5, score: 1.0, constraints: vec!["K2".into()] },
    ]);
    let ranking = final_ranking(&verdicts, &fallback);

    let mut out = String::new();
    for v in &verdicts {
        writeln!(out, "{} line {:?}: {:?}, still failing {:?}", v.constraint_id, v.line, v.status, v.failing_after)?;
    }
    writeln!(out, "final ranking: {:?}", ranking.lines())?;
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
