mod common;

use cbfl::instrument::{apply_edits, instrument, plan_edits, Edit, InstrumentError, CHECK_MARKER};
use cbfl::ir::{ground, validate_ir, Anchor, Category, Constraint, Region};
use cbfl::python;
use cbfl::ssa::{to_ssa, SourceUnit, SsaProgram};
use proptest::prelude::*;

fn softmax_ssa() -> SsaProgram {
    to_ssa(&SourceUnit::from_file(common::corpus().join("softmax/buggy.py"), "softmax").unwrap()).unwrap()
}

fn softmax_constraints() -> Vec<Constraint> {
    let text = std::fs::read_to_string(common::corpus().join("softmax/constraints.json")).unwrap();
    validate_ir(&text).unwrap().accepted
}

fn after_def(id: &str, var: &str, expr: &str) -> Constraint {
    Constraint {
        id: id.into(),
        category: Category::ValueRange,
        region: Region::AfterDef,
        anchor: Anchor::var(var),
        expr: expr.into(),
        intent: String::new(),
    }
}

#[test]
fn after_def_check_follows_the_definition() {
    let ssa = softmax_ssa();
    let c3 = after_def("c3", "shifted__1", "all(v <= 0 for v in shifted__1)");
    let g = ground(&[c3], &ssa);
    let edits = plan_edits(&g.checks, &ssa).unwrap();
    assert_eq!(edits.len(), 1);
    let call = r#"__cbfl.check("c3", lambda: all(v <= 0 for v in shifted__1))"#;
    assert!(edits[0].replacement.contains(call), "{:?}", edits[0].replacement);

    let program = instrument(&g.checks, &ssa).unwrap();
    let lines: Vec<&str> = program.text.lines().collect();
    let at = lines.iter().position(|l| l.contains(call)).unwrap();
    assert!(lines[at - 1].trim_start().starts_with("shifted__1 = "), "{}", program.text);
    assert_eq!(program.site_line(at + 1), Some(5));
}

#[test]
fn no_checks_leave_the_text_alone() {
    let ssa = softmax_ssa();
    assert!(plan_edits(&[], &ssa).unwrap().is_empty());
    assert_eq!(instrument(&[], &ssa).unwrap().text, ssa.ssa_text);
}

#[test]
fn checks_on_one_definition_stack() {
    let ssa = softmax_ssa();
    let g = ground(&[after_def("a", "m__1", "m__1 == m__1"), after_def("b", "m__1", "True")], &ssa);
    let program = instrument(&g.checks, &ssa).unwrap();
    let ids: Vec<&str> = program.check_index.values().map(|e| e.constraint_id.as_str()).collect();
    assert_eq!(ids, vec!["a", "b"]);
    let lines: Vec<usize> = program.check_index.keys().copied().collect();
    assert_eq!(lines[1], lines[0] + 1);
}

#[test]
fn all_softmax_checks_parse_and_strip() {
    let ssa = softmax_ssa();
    let g = ground(&softmax_constraints(), &ssa);
    // ANY_RETURN covers both the early and the final return.
    assert_eq!(g.checks.len(), 5);
    let program = instrument(&g.checks, &ssa).unwrap();
    assert!(!python::parse(&program.text).root_node().has_error());
    assert!(program.text.starts_with("import cbfl_runtime as __cbfl\n"));
    assert!(program.text.contains("result = [e / s__1 for e in exps__1]"));
    assert_eq!(program.text.matches(CHECK_MARKER).count(), 5);
    assert_eq!(program.strip(), ssa.ssa_text);
}

#[test]
fn edit_at_end_concatenates() {
    let p = apply_edits("abc", &[Edit::new(3..3, "def")]).unwrap();
    assert_eq!(p.text, "abcdef");
}

#[test]
fn overlapping_edits_are_refused() {
    let err = apply_edits("0123456789", &[Edit::new(1..4, "x"), Edit::new(3..3, "y")]).unwrap_err();
    assert!(matches!(err, InstrumentError::Overlap { .. }));
}

/// Splice every edit into a fresh buffer in one left-to-right pass.
fn splice_oracle(text: &str, edits: &[Edit]) -> String {
    let mut sorted: Vec<&Edit> = edits.iter().collect();
    sorted.sort_by_key(|e| (e.byte_range.start, e.byte_range.end));
    let mut out = String::new();
    let mut cursor = 0;
    for e in sorted {
        out.push_str(&text[cursor..e.byte_range.start]);
        out.push_str(&e.replacement);
        cursor = e.byte_range.end;
    }
    out.push_str(&text[cursor..]);
    out
}

fn disjoint_edits() -> impl Strategy<Value = (String, Vec<Edit>)> {
    ("[a-z \n]{1,60}", prop::collection::vec((0usize..6, 0usize..4, "[A-Z]{0,5}"), 0..8)).prop_map(
        |(text, raw)| {
            let mut edits = Vec::new();
            let mut pos = 0;
            for (gap, len, rep) in raw {
                let start = pos + gap;
                let end = start + len;
                if end > text.len() {
                    break;
                }
                edits.push(Edit::new(start..end, rep));
                // Keep a one-byte gap so zero-width edits never share an offset.
                pos = end + 1;
            }
            (text, edits)
        },
    )
}

proptest! {
    #[test]
    fn application_matches_simultaneous_splice((text, edits) in disjoint_edits(), seed in any::<u64>()) {
        let want = splice_oracle(&text, &edits);
        let mut shuffled = edits.clone();
        let n = shuffled.len();
        if n > 1 {
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
        }
        let a = apply_edits(&text, &edits).unwrap();
        let b = apply_edits(&text, &shuffled).unwrap();
        prop_assert_eq!(&a.text, &want);
        prop_assert_eq!(&b.text, &want);
        prop_assert_eq!(a.strip(), text);
    }

    #[test]
    fn instrumentation_is_reversible(file in 0usize..24, mask in prop::collection::vec(any::<bool>(), 1..32)) {
        let mut files = common::python_files(&common::fixtures().join("ssa_equivalence"));
        files.push(common::corpus().join("moving_average/buggy.py"));
        let path = &files[file % files.len()];
        let name = if path.ends_with("buggy.py") { "moving_average" } else { "f" };
        let ssa = to_ssa(&SourceUnit::from_file(path, name).unwrap()).unwrap();
        let chosen: Vec<Constraint> = common::always_true_constraints(&ssa)
            .into_iter()
            .zip(mask.iter().cycle())
            .filter(|(_, keep)| **keep)
            .map(|(c, _)| c)
            .collect();
        let g = ground(&chosen, &ssa);
        let program = instrument(&g.checks, &ssa).unwrap();
        prop_assert!(!python::parse(&program.text).root_node().has_error(), "{}", program.text);
        prop_assert_eq!(program.strip(), ssa.ssa_text.clone());
        prop_assert_eq!(program.check_index.len(), g.checks.len());
    }
}
