mod common;

use std::collections::{BTreeMap, BTreeSet};

use cbfl::python;
use cbfl::ssa::{
    extract_anchors, render_def_map, split_ssa_name, to_ssa, AnchorFamily, SourceUnit, SsaError,
};
use proptest::prelude::*;

fn unit(src: &str, name: &str) -> SourceUnit {
    SourceUnit::new("subject.py", src, name).expect("fixture parses")
}

fn softmax() -> SourceUnit {
    SourceUnit::from_file(common::corpus().join("softmax/buggy.py"), "softmax").unwrap()
}

fn families(src: &str) -> BTreeSet<(AnchorFamily, Option<String>)> {
    extract_anchors(&unit(src, "f"))
        .unwrap()
        .into_iter()
        .map(|a| (a.family, a.variable))
        .collect()
}

#[test]
fn anchors_of_copy_function() {
    let got = families("def f(a):\n    b = a\n    return b\n");
    let want: BTreeSet<_> = [
        (AnchorFamily::FunctionEntry, None),
        (AnchorFamily::Definition, Some("b".to_string())),
        (AnchorFamily::Use, Some("a".to_string())),
        (AnchorFamily::Use, Some("b".to_string())),
        (AnchorFamily::ReturnSite, None),
    ]
    .into_iter()
    .collect();
    assert_eq!(got, want);
}

#[test]
fn pass_body_has_only_the_entry() {
    let anchors = extract_anchors(&unit("def f():\n    pass\n", "f")).unwrap();
    assert_eq!(anchors.len(), 1);
    assert_eq!(anchors[0].family, AnchorFamily::FunctionEntry);
}

#[test]
fn softmax_definitions_sit_on_their_lines() {
    let anchors = extract_anchors(&softmax()).unwrap();
    let def_line = |v: &str| {
        anchors
            .iter()
            .find(|a| a.family == AnchorFamily::Definition && a.variable.as_deref() == Some(v))
            .map(|a| a.line)
    };
    assert_eq!(def_line("m"), Some(4));
    assert_eq!(def_line("shifted"), Some(5));
}

#[test]
fn augmented_assignment_is_lowered() {
    let ssa = to_ssa(&unit("def f():\n    x = 1\n    x += 2\n    return x\n", "f")).unwrap();
    assert!(ssa.ssa_text.contains("x__1 = 1"), "{}", ssa.ssa_text);
    assert!(ssa.ssa_text.contains("x__2 = x__1 + 2"), "{}", ssa.ssa_text);
    assert!(ssa.ssa_text.contains("return x__2"), "{}", ssa.ssa_text);
}

#[test]
fn rendered_def_map_lists_offsets() {
    let ssa = to_ssa(&softmax()).unwrap();
    let rendered = render_def_map(&ssa);
    assert!(rendered.contains("# shifted__1 -> 'shifted' (byte 99)"), "{rendered}");
    assert!(rendered.contains("# m__1 -> 'm' (byte 65)"), "{rendered}");

    let empty = to_ssa(&unit("def f():\n    pass\n", "f")).unwrap();
    assert_eq!(render_def_map(&empty), "");
}

#[test]
fn unsupported_constructs_are_refused() {
    let files = common::python_files(&common::fixtures().join("unsupported"));
    assert_eq!(files.len(), 5);
    for path in files {
        let u = SourceUnit::from_file(&path, "f").unwrap();
        match to_ssa(&u) {
            Err(SsaError::UnsupportedConstruct { .. }) => {}
            other => panic!("{}: {other:?}", path.display()),
        }
    }
}

#[test]
fn loop_ids_cover_every_loop() {
    let src = "def f(n):\n    t = 0\n    for i in range(n):\n        j = 0\n        while j < i:\n            t += j\n            j += 1\n    return t\n";
    let ssa = to_ssa(&unit(src, "f")).unwrap();
    let ids: Vec<u32> = ssa.loop_ids.iter().map(|l| l.loop_id).collect();
    assert_eq!(ids, vec![1, 2]);
    assert_eq!(ssa.loop_info(1).unwrap().header_line, 3);
    assert_eq!(ssa.loop_info(2).unwrap().header_line, 5);
    for l in &ssa.loop_ids {
        assert!(l.head_byte_offset < l.tail_byte_offset);
        assert!(ssa.function_range.contains(&l.head_byte_offset));
    }
}

#[test]
fn ssa_equivalence_fixtures_keep_behaviour() {
    if !common::python_available() {
        eprintln!("python3 with pytest unavailable; skipping");
        return;
    }
    for path in common::python_files(&common::fixtures().join("ssa_equivalence")) {
        let u = SourceUnit::from_file(&path, "f").unwrap();
        let ssa = to_ssa(&u).unwrap();
        let before = common::run_driver(&u.text, false).unwrap();
        let after = common::run_driver(&ssa.ssa_text, false).unwrap();
        assert_eq!(before.outcomes, after.outcomes, "{}", path.display());
    }
}

// Random straight-line, branching and looping programs over a fixed
// variable pool. Every variable is initialised first so reads are defined.

const VARS: [&str; 3] = ["a", "b", "c"];

fn atom() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["a", "b", "c", "x", "y"]).prop_map(str::to_string),
        (-3i32..4).prop_map(|k| k.to_string()),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    (atom(), prop::sample::select(vec!["+", "-", "*"]), atom())
        .prop_map(|(l, op, r)| format!("{l} {op} {r}"))
}

#[derive(Debug, Clone)]
enum Stmt {
    Assign(usize, String),
    Aug(usize, String),
    If(String, Vec<Stmt>, Vec<Stmt>),
    For(Vec<Stmt>),
}

fn stmt(loops: bool) -> impl Strategy<Value = Stmt> {
    let leaf = prop_oneof![
        (0..VARS.len(), expr()).prop_map(|(v, e)| Stmt::Assign(v, e)),
        (0..VARS.len(), atom()).prop_map(|(v, e)| Stmt::Aug(v, e)),
    ];
    leaf.prop_recursive(3, 16, 3, move |inner| {
        let branch = (
            expr(),
            prop::collection::vec(inner.clone(), 1..3),
            prop::collection::vec(inner.clone(), 0..3),
        )
            .prop_map(|(c, t, e)| Stmt::If(c, t, e));
        let looped = prop::collection::vec(inner, 1..3).prop_map(Stmt::For);
        // Weight zero removes loops while keeping one strategy type.
        prop_oneof![2 => branch, (loops as u32) => looped]
    })
}

fn emit(stmts: &[Stmt], depth: usize, loops: &mut usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    for s in stmts {
        match s {
            Stmt::Assign(v, e) => out.push_str(&format!("{pad}{} = {e}\n", VARS[*v])),
            Stmt::Aug(v, e) => out.push_str(&format!("{pad}{} += {e}\n", VARS[*v])),
            Stmt::If(c, t, e) => {
                out.push_str(&format!("{pad}if {c} > 0:\n"));
                emit(t, depth + 1, loops, out);
                if !e.is_empty() {
                    out.push_str(&format!("{pad}else:\n"));
                    emit(e, depth + 1, loops, out);
                }
            }
            Stmt::For(body) => {
                *loops += 1;
                out.push_str(&format!("{pad}for i{} in range(abs(x) % 3):\n", *loops));
                emit(body, depth + 1, loops, out);
            }
        }
    }
}

fn program() -> impl Strategy<Value = String> {
    program_with(true)
}

fn loop_free_program() -> impl Strategy<Value = String> {
    program_with(false)
}

fn program_with(loops: bool) -> impl Strategy<Value = String> {
    prop::collection::vec(stmt(loops), 1..6).prop_map(|body| {
        let mut text = String::from("def f(x, y):\n    a = x\n    b = y\n    c = 0\n");
        let mut loops = 0;
        emit(&body, 1, &mut loops, &mut text);
        text.push_str("    return (a, b, c)\n");
        text.push_str("\nINPUTS = [(1, 2), (-3, 5), (0, 0), (4, -1)]\n");
        text
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_ssa_name_is_assigned_once(src in program()) {
        let ssa = to_ssa(&unit(&src, "f")).unwrap();
        let mut seen = BTreeSet::new();
        let mut versions: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
        for d in &ssa.def_map {
            prop_assert!(seen.insert(d.ssa_name.clone()), "{} twice", d.ssa_name);
            let (base, k) = split_ssa_name(&d.ssa_name).unwrap();
            prop_assert_eq!(base, d.base_name.as_str());
            prop_assert_eq!(k, d.version);
            versions.entry(base).or_default().push(k);
        }
        for (base, mut ks) in versions {
            ks.sort_unstable();
            let want: Vec<u32> = (1..=ks.len() as u32).collect();
            prop_assert_eq!(ks, want, "versions of {} are not dense", base);
        }
    }

    #[test]
    fn ssa_text_parses_and_maps_lines(src in program()) {
        let ssa = to_ssa(&unit(&src, "f")).unwrap();
        let tree = python::parse(&ssa.ssa_text);
        prop_assert!(!tree.root_node().has_error(), "{}", ssa.ssa_text);
        prop_assert_eq!(ssa.line_origins.len(), python::LineIndex::new(&ssa.ssa_text).line_count());
        let original_lines = src.lines().count();
        for origin in ssa.line_origins.iter().flatten() {
            prop_assert!(*origin >= 1 && *origin <= original_lines);
        }
    }

    #[test]
    fn loop_ids_are_dense_and_resolvable(src in program()) {
        let ssa = to_ssa(&unit(&src, "f")).unwrap();
        let loops = src.lines().filter(|l| l.trim_start().starts_with("for ")).count();
        prop_assert_eq!(ssa.loop_ids.len(), loops);
        for (i, l) in ssa.loop_ids.iter().enumerate() {
            prop_assert_eq!(l.loop_id, i as u32 + 1);
            prop_assert_eq!(ssa.loop_info(l.loop_id).map(|x| x.header_line), Some(l.header_line));
        }
    }

    #[test]
    fn definitions_in_source_have_anchors(src in program()) {
        let u = unit(&src, "f");
        let ssa = to_ssa(&u).unwrap();
        let anchors = extract_anchors(&u).unwrap();
        let anchored: BTreeSet<(String, usize)> = anchors
            .iter()
            .filter(|a| a.family == AnchorFamily::Definition)
            .map(|a| (a.variable.clone().unwrap(), a.line))
            .collect();
        for d in ssa.def_map.iter().filter(|d| d.kind == cbfl::ssa::DefKind::Assignment) {
            prop_assert!(
                anchored.contains(&(d.base_name.clone(), d.original_line)),
                "{} at line {} has no anchor", d.base_name, d.original_line
            );
        }
    }

    #[test]
    fn ssa_names_round_trip(base in "[a-z_][a-z0-9_]{0,8}", k in 1u32..10_000) {
        prop_assume!(!base.ends_with('_'));
        let name = format!("{base}__{k}");
        prop_assert_eq!(split_ssa_name(&name), Some((base.as_str(), k)));
    }
}

/// Assignment targets of the function body in text order, as (base, version).
fn assignment_targets(ssa_function: &str) -> Vec<(String, u32)> {
    ssa_function
        .lines()
        .filter_map(|l| {
            let (lhs, _) = l.trim_start().split_once(" = ")?;
            let (base, k) = split_ssa_name(lhs.trim())?;
            Some((base.to_string(), k))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn versions_count_up_in_text_order(src in loop_free_program()) {
        let ssa = to_ssa(&unit(&src, "f")).unwrap();
        let mut next: BTreeMap<String, u32> = BTreeMap::new();
        for (base, k) in assignment_targets(ssa.function_text()) {
            let want = next.entry(base.clone()).or_insert(1);
            prop_assert_eq!(k, *want, "{} out of order in\n{}", base, ssa.ssa_text);
            *want += 1;
        }
    }

    #[test]
    fn definition_anchors_match_the_def_map(src in loop_free_program()) {
        let u = unit(&src, "f");
        let ssa = to_ssa(&u).unwrap();
        let anchors = extract_anchors(&u).unwrap();
        let defs = anchors.iter().filter(|a| a.family == AnchorFamily::Definition).count();
        let source_defs = ssa.def_map.iter().filter(|d| d.kind != cbfl::ssa::DefKind::Join).count();
        prop_assert_eq!(defs, source_defs);
    }

    #[test]
    fn loop_comments_round_trip(src in program()) {
        let ssa = to_ssa(&unit(&src, "f")).unwrap();
        let marked: Vec<(u32, usize)> = ssa
            .ssa_text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let id = l.split_once("# loop__id: ")?.1.trim().parse().ok()?;
                Some((id, ssa.line_origins[i]?))
            })
            .collect();
        let listed: Vec<(u32, usize)> = ssa.loop_ids.iter().map(|l| (l.loop_id, l.header_line)).collect();
        prop_assert_eq!(marked, listed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_programs_keep_behaviour(src in program()) {
        if !common::python_available() {
            return Ok(());
        }
        let ssa = to_ssa(&unit(&src, "f")).unwrap();
        let before = common::run_driver(&src, false).unwrap();
        let after = common::run_driver(&ssa.ssa_text, false).unwrap();
        prop_assert_eq!(before.outcomes, after.outcomes, "{}\n---\n{}", src, ssa.ssa_text);
    }
}
