mod common;

use std::path::Path;
use std::time::Duration;

use cbfl::harness::{
    self, bench, BackendSpec, BenchConfig, BenchError, EntryResult, LocalizeError, Mode,
    ProgramTree, PytestRunner, RunConfig, RunError, Stage,
};
use cbfl::inference::{infer_constraints, FixtureStore};
use cbfl::ir::validate_ir;
use cbfl::records::{read_jsonl, to_jsonl, Record};

macro_rules! require_python {
    () => {
        if !common::python_available() {
            eprintln!("python3 with pytest unavailable; skipping");
            return;
        }
    };
}

fn shim_runner() -> PytestRunner {
    PytestRunner { shim_dir: Some(common::shim_dir()), ..PytestRunner::default() }
}

fn entry_config(name: &str, mode: Mode) -> RunConfig {
    let entry = harness::load_entry(&common::corpus().join(name)).unwrap();
    let mut rc = RunConfig::new(entry.buggy(), entry.tests(), &entry.meta.function, entry.module());
    rc.mode = mode;
    rc.backend = BackendSpec::Replay { fixtures: entry.fixtures() };
    rc.runner = shim_runner();
    rc.ground_truth = Some(entry.meta.ground_truth_line);
    rc
}

fn softmax_tree() -> ProgramTree {
    ProgramTree { module: "softmax".into(), tests_dir: common::corpus().join("softmax/tests") }
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            if e.file_name() != "__pycache__" {
                copy_tree(&e.path(), &target);
            }
        } else {
            std::fs::copy(e.path(), target).unwrap();
        }
    }
}

#[test]
fn buggy_softmax_fails_two_of_four() {
    require_python!();
    let runner = PytestRunner::default();
    let buggy = runner
        .run_tests(&softmax_tree(), &read(common::corpus().join("softmax/buggy.py")), false, &[])
        .unwrap();
    assert_eq!(buggy.outcomes.len(), 4);
    let failing: Vec<String> = buggy.failing().into_iter().collect();
    assert_eq!(
        failing,
        vec![
            "tests/test_softmax.py::test_t3_large_is_distribution".to_string(),
            "tests/test_softmax.py::test_t4_huge_values".to_string(),
        ]
    );
    let failed = buggy.outcomes.iter().find(|o| !o.passed).unwrap();
    assert!(failed.message.as_deref().is_some_and(|m| !m.is_empty()));

    let reference = runner
        .run_tests(&softmax_tree(), &read(common::corpus().join("softmax/reference.py")), false, &[])
        .unwrap();
    assert!(reference.failing().is_empty());
    assert!(reference.records.is_empty());
}

#[test]
fn an_empty_test_directory_is_a_crash() {
    require_python!();
    let dir = tempfile::tempdir().unwrap();
    let tree = ProgramTree { module: "softmax".into(), tests_dir: dir.path().to_path_buf() };
    let err = PytestRunner::default()
        .run_tests(&tree, &read(common::corpus().join("softmax/buggy.py")), false, &[])
        .unwrap_err();
    assert!(matches!(err, RunError::HarnessCrash { status: Some(5), .. }), "{err}");
}

#[test]
fn slow_runs_time_out() {
    require_python!();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("test_slow.py"),
        "import time\n\nfrom slow import f\n\n\ndef test_slow():\n    time.sleep(30)\n    assert f() == 1\n",
    )
    .unwrap();
    let tree = ProgramTree { module: "slow".into(), tests_dir: dir.path().to_path_buf() };
    let runner = PytestRunner { timeout: Duration::from_millis(1500), ..PytestRunner::default() };
    let err = runner.run_tests(&tree, "def f():\n    return 1\n", false, &[]).unwrap_err();
    assert!(matches!(err, RunError::Timeout(_)), "{err}");
}

#[test]
fn missing_interpreter_is_reported() {
    let runner = PytestRunner { python: "definitely-not-a-python".into(), ..PytestRunner::default() };
    let err = runner.run_tests(&softmax_tree(), "def softmax(xs):\n    return xs\n", false, &[]).unwrap_err();
    assert!(matches!(err, RunError::InterpreterMissing(_)), "{err}");
}

#[test]
fn replay_returns_the_recorded_document() {
    require_python!();
    let rc = entry_config("softmax", Mode::Localize);
    let prepared = harness::prepare(&rc).unwrap();
    let backend = rc.backend.build().unwrap();
    let doc = infer_constraints(&prepared.prompt, &backend).unwrap();
    let v = validate_ir(&doc).unwrap();
    let ids: Vec<&str> = v.accepted.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids, vec!["C1", "C2", "C3", "C4"]);
    assert!(prepared.prompt.program_section.contains(&prepared.program.ssa_text[prepared.program.function_range.clone()]));
}

#[test]
fn live_shim_run_reproduces_the_recorded_stream() {
    require_python!();
    let report = harness::localize(&entry_config("softmax", Mode::SpectrumOnly)).unwrap();
    let records = &report.trace.records;
    let checks = records.iter().filter(|r| matches!(r, Record::Check(_))).count();
    let outcomes = records.iter().filter(|r| matches!(r, Record::Outcome(_))).count();
    assert_eq!((checks, outcomes), (16, 4));
    let committed = read_jsonl(common::corpus().join("softmax/records.jsonl")).unwrap();
    assert_eq!(to_jsonl(records), to_jsonl(&committed));
}

#[test]
fn recorded_and_live_spectra_agree() {
    require_python!();
    let live = harness::localize(&entry_config("softmax", Mode::SpectrumOnly)).unwrap();
    let mut rc = entry_config("softmax", Mode::SpectrumOnly);
    rc.records = Some(common::corpus().join("softmax/records.jsonl"));
    let recorded = harness::localize(&rc).unwrap();
    assert_eq!(live.pre_verification, recorded.pre_verification);
    assert_eq!(live.scores, recorded.scores);
}

#[test]
fn spectrum_only_matches_the_pre_verification_ranking() {
    require_python!();
    let mut full = entry_config("moving_average", Mode::Localize);
    full.records = Some(common::corpus().join("moving_average/records.jsonl"));
    let mut spectrum = full.clone();
    spectrum.mode = Mode::SpectrumOnly;
    let a = harness::localize(&full).unwrap();
    let b = harness::localize(&spectrum).unwrap();
    assert_eq!(a.pre_verification, b.pre_verification);
    assert_eq!(b.ranking, b.pre_verification);
    assert!(b.verdicts.is_empty());
}

#[test]
fn a_passing_program_has_nothing_to_localize() {
    require_python!();
    let mut rc = entry_config("softmax", Mode::Localize);
    rc.program = common::corpus().join("softmax/reference.py");
    assert!(matches!(harness::localize(&rc), Err(LocalizeError::NoFailingTests)));
}

#[test]
fn verify_only_needs_records() {
    let rc = entry_config("softmax", Mode::VerifyOnly);
    let err = harness::localize(&rc).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Config), "{err}");
}

#[test]
fn ungroundable_constraints_leave_an_empty_ranking() {
    require_python!();
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("fixtures.json");
    let mut rc = entry_config("softmax", Mode::Localize);
    let prepared = harness::prepare(&rc).unwrap();
    let ghost = r#"{"version": "cbfl-ir", "constraints": [
        {"id": "G1", "category": "VALUE_RANGE", "instrument": {"region": "AFTER_DEF", "anchor": {"var": "ghost__9"}},
         "spec": {"expr": "ghost__9 > 0"}, "intent": "absent"},
        {"id": "G2", "category": "INVARIANT_LOOP", "instrument": {"region": "LOOP_HEAD", "anchor": {"loop_id": 7}},
         "spec": {"expr": "True"}, "intent": "absent"}]}"#;
    FixtureStore::open(&fixtures).unwrap().insert(&prepared.prompt.hash(), ghost).unwrap();
    rc.backend = BackendSpec::Replay { fixtures };
    let report = harness::localize(&rc).unwrap();
    assert!(report.ranking.is_empty());
    assert!(report.trace.grounded.is_empty());
    assert_eq!(report.trace.ungroundable.len(), 2);
    assert!(report.warnings.iter().any(|w| w.contains("G1")), "{:?}", report.warnings);
    assert!(report.metrics.unwrap().rank.0.is_none());
}

#[test]
fn empty_corpus_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(bench(dir.path(), &BenchConfig::default()), Err(BenchError::EmptyCorpus(_))));
}

#[test]
fn entries_failing_the_sanity_gate_are_excluded() {
    require_python!();
    let dir = tempfile::tempdir().unwrap();
    copy_tree(&common::corpus().join("softmax"), &dir.path().join("a_softmax"));
    let broken = dir.path().join("b_broken");
    copy_tree(&common::corpus().join("softmax"), &broken);
    std::fs::copy(broken.join("buggy.py"), broken.join("reference.py")).unwrap();
    std::fs::create_dir_all(dir.path().join("c_no_meta")).unwrap();

    let config = BenchConfig {
        runner: shim_runner(),
        use_recorded: true,
        ..BenchConfig::default()
    };
    let report = bench(dir.path(), &config).unwrap();
    let names: Vec<&str> = report.rows.iter().map(|r| r.entry.as_str()).collect();
    assert_eq!(names, vec!["a_softmax", "b_broken", "c_no_meta"]);
    assert!(matches!(report.rows[0].result, EntryResult::Ok { .. }));
    assert!(matches!(report.rows[1].result, EntryResult::Invalid { .. }));
    assert!(matches!(report.rows[2].result, EntryResult::Invalid { .. }));
    assert_eq!(report.aggregate.programs, 1);
    assert_eq!(report.aggregate.acc1, 100.0);
}
