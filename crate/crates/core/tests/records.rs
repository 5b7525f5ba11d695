mod common;

use cbfl::instrument::instrument;
use cbfl::ir::{ground, validate_ir};
use cbfl::records::{map_to_site_lines, parse_jsonl, read_jsonl, to_jsonl, CheckRecord, OutcomeRecord, Record, RecordError, Verdict};
use cbfl::ssa::{to_ssa, SourceUnit};
use proptest::prelude::*;

fn record() -> impl Strategy<Value = Record> {
    let verdict = prop::sample::select(vec![Verdict::Violated, Verdict::Satisfied, Verdict::EvalError]);
    prop_oneof![
        ("[a-z_/.:]{1,20}", "[A-Za-z0-9\"\\\\ ]{1,6}", verdict, 1usize..500, prop::option::of("[ -~]{0,20}"), prop::option::of(0u64..99))
            .prop_map(|(test_id, cid, verdict, line, err, ts)| Record::Check(CheckRecord { test_id, cid, verdict, line, err, ts })),
        ("[a-z_/.:]{1,20}", any::<bool>()).prop_map(|(test_id, passed)| Record::Outcome(OutcomeRecord { test_id, passed })),
    ]
}

proptest! {
    #[test]
    fn jsonl_round_trips(records in prop::collection::vec(record(), 0..20)) {
        let text = to_jsonl(&records);
        prop_assert_eq!(text.lines().count(), records.len());
        prop_assert_eq!(parse_jsonl(&text).unwrap(), records);
    }
}

#[test]
fn malformed_lines_are_located() {
    let text = "{\"kind\":\"outcome\",\"test_id\":\"t\",\"passed\":true}\n\n{\"kind\":\"check\"}\n";
    match parse_jsonl(text) {
        Err(RecordError::Malformed { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn instrumented_lines_map_back_to_sites() {
    let unit = SourceUnit::from_file(common::corpus().join("softmax/buggy.py"), "softmax").unwrap();
    let ssa = to_ssa(&unit).unwrap();
    let text = std::fs::read_to_string(common::corpus().join("softmax/constraints.json")).unwrap();
    let g = ground(&validate_ir(&text).unwrap().accepted, &ssa);
    let program = instrument(&g.checks, &ssa).unwrap();
    let mut records = read_jsonl(common::corpus().join("softmax/records.jsonl")).unwrap();
    map_to_site_lines(&mut records, &program);
    let c3_lines: Vec<usize> = records
        .iter()
        .filter_map(|r| match r {
            Record::Check(c) if c.cid == "C3" => Some(c.line),
            _ => None,
        })
        .collect();
    assert_eq!(c3_lines, vec![5; 4]);
}
