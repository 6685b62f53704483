use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use super::*;
use crate::ast::{parse_source, NodeKind};
use crate::dataflow::{check_du_consistency, UnitKind};
use crate::oracle::OracleConfig;

fn script(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("test.sh");
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn runner(dir: &Path, body: &str) -> OracleRunner {
    OracleRunner::new(OracleConfig::new(script(dir, body))).unwrap()
}

const TWO_FUNCS: &str = "\
int counter = 0;
int limit = 10;
int helper(int a) {
    counter = counter + a;
    return a * 2;
}
int main() {
    helper(3);
    return 0;
}
";

#[test]
fn level_zero_units_of_two_function_program() {
    let ast = parse_source(TWO_FUNCS).unwrap();
    let units = propose_units(&ast, 0);
    let top = &ast.node(ast.root()).children;
    let stmts: Vec<NodeId> = ast
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::ExprStmt)
        .map(|n| n.id)
        .collect();
    // helper drags its call site; counter drags the statement writing it;
    // limit stands alone.
    assert_eq!(units.len(), 3);
    assert_eq!(units[0].roots, vec![top[2], stmts[1]]);
    assert_eq!(units[0].kind, UnitKind::Function);
    assert_eq!(units[1].roots, vec![top[0], stmts[0]]);
    assert_eq!(units[1].kind, UnitKind::GlobalVar);
    assert_eq!(units[2].roots, vec![top[1]]);
    assert_eq!(units.iter().map(|u| u.id).collect::<Vec<_>>(), vec![0, 1, 2]);
}

#[test]
fn level_beyond_tree_height_is_empty() {
    let ast = parse_source(TWO_FUNCS).unwrap();
    assert!(propose_units(&ast, 9).is_empty());
    assert!(raw_units(&ast, 9).is_empty());
}

#[test]
fn global_read_by_main_drags_the_reading_statement() {
    let ast = parse_source("int g = 1;\nint main() { return g; }").unwrap();
    let units = propose_units(&ast, 0);
    assert_eq!(units.len(), 1);
    assert_eq!(units[0].roots.len(), 2);
    assert_eq!(propose_units(&ast, 1).len(), 1);
    assert!(propose_units(&ast, 0)
        .iter()
        .all(|u| !u.nodes.contains(&ast.main_function().unwrap())));
}

#[test]
fn uncalled_helper_is_removed() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = runner(dir.path(), "grep -q 'return 0' \"$1\"");
    let ast = parse_source("int helper(int a) { return a + 1; }\nint main() { return 0; }").unwrap();
    let mut reducer = Reducer::new(&oracle, Mode::HddDu, 1);
    let mut state = ReductionState::new(ast);
    let stats = reducer.hdd_pass(&mut state, &mut SizeOrder).unwrap();
    assert_eq!(unparse(&state.ast).unwrap(), "int main() {\n    return 0;\n}\n");
    assert_eq!(stats.commits, 1);
    assert_eq!(state.accepted_units[0].kind, UnitKind::Function);
}

#[test]
fn oracle_requiring_everything_keeps_everything() {
    let dir = tempfile::tempdir().unwrap();
    let ast = parse_source(TWO_FUNCS).unwrap();
    let original = unparse(&ast).unwrap();
    fs::write(dir.path().join("want.c"), &original).unwrap();
    let want = dir.path().join("want.c");
    let oracle = runner(dir.path(), &format!("cmp -s \"$1\" '{}'", want.display()));
    for mode in Mode::ALL {
        let mut reducer = Reducer::new(&oracle, mode, 2);
        let mut state = ReductionState::new(ast.clone());
        let stats = reducer.hdd_pass(&mut state, &mut SizeOrder).unwrap();
        assert_eq!(stats.commits, 0, "{mode}");
        assert_eq!(unparse(&state.ast).unwrap(), original);
    }
}

#[test]
fn failing_start_state_is_a_precondition_error() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = runner(dir.path(), "exit 1");
    let ast = parse_source(TWO_FUNCS).unwrap();
    let mut reducer = Reducer::new(&oracle, Mode::Rl, 1);
    let err = reducer
        .hdd_pass(&mut ReductionState::new(ast), &mut SizeOrder)
        .unwrap_err();
    assert!(matches!(err, ReducerError::PreconditionFailed));
}

#[test]
fn du_modes_never_submit_dangling_programs() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = runner(dir.path(), "grep -q 'helper' \"$1\"");
    let ast = parse_source(TWO_FUNCS).unwrap();
    let mut reducer = Reducer::new(&oracle, Mode::HddDu, 1);
    let mut state = ReductionState::new(ast.clone());
    let stats = reducer.hdd_pass(&mut state, &mut SizeOrder).unwrap();
    assert!(stats.commits > 0);
    let mut attempts = 0;
    for e in &reducer.trace().events {
        if e.event == TraceKind::Attempt && e.verdict != Some(TraceVerdict::Rejected) {
            attempts += 1;
            let cand = ast.with_deleted_unchecked(e.deleted.iter().copied());
            assert!(check_du_consistency(&cand).is_empty());
            assert_eq!(e.digest.as_deref(), Some(crate::oracle::digest(&unparse(&cand).unwrap()).as_str()));
        }
    }
    assert!(attempts > 0);
    assert!(check_du_consistency(&state.ast).is_empty());
}

#[test]
fn pass_accounts_for_every_oracle_call() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = runner(dir.path(), "grep -q 'counter' \"$1\"");
    let ast = parse_source(TWO_FUNCS).unwrap();
    let mut reducer = Reducer::new(&oracle, Mode::Rl, 3);
    let mut state = ReductionState::new(ast);
    let mut calls = 0;
    loop {
        let before = state.ast.retained_tokens();
        let stats = reducer.hdd_pass(&mut state, &mut SizeOrder).unwrap();
        calls += stats.oracle_calls;
        assert!(state.ast.retained_tokens() <= before);
        if stats.commits == 0 {
            break;
        }
    }
    assert_eq!(calls, oracle.stats().invocations);
    let report = verify_one_du_minimality(&state.ast, &oracle, 1).unwrap();
    assert!(report.minimal, "{:?}", report.witnesses);
}

#[test]
fn removable_unit_is_a_minimality_witness() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = runner(dir.path(), "grep -q 'return 0' \"$1\"");
    let ast = parse_source("int spare = 4;\nint main() { return 0; }").unwrap();
    let report = verify_one_du_minimality(&ast, &oracle, 1).unwrap();
    assert!(!report.minimal);
    assert_eq!(report.witnesses.len(), 1);
    assert_eq!(report.witnesses[0].kind, UnitKind::GlobalVar);
}

#[test]
fn program_without_units_is_vacuously_minimal() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = runner(dir.path(), "exit 0");
    let ast = parse_source("int main() { }").unwrap();
    let report = verify_one_du_minimality(&ast, &oracle, 1).unwrap();
    assert!(report.minimal);
    assert_eq!(report.units_checked, 0);
}

#[test]
fn flat_mode_may_submit_dangling_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = runner(dir.path(), "exit 0");
    let ast = parse_source("int main() { int x = 1; int y = x; return y; }").unwrap();
    let mut reducer = Reducer::new(&oracle, Mode::Ddmin, 1);
    let mut state = ReductionState::new(ast);
    reducer.hdd_pass(&mut state, &mut SizeOrder).unwrap();
    assert_eq!(unparse(&state.ast).unwrap(), "int main() {\n}\n");
}

#[test]
fn mode_names_round_trip() {
    for m in Mode::ALL {
        assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
    }
    assert!("fast".parse::<Mode>().is_err());
}
