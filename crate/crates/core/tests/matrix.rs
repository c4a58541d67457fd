mod common;

use std::collections::BTreeSet;
use zelig::fuzzy::{fuzzify, Axis, DegreeVector};
use zelig::matrix::{apply_overrides, evaluate_matrix, select_actions, ActionSet};
use zelig::runtime::{Cause, Event};
use zelig::{start_session, RuntimeConfig};

/// The reaction table as published, rows then columns, NOTP last on both axes.
const TABLE: &str = "\
A1 & B1 | A1 & B2 | A1 & B3.1 | A1
A2 & B1 | A2 & B2 | A2 & B3 | A2
A3 & B1 | A3 & B2 | A3 & B3 | A3
C1 & B1 | C1 & B2 | C1 & B3 | C1 & A1";

const ROWS: [&str; 4] = ["very-angry", "not-very-angry", "slightly-angry", "NOTP"];
const COLS: [&str; 4] = ["turns", "walks", "runs", "NOTP"];

fn expected() -> Vec<Vec<BTreeSet<String>>> {
    TABLE
        .lines()
        .map(|l| l.split('|').map(|c| c.split('&').map(|a| a.trim().to_string()).collect()).collect())
        .collect()
}

fn set(a: &ActionSet) -> BTreeSet<String> {
    a.iter().map(String::from).collect()
}

#[test]
fn crisp_inputs_reproduce_every_cell() {
    let doc = common::example3();
    let m = doc.matrix("table-reaction").unwrap();
    let (anger, approach) = (doc.variable("anger").unwrap(), doc.variable("approach").unwrap());
    let want = expected();
    for (i, r) in ROWS.iter().enumerate() {
        for (j, c) in COLS.iter().enumerate() {
            let rv = DegreeVector::one_hot(anger, &Axis::parse(r));
            let cv = DegreeVector::one_hot(approach, &Axis::parse(c));
            let cells = evaluate_matrix(m, &rv, &cv).unwrap();
            let got = apply_overrides(&select_actions(&cells, 0.5), &doc.incompatibilities, |_| true);
            assert_eq!(set(&got), want[i][j], "({r}, {c})");
        }
    }
}

#[test]
fn plateau_inputs_pick_the_same_cells() {
    // the middle of each term's plateau is crisp for that term
    let doc = common::example3();
    let m = doc.matrix("table-reaction").unwrap();
    let (anger, approach) = (doc.variable("anger").unwrap(), doc.variable("approach").unwrap());
    let xs = [0.875, 0.525, 0.225, 0.0];
    let ys = [0.225, 0.525, 0.875, 0.0];
    let want = expected();
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            let cells = evaluate_matrix(m, &fuzzify(anger, *x), &fuzzify(approach, *y)).unwrap();
            assert_eq!(set(&select_actions(&cells, 0.5)), want[i][j]);
        }
    }
}

#[test]
fn override_replaces_the_blocked_reaction() {
    let doc = zelig::parse_script(
        "ACTIONS\n  A1 BY a \"\"\n  B3 BY b \"\"\n  B3.1 BY b \"\"\nINCOMPAT A1 B3 OVERRIDE B3.1\n",
    )
    .unwrap();
    let raw: ActionSet = ["A1", "B3"].into_iter().collect();
    let got = apply_overrides(&raw, &doc.incompatibilities, |_| true);
    assert_eq!(got.sorted(), vec!["A1".to_string(), "B3.1".to_string()]);
    let untouched: ActionSet = ["A2", "B3"].into_iter().collect();
    assert_eq!(apply_overrides(&untouched, &doc.incompatibilities, |_| true), untouched);
}

#[test]
fn blended_input_fires_neighbouring_cells() {
    let doc = common::example3();
    let m = doc.matrix("table-reaction").unwrap();
    let (anger, approach) = (doc.variable("anger").unwrap(), doc.variable("approach").unwrap());
    let pick = |x: f64| {
        let cells = evaluate_matrix(m, &fuzzify(anger, x), &fuzzify(approach, 0.875)).unwrap();
        set(&select_actions(&cells, 0.5))
    };
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    // slightly 1/3, not-very 2/3, NOTP 1/3
    assert_eq!(pick(0.4), names(&["A2", "B3"]));
    // slightly, not-very and NOTP all tie at 1/2
    assert_eq!(pick(0.375), names(&["A2", "A3", "B3", "C1"]));
}

#[test]
fn runtime_logs_matrix_reactions() {
    let doc = zelig::load_script(common::fixture("angie.drama")).unwrap();
    let mut s = start_session(&doc, RuntimeConfig::default(), 0).unwrap();
    let entries = s.handle_event(&Event::intensity(1, "anger", 0.9)).unwrap();
    // approach is still silent: the NOTP column fires
    assert_eq!(entries.iter().map(|e| e.action.as_str()).collect::<Vec<_>>(), ["A1"]);
    let entries = s.handle_event(&Event::intensity(2, "approach", 0.9)).unwrap();
    let actions: Vec<_> = entries.iter().map(|e| e.action.as_str()).collect();
    assert_eq!(actions, ["A1", "B3.1"]);
    for e in &entries {
        match &e.cause {
            Cause::Matrix { matrix, row, col, score } => {
                assert_eq!(matrix, "table-reaction");
                assert_eq!((row.as_str(), col.as_str()), ("very-angry", "runs"));
                assert_eq!(*score, 1.0);
            }
            other => panic!("unexpected cause {other:?}"),
        }
        assert_eq!(e.degrees.len(), 2);
    }
}
