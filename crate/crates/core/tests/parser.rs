mod common;

use proptest::prelude::*;
use zelig::script::{
    canonical_serialize, load_script, parse_script, Condition, Control, ItemKind, LoadError, NotpMode, ParseErrorKind,
};

#[test]
fn fixtures_round_trip() {
    for name in common::FIXTURES {
        let text = common::read(name);
        let doc = parse_script(&text).unwrap();
        let canon = canonical_serialize(&doc);
        let again = parse_script(&canon).unwrap_or_else(|e| panic!("{name}: {e}\n{canon}"));
        assert_eq!(again, doc, "{name}");
        assert_eq!(canonical_serialize(&again), canon, "{name}: serialization is not a fixed point");
    }
}

#[test]
fn comments_survive_round_trip() {
    let doc = parse_script(&common::read("drunk_keys.drama")).unwrap();
    let canon = canonical_serialize(&doc);
    for c in ["(After a while,)", "(ZELIG is not proactive enough)", "(until ZELIG gets tired)"] {
        assert!(canon.contains(c), "{c} lost:\n{canon}");
    }
}

#[test]
fn drunk_keys_structure() {
    let doc = common::drunk_keys();
    assert_eq!(doc.title, "The drunk and the keys");
    assert_eq!(doc.participant(), Some("ZELIG"));
    let scene = doc.scene("Sc1").unwrap();
    let ids: Vec<_> = scene.steps.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, ["SS1", "SS2", "SS3", "SS4"]);

    let ItemKind::Block(b) = &scene.step("SS1").unwrap().items[1].kind else { panic!() };
    assert_eq!(b.notp_mode, NotpMode::Immediate);
    assert!(
        matches!(&b.rules[0].condition, Condition::VariableTerm { variable, term } if variable == "surprise" && term == "surprised")
    );

    let ItemKind::Block(b) = &scene.step("SS3").unwrap().items[1].kind else { panic!() };
    let acts = &b.rules[0].consequence.actions;
    assert_eq!(acts.iter().filter(|a| a.bracketed).count(), 2);
    assert_eq!(acts.last().unwrap().action_id, "policeman-looks-keys");
    assert!(matches!(&b.rules[0].condition, Condition::State(f) if f.subject == "ZELIG" && f.predicate == "zone"));

    let ItemKind::Block(b) = &scene.step("SS4").unwrap().items[0].kind else { panic!() };
    assert_eq!(b.notp_mode, NotpMode::After(None));
    assert!(matches!(b.rules[1].condition, Condition::Timeout(15)));
    assert_eq!(b.notp.as_ref().unwrap().consequence.control, Control::Wait);
    assert!(matches!(scene.step("SS4").unwrap().items.last().unwrap().kind, ItemKind::End));

    // imported declarations follow the importer's own
    assert_eq!(doc.actions.last().unwrap().id, "C1");
    assert!(doc.matrix("table-reaction").is_some());
}

fn parse_err(src: &str) -> (ParseErrorKind, usize) {
    let e = parse_script(src).unwrap_err();
    (e.kind, e.line)
}

#[test]
fn errors_carry_kind_and_line() {
    assert_eq!(parse_err("ACTIONS\n  a BY x \"\"\nFROBNICATE\n").0, ParseErrorKind::UnknownKeyword);
    assert_eq!(parse_err("ACTIONS\n  a BY x \"\"\nFROBNICATE\n").1, 3);
    let (k, line) = parse_err("SCENE s\n  STEP a\n    IF SAYS ~x\n    NOTP THEN NEXT\n");
    assert_eq!((k, line), (ParseErrorKind::MalformedRule, 3));
    let (k, line) = parse_err("ACTIONS\n  a BY x \"unterminated\n");
    assert_eq!((k, line), (ParseErrorKind::Malformed, 2));
    let (k, line) = parse_err("ACTIONS\n  a BY x \"\" (open comment\n");
    assert_eq!((k, line), (ParseErrorKind::UnterminatedBlock, 2));
    let (k, _) = parse_err("ACTIONS\n  a BY x \"\"\n  a BY y \"\"\n");
    assert_eq!(k, ParseErrorKind::DuplicateId);
    let (k, line) = parse_err("ACTIONS\n      a BY x \"\"\n");
    assert_eq!((k, line), (ParseErrorKind::DanglingIndentation, 2));
}

#[test]
fn import_cycles_and_duplicates_are_load_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.drama"), "IMPORT \"b.drama\"\n").unwrap();
    std::fs::write(dir.path().join("b.drama"), "IMPORT \"a.drama\"\n").unwrap();
    assert!(matches!(load_script(dir.path().join("a.drama")), Err(LoadError::Cycle { .. })));

    std::fs::write(dir.path().join("c.drama"), "IMPORT \"d.drama\"\nACTIONS\n  x BY p \"\"\n").unwrap();
    std::fs::write(dir.path().join("d.drama"), "ACTIONS\n  x BY p \"\"\n").unwrap();
    assert!(matches!(load_script(dir.path().join("c.drama")), Err(LoadError::Duplicate { id, .. }) if id == "x"));

    assert!(matches!(load_script(dir.path().join("missing.drama")), Err(LoadError::Io { .. })));
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9]{0,6}(-[a-z0-9]{1,4})?"
}

fn description() -> impl Strategy<Value = String> {
    "[A-Za-z ,.'!?()\"\\\\]{0,30}"
}

/// Random but well-formed script text with actions, a variable, a lexicon and
/// one scene of rule blocks.
fn script() -> impl Strategy<Value = String> {
    (
        prop::collection::btree_set(ident(), 2..6),
        prop::collection::vec(description(), 6),
        prop::collection::vec((0.0..0.4f64, 0.1..0.3f64), 1..4),
        prop::collection::vec("[a-z]{1,6}( [a-z]{1,6}){0,3}", 1..4),
        prop::collection::vec((0usize..4, 0usize..3, any::<bool>()), 1..5),
    )
        .prop_map(|(ids, descs, terms, phrases, rules)| {
            let ids: Vec<_> = ids.into_iter().collect();
            let esc = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
            let mut out = String::from("TITLE \"random\"\nWORLD\n  CHARACTER p PARTICIPANT\n  CHARACTER q AT here\n  PROP lamp\n  FACT lamp.lit = true\n");
            out.push_str("ACTIONS\n");
            for (i, id) in ids.iter().enumerate() {
                let d = &descs[i % descs.len()];
                let fx = if i % 2 == 0 { " EFFECT lamp.lit = false" } else { "" };
                out.push_str(&format!("  {id} BY q \"{}\"{fx}\n", esc(d)));
            }
            out.push_str("VARS\n  VAR v \"a var\" DOMAIN 0 1\n");
            for (i, (a, w)) in terms.iter().enumerate() {
                out.push_str(&format!("    TERM t{i} {}:0 {}:1 {}:0\n", a, a + w, a + 2.0 * w));
            }
            out.push_str("LEXICON\n  INTENT ask\n");
            for p in &phrases {
                out.push_str(&format!("    \"{p}\"\n"));
            }
            out.push_str("    SYN hello hi\n");
            out.push_str("SCENE s\n  AMBIENT \"quiet\"\n  STEP one (first)\n");
            out.push_str(&format!("    DO {}\n", ids[0]));
            for (k, (cond, ctl, bracket)) in rules.iter().enumerate() {
                let cond = match cond {
                    0 => "SAYS ~ask".to_string(),
                    1 => format!("TIMEOUT {}", k + 2),
                    2 => format!("v IS t{}", k % terms.len()),
                    _ => "lamp.lit = true".to_string(),
                };
                let ctl = ["NEXT", "STAY", "GOTO two"][*ctl];
                let act = if *bracket { format!("[{}] {}", ids[1], ids[0]) } else { ids[1].clone() };
                out.push_str(&format!("    IF {cond} THEN {act} ; {ctl}\n"));
            }
            out.push_str("    NOTP AFTER 3 THEN NEXT\n  STEP two\n    END\n");
            out
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn canonical_form_round_trips(text in script()) {
        let doc = parse_script(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        let canon = canonical_serialize(&doc);
        let again = parse_script(&canon).map_err(|e| TestCaseError::fail(format!("{e}\n{canon}")))?;
        prop_assert_eq!(&again, &doc);
        prop_assert_eq!(canonical_serialize(&again), canon);
    }
}
