mod common;

use common::random_trace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::process::Command;
use std::time::{Duration, Instant};
use zelig::runtime::{
    parse_log, render_log, render_trace, ActionLogEntry, Cause, Event, RuntimeError, Status, END_ACTION,
};
use zelig::{run_trace, start_session, RuntimeConfig, SessionState};

const TRACES: [&str; 3] = ["proactive", "passive", "mixed"];

fn run(name: &str) -> SessionState {
    run_trace(&common::drunk_keys(), &common::trace(name), RuntimeConfig::default(), 0).unwrap()
}

fn actions(log: &[ActionLogEntry]) -> Vec<&str> {
    log.iter().map(|e| e.action.as_str()).collect()
}

fn find<'a>(log: &'a [ActionLogEntry], action: &str) -> Option<&'a ActionLogEntry> {
    log.iter().find(|e| e.action == action)
}

#[test]
fn traces_reproduce_golden_logs() {
    for name in TRACES {
        let start = Instant::now();
        let s = run(name);
        assert!(start.elapsed() < Duration::from_secs(1), "{name} took {:?}", start.elapsed());
        let got = render_log(&s.log_header(), &s.log);
        assert_eq!(got, common::read(&format!("{name}.golden.jsonl")), "{name}");
        assert_eq!(s.status, Status::Ended);
    }
}

#[test]
fn every_path_ends_with_the_streetlamp() {
    for name in TRACES {
        let s = run(name);
        let a = actions(&s.log);
        assert_eq!(&a[a.len() - 2..], ["streetlamp-off", END_ACTION], "{name}");
        assert!(!s.world.holds(&zelig::script::Fact::new("streetlamp", "lit", zelig::script::Value::Bool(true))));
        // the log opens with the ambient description and the first stated action
        assert!(matches!(s.log[0].cause, Cause::Ambient { .. }));
        assert_eq!(s.log[1].action, "drunk-searches");
    }
}

#[test]
fn passive_path_is_driven_by_notp_and_timeout() {
    let s = run("passive");
    let at = |a: &str| find(&s.log, a).map(|e| (e.t, e.cause.label()));
    // SS2 entered at t=1, SS3 at t=11, SS4 at t=21
    assert_eq!(at("policeman-appears"), Some((11, "notp")));
    assert_eq!(at("policeman-asks-drunk"), Some((11, "notp")));
    assert_eq!(at("policeman-asks-collaboration"), Some((21, "notp")));
    assert_eq!(at("policeman-asks-question"), Some((36, "rule")));
    assert_eq!(at("drunk-punchline"), Some((36, "rule")));
    assert!(s.log.iter().all(|e| !matches!(e.cause, Cause::Bracket { .. })));
}

#[test]
fn bracket_only_when_precondition_is_missing() {
    let pro = run("proactive");
    let e = find(&pro.log, "policeman-appears").unwrap();
    assert!(
        matches!(&e.cause, Cause::Bracket { needed_by, step, .. } if needed_by == "policeman-looks-keys" && step == "SS3")
    );
    assert_eq!(find(&pro.log, "policeman-observes").unwrap().cause.label(), "bracket");

    let mixed = run("mixed");
    assert!(mixed.log.iter().all(|e| !matches!(e.cause, Cause::Bracket { .. })));
    let keys = find(&mixed.log, "policeman-looks-keys").unwrap();
    assert_eq!((keys.t, keys.cause.label()), (15, "rule"));
    assert!(find(&mixed.log, "policeman-observes").is_none());
}

#[test]
fn wait_and_comment_rules_keep_the_step() {
    let s = run("mixed");
    assert_eq!(find(&s.log, "zelig-approaches").unwrap().t, 2);
    assert_eq!(find(&s.log, "drunk-comments").unwrap().t, 3);
    // the latency restarts after the comment at t=3
    assert_eq!(find(&s.log, "policeman-appears").unwrap().t, 13);
}

#[test]
fn empty_trace_below_latency_only_states() {
    let doc = common::drunk_keys();
    let config = RuntimeConfig { max_ticks: 5, ..RuntimeConfig::default() };
    let s = run_trace(&doc, &[], config, 0).unwrap();
    assert_eq!(actions(&s.log), ["ambient", "drunk-searches"]);
    assert_eq!(s.status, Status::Running);
}

#[test]
fn events_past_max_ticks_are_ignored() {
    let doc = common::drunk_keys();
    let config = RuntimeConfig { max_ticks: 5, ..RuntimeConfig::default() };
    let s = run_trace(&doc, &common::trace("passive"), config, 0).unwrap();
    assert_eq!(s.clock, 5);
    assert_eq!(s.step_id(), "SS2");
}

#[test]
fn stale_and_bad_events_leave_the_session_alone() {
    let doc = common::drunk_keys();
    let mut s = start_session(&doc, RuntimeConfig::default(), 0).unwrap();
    s.handle_event(&Event::tick(4)).unwrap();
    let before = s.clone();
    assert!(matches!(s.handle_event(&Event::tick(3)), Err(RuntimeError::StaleEvent { t: 3, clock: 4 })));
    assert!(matches!(s.handle_event(&Event::intensity(5, "boredom", 0.2)), Err(RuntimeError::UnknownVariable(_))));
    assert!(matches!(s.handle_event(&Event::intensity(5, "surprise", f64::NAN)), Err(RuntimeError::MalformedEvent(_))));
    assert!(matches!(s.handle_event(&Event::moved(5, "  ")), Err(RuntimeError::MalformedEvent(_))));
    assert_eq!(s, before);
}

#[test]
fn unmet_precondition_rolls_back() {
    let doc = zelig::parse_script(
        "WORLD\n  CHARACTER z PARTICIPANT\n  CHARACTER cop OFFSTAGE\nACTIONS\n  a BY cop \"\" REQUIRES cop.on_stage = true\n\
         SCENE s\n  STEP one\n    IF TIMEOUT 2 THEN a ; NEXT\n    NOTP AFTER 50 THEN STAY\n    END\n",
    )
    .unwrap();
    let mut s = start_session(&doc, RuntimeConfig::default(), 0).unwrap();
    s.handle_event(&Event::tick(1)).unwrap();
    let before = s.clone();
    let err = s.handle_event(&Event::tick(2)).unwrap_err();
    assert!(matches!(err, RuntimeError::UnmetPrecondition { ref action, .. } if action == "a"));
    assert_eq!(s, before);
}

#[test]
fn ended_session_rejects_events() {
    let mut s = run("proactive");
    assert_eq!(s.handle_event(&Event::tick(100)), Err(RuntimeError::SessionEnded));
}

#[test]
fn random_traces_replay_identically() {
    let doc = common::drunk_keys();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..100 {
        let trace = random_trace(&mut rng);
        let a = run_trace(&doc, &trace, RuntimeConfig::default(), i).unwrap();
        let b = run_trace(&doc, &trace, RuntimeConfig::default(), i).unwrap();
        assert_eq!(render_log(&a.log_header(), &a.log), render_log(&b.log_header(), &b.log));
        // incremental feeding is the same as a batch run
        let mut c = start_session(&doc, RuntimeConfig::default(), i).unwrap();
        for ev in &trace {
            if c.status == Status::Ended {
                break;
            }
            c.handle_event(ev).unwrap();
        }
        assert_eq!(c.log, a.log);
    }
}

#[test]
fn logs_and_traces_parse_back() {
    let s = run("mixed");
    let text = render_log(&s.log_header(), &s.log);
    let (header, entries) = parse_log(&text).unwrap();
    assert_eq!(header, s.log_header());
    assert_eq!(entries, s.log);
    let trace = common::trace("mixed");
    assert_eq!(zelig::runtime::parse_trace(&render_trace(&trace)).unwrap(), trace);
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_zelig")).args(args).output().unwrap()
}

fn path(name: &str) -> String {
    common::fixture(name).display().to_string()
}

#[test]
fn cli_validate_exit_codes() {
    let ok = cli(&["validate", &path("drunk_keys.drama")]);
    assert_eq!(ok.status.code(), Some(0));

    let s = common::Scratch::new();
    s.edit("drunk_keys.drama", |t| common::drop_line(t, "NOTP THEN WAIT (until ZELIG gets tired)"));
    let bad = cli(&["validate", &s.path("drunk_keys.drama").display().to_string()]);
    assert_eq!(bad.status.code(), Some(1));
    let records = String::from_utf8(bad.stdout).unwrap();
    assert!(records.lines().any(|l| l.starts_with("error\tMissingNotp\t")), "{records}");
    assert!(String::from_utf8(bad.stderr).unwrap().contains("MissingNotp"));

    let missing = cli(&["validate", "/definitely/not/here.drama"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8(missing.stderr).unwrap().contains("No such file"));
}

#[test]
fn cli_run_matches_goldens_and_is_repeatable() {
    for name in TRACES {
        let args = ["run", &path("drunk_keys.drama"), "--trace", &path(&format!("{name}.trace.jsonl"))];
        let a = cli(&args);
        let b = cli(&args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout);
        assert_eq!(String::from_utf8(a.stdout).unwrap(), common::read(&format!("{name}.golden.jsonl")));
        let golden = path(&format!("{name}.golden.jsonl"));
        let g = cli(&[&args[..], &["--golden", &golden]].concat());
        assert_eq!(g.status.code(), Some(0), "{}", String::from_utf8_lossy(&g.stderr));
    }
    let wrong = cli(&[
        "run",
        &path("drunk_keys.drama"),
        "--trace",
        &path("passive.trace.jsonl"),
        "--golden",
        &path("proactive.golden.jsonl"),
    ]);
    assert_eq!(wrong.status.code(), Some(4));
}

#[test]
fn cli_run_distinguishes_failures() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.drama");
    std::fs::write(
        &script,
        "WORLD\n  CHARACTER z PARTICIPANT\n  CHARACTER cop OFFSTAGE\nACTIONS\n  a BY cop \"\" REQUIRES cop.on_stage = true\n\
         SCENE s\n  STEP one\n    IF TIMEOUT 2 THEN a ; NEXT\n    NOTP AFTER 50 THEN STAY\n    END\n",
    )
    .unwrap();
    let trace = dir.path().join("t.jsonl");
    std::fs::write(&trace, "{\"t\":3,\"kind\":\"tick\"}\n").unwrap();
    let s = script.display().to_string();
    let t = trace.display().to_string();
    assert_eq!(cli(&["run", &s, "--trace", &t]).status.code(), Some(3));

    std::fs::write(&trace, "{\"t\":3,\"kind\":\"dance\"}\n").unwrap();
    assert_eq!(cli(&["run", &s, "--trace", &t]).status.code(), Some(2));

    std::fs::write(&script, "SCENE s\n  STEP one\n    IF TIMEOUT 2 THEN NEXT\n").unwrap();
    std::fs::write(&trace, "").unwrap();
    assert_eq!(cli(&["run", &s, "--trace", &t]).status.code(), Some(1));
}

#[test]
fn cli_flags_change_the_latency() {
    let out = cli(&["run", &path("drunk_keys.drama"), "--trace", &path("passive.trace.jsonl"), "--tau", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, log) = parse_log(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(header.tau_notp, 5);
    assert_eq!(find(&log, "policeman-appears").unwrap().t, 6);
}
