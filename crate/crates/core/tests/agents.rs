mod common;

use common::agents::{notp_agreement, random_network, reference_step};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zelig::agents::{AgentLayer, NetworkParams};
use zelig::runtime::{Cause, Event};
use zelig::{start_session, RuntimeConfig};

#[test]
fn arbitration_agrees_with_notp_rule() {
    let (picked, logged) = notp_agreement("SS2").unwrap();
    assert_eq!(picked, logged);
    assert_eq!(picked, vec!["policeman-appears".to_string(), "policeman-asks-drunk".to_string()]);
}

#[test]
fn arbitration_agrees_on_later_steps() {
    // SS3's NOTP consequence brackets the entrance, so only the plain actions count
    let (picked, logged) = notp_agreement("SS3").unwrap();
    assert_eq!(picked, logged);
    assert_eq!(picked, vec!["policeman-joins-search".to_string(), "policeman-asks-collaboration".to_string()]);
}

#[test]
fn activations_stay_bounded_and_follow_the_update_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let mut net = random_network(&mut rng);
        let bound = net.params.a_max();
        for _ in 0..1000 {
            let want = reference_step(&net);
            net.spread_activation();
            for (a, w) in net.activation.iter().zip(&want) {
                assert!((a - w).abs() < 1e-12);
                assert!(*a >= 0.0 && *a <= bound + 1e-12, "{a} outside [0, {bound}]");
            }
        }
    }
}

#[test]
fn one_network_per_non_participant() {
    let doc = common::drunk_keys();
    let layer = AgentLayer::from_script(&doc, "ZELIG", NetworkParams::default());
    let names: Vec<_> = layer.networks.iter().map(|n| n.character.as_str()).collect();
    assert_eq!(names, ["drunk", "policeman", "angie"]);
    assert_eq!(layer.network("drunk").unwrap().modules.len(), 1);
}

#[test]
fn idle_behavior_is_logged_only_when_enabled() {
    let doc = common::drunk_keys();
    let trace: Vec<Event> = (1..=4).map(Event::tick).collect();
    let quiet = zelig::run_trace(&doc, &trace, RuntimeConfig::default(), 0).unwrap();
    assert!(quiet.log.iter().all(|e| !matches!(e.cause, Cause::Agent { .. })));
    let config = RuntimeConfig { agent_idle: true, ..RuntimeConfig::default() };
    let busy = zelig::run_trace(&doc, &trace, config, 0).unwrap();
    let idle: Vec<_> = busy.log.iter().filter(|e| matches!(e.cause, Cause::Agent { .. })).collect();
    assert!(!idle.is_empty());
    assert!(idle.iter().all(|e| e.action == "drunk-scans-floor"));
    // the offstage policeman cannot patrol
    assert!(busy.log.iter().all(|e| e.action != "policeman-patrols"));
}

#[test]
fn snapshots_follow_the_session() {
    let doc = common::drunk_keys();
    let mut s = start_session(&doc, RuntimeConfig::default(), 0).unwrap();
    s.handle_event(&Event::tick(1)).unwrap();
    let view = s.agent_view();
    assert_eq!(view.len(), 3);
    let cop = view.iter().find(|v| v.character == "policeman").unwrap();
    assert!(cop.modules.iter().any(|m| m.plot && m.id.starts_with("plot:Sc1/SS2/")));
    assert_eq!(cop.plot_relevance, s.rule_degrees().unwrap().notp);
}
