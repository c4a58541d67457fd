use rand::Rng;
use rand_chacha::ChaCha8Rng;
use zelig::agents::{CompetenceModule, Goal, Network, NetworkParams};
use zelig::fuzzy::DegreeVector;
use zelig::runtime::{Cause, Event};
use zelig::script::{EffectDecl, Proposition};
use zelig::{start_session, RuntimeConfig};

/// Enters `step` on the all-tick path, forces its NOTP degree to 1 and runs
/// agent cycles until some character picks the plot module. Returns that
/// module's actions next to the non-bracketed actions the runtime logs for
/// the step's NOTP rule.
pub fn notp_agreement(step: &str) -> Result<(Vec<String>, Vec<String>), String> {
    let doc = super::drunk_keys();
    let passive = super::trace("passive");
    let full = zelig::run_trace(&doc, &passive, RuntimeConfig::default(), 0).map_err(|e| e.to_string())?;
    let logged: Vec<String> = full
        .log
        .iter()
        .filter(|e| matches!(&e.cause, Cause::Notp { step: s, .. } if s == step))
        .map(|e| e.action.clone())
        .collect();

    let mut s = start_session(&doc, RuntimeConfig::default(), 0).map_err(|e| e.to_string())?;
    let mut t = 0;
    while s.step_id() != step {
        t += 1;
        s.handle_event(&Event::tick(t)).map_err(|e| e.to_string())?;
        if t > 100 {
            return Err(format!("never reached {step}"));
        }
    }
    let labels: Vec<(String, f64)> =
        s.rule_degrees().map(|d| d.degrees.iter().map(|(l, _)| (l.clone(), 0.0)).collect()).unwrap_or_default();
    s.set_rule_degrees(DegreeVector::from_degrees(format!("Sc1/{step}"), labels));
    let plot = zelig::runtime::sync_plot_goal(&s);
    if plot.relevance != 1.0 {
        return Err(format!("plot relevance {} after forcing NOTP", plot.relevance));
    }
    let world = s.world.clone();
    let truth = move |p: &Proposition| match p {
        Proposition::Fact(f) => f64::from(u8::from(world.holds(f))),
        Proposition::Label(_) => 0.0,
    };
    let mut layer = s.agents().clone();
    for _ in 0..20 {
        let picks = layer.cycle(&plot, &truth);
        for (net, pick) in layer.networks.iter().zip(picks) {
            if let Some(m) = pick.map(|i| &net.modules[i]).filter(|m| m.plot) {
                return Ok((m.actions.clone(), logged));
            }
        }
    }
    Err("no character selected the plot module".into())
}

pub fn random_network(rng: &mut ChaCha8Rng) -> Network {
    let params = NetworkParams {
        gamma: rng.gen_range(0.0..3.0),
        delta: rng.gen_range(0.0..3.0),
        beta: rng.gen_range(0.0..0.99),
        theta_exec: rng.gen_range(0.0..1.0),
        theta_decay: rng.gen_range(0.0..0.3),
    };
    let mut net = Network::new("c", params);
    let props: Vec<Proposition> = (0..4).map(|i| Proposition::Label(format!("p{i}"))).collect();
    net.goals[0].relevance = rng.gen_range(0.0..=1.0);
    for i in 0..rng.gen_range(0..4) {
        net.add_goal(Goal {
            id: format!("g{i}"),
            condition: props[rng.gen_range(0..props.len())].clone(),
            importance: rng.gen_range(0.0..=1.0),
            relevance: rng.gen_range(0.0..=1.0),
        });
    }
    for i in 0..rng.gen_range(1..7) {
        let mut effects = Vec::new();
        for _ in 0..rng.gen_range(0..4) {
            let proposition = if rng.gen_bool(0.2) {
                Proposition::Label("plot".into())
            } else {
                props[rng.gen_range(0..props.len())].clone()
            };
            effects.push(EffectDecl { proposition, negated: rng.gen_bool(0.3), expectation: rng.gen_range(0.0..=1.0) });
        }
        net.add_module(CompetenceModule {
            id: format!("m{i}"),
            character: "c".into(),
            preconditions: vec![],
            actions: vec![format!("a{i}")],
            effects,
            plot: false,
        });
    }
    for a in net.activation.iter_mut() {
        *a = rng.gen_range(0.0..=net.params.a_max());
    }
    net
}

/// The activation update written out from the effect lists directly.
pub fn reference_step(net: &Network) -> Vec<f64> {
    let p = net.params;
    net.modules
        .iter()
        .zip(&net.activation)
        .map(|(m, &a)| {
            let mut total = p.beta * a;
            for g in &net.goals {
                let mut excite: f64 = 0.0;
                let mut inhibit: f64 = 0.0;
                for e in m.effects.iter().filter(|e| e.proposition == g.condition) {
                    if e.negated {
                        inhibit = inhibit.max(e.expectation);
                    } else {
                        excite = excite.max(e.expectation);
                    }
                }
                total += p.gamma * g.importance * g.relevance * excite - p.delta * inhibit;
            }
            total.clamp(0.0, p.gamma / (1.0 - p.beta))
        })
        .collect()
}
