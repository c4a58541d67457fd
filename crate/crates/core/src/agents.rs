//! Simplified extended behavior networks for non-participant characters.
//!
//! Each character owns an isolated [`Network`] of competence modules and
//! goals. One synchronous cycle updates every activation as
//!
//! ```text
//! a <- beta * a + sum_g gamma * importance_g * relevance_g * match(a, g)
//!               - sum_g delta * conflict(a, g)
//! ```
//!
//! clamped to `[0, gamma / (1 - beta)]`. Selection picks the module with the
//! highest `activation * executability` at or above a threshold that decays
//! while nothing is selected. The layer is advisory: plot advancement stays
//! with the runtime's NOTP rules.

use crate::fuzzy::Degree;
use crate::script::{EffectDecl, Proposition, ScriptDoc};
use serde::{Deserialize, Serialize};

/// Label of the goal every character shares: advance the plot.
pub const PLOT_GOAL: &str = "plot";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub gamma: f64,
    pub delta: f64,
    pub beta: f64,
    pub theta_exec: f64,
    pub theta_decay: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self { gamma: 1.0, delta: 0.8, beta: 0.5, theta_exec: 0.5, theta_decay: 0.1 }
    }
}

impl NetworkParams {
    pub fn a_max(&self) -> f64 {
        self.gamma / (1.0 - self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Goal {
    pub id: String,
    pub condition: Proposition,
    pub importance: f64,
    pub relevance: f64,
}

impl Goal {
    pub fn plot(relevance: Degree) -> Self {
        Self { id: PLOT_GOAL.into(), condition: Proposition::Label(PLOT_GOAL.into()), importance: 1.0, relevance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetenceModule {
    pub id: String,
    pub character: String,
    pub preconditions: Vec<Proposition>,
    /// Actions performed when selected, in order.
    pub actions: Vec<String>,
    pub effects: Vec<EffectDecl>,
    /// Built from a NOTP consequence rather than declared by the author.
    pub plot: bool,
}

impl CompetenceModule {
    /// Min over precondition truths; 1 with no preconditions.
    pub fn executability(&self, truth: &dyn Fn(&Proposition) -> Degree) -> Degree {
        self.preconditions.iter().map(truth).fold(1.0, f64::min)
    }

    fn link(&self, goal: &Goal, negated: bool) -> f64 {
        self.effects
            .iter()
            .filter(|e| e.negated == negated && e.proposition == goal.condition)
            .map(|e| e.expectation)
            .fold(0.0, f64::max)
    }

    /// Expectation that this module makes the goal condition true.
    pub fn match_degree(&self, goal: &Goal) -> f64 {
        self.link(goal, false)
    }

    /// Expectation that this module makes the goal condition false.
    pub fn conflict_degree(&self, goal: &Goal) -> f64 {
        self.link(goal, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Network {
    pub character: String,
    pub modules: Vec<CompetenceModule>,
    pub goals: Vec<Goal>,
    pub activation: Vec<f64>,
    pub threshold: f64,
    pub params: NetworkParams,
}

impl Network {
    /// Empty network holding only the shared plot goal at relevance 0.
    pub fn new(character: impl Into<String>, params: NetworkParams) -> Self {
        Self {
            character: character.into(),
            modules: Vec::new(),
            goals: vec![Goal::plot(0.0)],
            activation: Vec::new(),
            threshold: params.theta_exec,
            params,
        }
    }

    /// Network for one character from the script's AGENTS section.
    pub fn from_script(doc: &ScriptDoc, character: &str, params: NetworkParams) -> Self {
        let mut net = Self::new(character, params);
        for g in doc.agents.goals.iter().filter(|g| g.character == character) {
            net.goals.push(Goal {
                id: g.id.clone(),
                condition: g.condition.clone(),
                importance: g.importance,
                relevance: g.relevance,
            });
        }
        for m in doc.agents.modules.iter().filter(|m| m.character == character) {
            net.add_module(CompetenceModule {
                id: m.id.clone(),
                character: character.to_string(),
                preconditions: m.preconditions.clone(),
                actions: vec![m.action_id.clone()],
                effects: m.effects.clone(),
                plot: false,
            });
        }
        net
    }

    pub fn add_module(&mut self, m: CompetenceModule) {
        self.modules.push(m);
        self.activation.push(0.0);
    }

    pub fn add_goal(&mut self, g: Goal) {
        self.goals.push(g);
    }

    pub fn plot_relevance(&self) -> Degree {
        self.goals.iter().find(|g| g.id == PLOT_GOAL).map_or(0.0, |g| g.relevance)
    }

    /// Sets the plot goal's relevance and swaps in the current plot modules.
    /// A plot module that survives the swap keeps its activation.
    pub fn set_plot(&mut self, relevance: Degree, modules: &[CompetenceModule]) {
        if let Some(g) = self.goals.iter_mut().find(|g| g.id == PLOT_GOAL) {
            g.relevance = relevance;
        }
        let mut kept_modules = Vec::new();
        let mut kept_activation = Vec::new();
        let mut old_plot = Vec::new();
        for (m, a) in self.modules.drain(..).zip(self.activation.drain(..)) {
            if m.plot {
                old_plot.push((m, a));
            } else {
                kept_modules.push(m);
                kept_activation.push(a);
            }
        }
        for m in modules.iter().filter(|m| m.character == self.character) {
            let a = old_plot.iter().find(|(o, _)| o == m).map_or(0.0, |(_, a)| *a);
            kept_modules.push(m.clone());
            kept_activation.push(a);
        }
        self.modules = kept_modules;
        self.activation = kept_activation;
    }

    /// One synchronous activation cycle.
    pub fn spread_activation(&mut self) {
        let p = self.params;
        let next: Vec<f64> = self
            .modules
            .iter()
            .zip(&self.activation)
            .map(|(m, &a)| {
                let excite: f64 =
                    self.goals.iter().map(|g| p.gamma * g.importance * g.relevance * m.match_degree(g)).sum();
                let inhibit: f64 = self.goals.iter().map(|g| p.delta * m.conflict_degree(g)).sum();
                (p.beta * a + excite - inhibit).clamp(0.0, p.a_max())
            })
            .collect();
        self.activation = next;
    }

    /// Index of the module maximizing `activation * executability`, if that
    /// product reaches the current threshold. Ties go to the first declared.
    /// Without a selection the threshold decays by `theta_decay`; after one it
    /// resets to `theta_exec`.
    pub fn select_behavior(&mut self, truth: &dyn Fn(&Proposition) -> Degree) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (m, a)) in self.modules.iter().zip(&self.activation).enumerate() {
            let score = a * m.executability(truth);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        match best {
            Some((i, score)) if score > 0.0 && score >= self.threshold => {
                self.threshold = self.params.theta_exec;
                Some(i)
            }
            _ => {
                self.threshold = (self.threshold - self.params.theta_decay).max(0.0);
                None
            }
        }
    }

    pub fn snapshot(&self, selected: Option<usize>, truth: &dyn Fn(&Proposition) -> Degree) -> AgentSnapshot {
        AgentSnapshot {
            character: self.character.clone(),
            threshold: self.threshold,
            plot_relevance: self.plot_relevance(),
            modules: self
                .modules
                .iter()
                .zip(&self.activation)
                .map(|(m, &a)| ModuleSnapshot {
                    id: m.id.clone(),
                    activation: a,
                    executability: m.executability(truth),
                    plot: m.plot,
                })
                .collect(),
            selected: selected.map(|i| self.modules[i].id.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleSnapshot {
    pub id: String,
    pub activation: f64,
    pub executability: f64,
    pub plot: bool,
}

/// Arbitration state of one character after a cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub character: String,
    pub threshold: f64,
    pub plot_relevance: f64,
    pub modules: Vec<ModuleSnapshot>,
    pub selected: Option<String>,
}

/// Plot goal relevance and plot modules for the current block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSync {
    pub relevance: Degree,
    pub modules: Vec<CompetenceModule>,
}

/// One network per non-participant character, in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentLayer {
    pub networks: Vec<Network>,
}

impl AgentLayer {
    pub fn from_script(doc: &ScriptDoc, participant: &str, params: NetworkParams) -> Self {
        let networks = doc
            .world
            .characters
            .iter()
            .filter(|c| c.id != participant)
            .map(|c| Network::from_script(doc, &c.id, params))
            .collect();
        Self { networks }
    }

    pub fn network(&self, character: &str) -> Option<&Network> {
        self.networks.iter().find(|n| n.character == character)
    }

    /// Syncs the plot goal, spreads one cycle and arbitrates every network.
    /// Returns the selected module index per network.
    pub fn cycle(&mut self, plot: &PlotSync, truth: &dyn Fn(&Proposition) -> Degree) -> Vec<Option<usize>> {
        self.networks
            .iter_mut()
            .map(|n| {
                n.set_plot(plot.relevance, &plot.modules);
                n.spread_activation();
                n.select_behavior(truth)
            })
            .collect()
    }
}
