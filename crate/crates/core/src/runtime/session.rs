use super::event::{Event, EventKind};
use super::log::{ActionLogEntry, Cause, LogHeader, AMBIENT_ACTION, END_ACTION, NARRATOR};
use super::world::WorldState;
use super::{RuntimeConfig, RuntimeError, TraceRunError};
use crate::agents::{AgentLayer, AgentSnapshot, CompetenceModule, PlotSync, PLOT_GOAL};
use crate::fuzzy::{fuzzify, DegreeVector};
use crate::intent::{match_intent, Lexicon, MatchResult};
use crate::matrix::{apply_overrides, evaluate_matrix, ActionSet, DecisionMatrix};
use crate::script::{
    validate_script, ActionDef, ActionRef, Condition, Consequence, Control, EffectDecl, ItemKind, NotpMode,
    Proposition, Rule, RuleBlock, ScriptDoc,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Upper bound on NOTP hand-overs of a single event between blocks.
const MAX_FALLTHROUGH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Ended,
}

#[derive(Debug, PartialEq)]
struct Compiled {
    doc: ScriptDoc,
    lexicon: Lexicon,
    matrices: Vec<DecisionMatrix>,
}

/// Position inside the rule block the session is waiting in.
#[derive(Debug, Clone, PartialEq)]
struct BlockCursor {
    /// Rule positions (into `all_rules`) leading to the active nested block.
    nest: Vec<usize>,
    entered_at: u64,
    last_fire_at: Option<u64>,
    notp_fired: bool,
    /// Distinguishes successive entries.
    entry: u64,
}

#[derive(Default)]
struct Input {
    intents: Option<Vec<MatchResult>>,
    vector: Option<DegreeVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    script: Arc<Compiled>,
    pub config: RuntimeConfig,
    pub seed: u64,
    pub status: Status,
    pub clock: u64,
    pub step_entered_at: u64,
    pub fired_since_entry: bool,
    pub world: WorldState,
    pub log: Vec<ActionLogEntry>,
    scene: usize,
    step: usize,
    item: usize,
    block: Option<BlockCursor>,
    entries: u64,
    decide: Vec<String>,
    latest: BTreeMap<String, DegreeVector>,
    rule_degrees: Option<DegreeVector>,
    agents: AgentLayer,
    agent_view: Vec<AgentSnapshot>,
    seq: u64,
}

/// Positions the session at the first step of the first scene, logging the
/// ambient description and any leading stated actions.
pub fn start_session(doc: &ScriptDoc, config: RuntimeConfig, seed: u64) -> Result<SessionState, RuntimeError> {
    config.check()?;
    let report = validate_script(doc);
    if !report.is_valid() {
        return Err(RuntimeError::InvalidScript(report));
    }
    let world = WorldState::from_script(doc);
    let agents = AgentLayer::from_script(doc, world.participant(), config.agents);
    let script = Arc::new(Compiled { lexicon: doc.lexicon(), matrices: doc.decision_matrices(), doc: doc.clone() });
    let mut s = SessionState {
        script,
        config,
        seed,
        status: Status::Running,
        clock: 0,
        step_entered_at: 0,
        fired_since_entry: false,
        world,
        log: Vec::new(),
        scene: 0,
        step: 0,
        item: 0,
        block: None,
        entries: 0,
        decide: Vec::new(),
        latest: BTreeMap::new(),
        rule_degrees: None,
        agents,
        agent_view: Vec::new(),
        seq: 0,
    };
    s.enter_scene(0)?;
    Ok(s)
}

/// `start_session` followed by `handle_event` for each event, stopping at
/// END, at the end of the trace, or at the first event past `max_ticks`.
pub fn run_trace(
    doc: &ScriptDoc,
    trace: &[Event],
    config: RuntimeConfig,
    seed: u64,
) -> Result<SessionState, TraceRunError> {
    let mut s = start_session(doc, config, seed).map_err(TraceRunError::Start)?;
    for (index, ev) in trace.iter().enumerate() {
        if s.status == Status::Ended || ev.t > config.max_ticks {
            break;
        }
        s.handle_event(ev).map_err(|source| TraceRunError::Event { index, source })?;
    }
    Ok(s)
}

/// Bracketed actions from `brackets` that must run before `action` so its
/// preconditions hold, in execution order. The world is not modified.
pub fn resolve_consistency(
    doc: &ScriptDoc,
    action: &ActionDef,
    world: &WorldState,
    brackets: &[ActionRef],
) -> Result<Vec<String>, RuntimeError> {
    let mut sim = world.clone();
    let mut inserted = Vec::new();
    let mut claimed = Vec::new();
    establish(doc, action, &mut sim, brackets, &mut inserted, &mut claimed)?;
    Ok(inserted)
}

fn establish(
    doc: &ScriptDoc,
    action: &ActionDef,
    sim: &mut WorldState,
    brackets: &[ActionRef],
    inserted: &mut Vec<String>,
    claimed: &mut Vec<String>,
) -> Result<(), RuntimeError> {
    for pre in &action.preconditions {
        if sim.holds(pre) {
            continue;
        }
        let provider = brackets
            .iter()
            .filter(|b| b.bracketed && !claimed.contains(&b.action_id))
            .filter_map(|b| doc.action(&b.action_id))
            .find(|d| d.effects.contains(pre));
        let Some(provider) = provider else {
            return Err(RuntimeError::UnmetPrecondition { action: action.id.clone(), fact: pre.clone() });
        };
        // claimed before recursing so cycles terminate
        claimed.push(provider.id.clone());
        establish(doc, provider, sim, brackets, inserted, claimed)?;
        inserted.push(provider.id.clone());
        for e in &provider.effects {
            sim.set(e.clone());
        }
    }
    match action.preconditions.iter().find(|p| !sim.holds(p)) {
        Some(p) => Err(RuntimeError::UnmetPrecondition { action: action.id.clone(), fact: p.clone() }),
        None => Ok(()),
    }
}

/// Plot goal relevance (the current block's NOTP degree) and a plot module
/// carrying the block's NOTP consequence, owned by its first performer.
pub fn sync_plot_goal(session: &SessionState) -> PlotSync {
    let Some(block) = session.current_block() else {
        return PlotSync { relevance: 0.0, modules: Vec::new() };
    };
    let relevance = session.rule_degrees.as_ref().map_or(1.0, |d| d.notp);
    let mut modules = Vec::new();
    if let Some(notp) = &block.notp {
        let actions: Vec<String> =
            notp.consequence.actions.iter().filter(|a| !a.bracketed).map(|a| a.action_id.clone()).collect();
        let owner = actions.first().and_then(|a| session.script.doc.action(a)).map(|d| d.performer.clone());
        if let Some(character) = owner {
            modules.push(CompetenceModule {
                id: format!("plot:{}", session.block_path()),
                character,
                preconditions: Vec::new(),
                actions,
                effects: vec![EffectDecl {
                    proposition: Proposition::Label(PLOT_GOAL.into()),
                    negated: false,
                    expectation: 1.0,
                }],
                plot: true,
            });
        }
    }
    PlotSync { relevance, modules }
}

impl SessionState {
    pub fn script(&self) -> &ScriptDoc {
        &self.script.doc
    }

    pub fn scene_id(&self) -> &str {
        &self.script.doc.scenes[self.scene].id
    }

    pub fn step_id(&self) -> &str {
        &self.script.doc.scenes[self.scene].steps[self.step].id
    }

    /// Latest fuzzified vector per variable.
    pub fn degree_vectors(&self) -> impl Iterator<Item = &DegreeVector> {
        self.latest.values()
    }

    /// Rule degrees of the current block at the last event, NOTP included.
    pub fn rule_degrees(&self) -> Option<&DegreeVector> {
        self.rule_degrees.as_ref()
    }

    /// Overrides the current block's rule degrees, e.g. to force a NOTP
    /// degree for agent arbitration.
    pub fn set_rule_degrees(&mut self, degrees: DegreeVector) {
        self.rule_degrees = Some(degrees);
    }

    pub fn agent_view(&self) -> &[AgentSnapshot] {
        &self.agent_view
    }

    pub fn agents(&self) -> &AgentLayer {
        &self.agents
    }

    pub fn log_header(&self) -> LogHeader {
        LogHeader::new(&self.script.doc.title, self.seed, self.config.theta_fire, self.config.tau_notp)
    }

    /// Active rule block, innermost nesting level.
    pub fn current_block(&self) -> Option<&RuleBlock> {
        let cursor = self.block.as_ref()?;
        let step = &self.script.doc.scenes[self.scene].steps[self.step];
        let ItemKind::Block(top) = &step.items.get(self.item)?.kind else { return None };
        let mut block = top;
        for &i in &cursor.nest {
            block = block.all_rules().nth(i)?.consequence.nested.as_deref()?;
        }
        Some(block)
    }

    fn block_path(&self) -> String {
        let mut s = format!("{}/{}/{}", self.scene_id(), self.step_id(), self.item + 1);
        if let Some(c) = &self.block {
            for i in &c.nest {
                s.push_str(&format!(".{}", i + 1));
            }
        }
        s
    }

    /// Feeds one event. On error the session is left unchanged.
    pub fn handle_event(&mut self, ev: &Event) -> Result<Vec<ActionLogEntry>, RuntimeError> {
        if self.status == Status::Ended {
            return Err(RuntimeError::SessionEnded);
        }
        if ev.t < self.clock {
            return Err(RuntimeError::StaleEvent { t: ev.t, clock: self.clock });
        }
        let mut next = self.clone();
        let start = next.log.len();
        next.apply_event(ev)?;
        let new = next.log[start..].to_vec();
        *self = next;
        Ok(new)
    }

    fn apply_event(&mut self, ev: &Event) -> Result<(), RuntimeError> {
        self.clock = ev.t;
        let mut input = Input::default();
        match &ev.kind {
            EventKind::Utterance(text) => input.intents = Some(match_intent(text, &self.script.lexicon)),
            EventKind::Intensity { variable, x } => {
                if !x.is_finite() {
                    return Err(RuntimeError::MalformedEvent(format!("intensity {x} is not finite")));
                }
                let var = self
                    .script
                    .doc
                    .variable(variable)
                    .ok_or_else(|| RuntimeError::UnknownVariable(variable.clone()))?;
                let v = fuzzify(var, *x);
                self.latest.insert(variable.clone(), v.clone());
                input.vector = Some(v);
            }
            EventKind::Move(zone) => {
                if zone.trim().is_empty() {
                    return Err(RuntimeError::MalformedEvent("empty zone".into()));
                }
                self.world.move_participant(zone.trim());
            }
            EventKind::Tick => {}
        }
        if let EventKind::Intensity { variable, .. } = &ev.kind {
            self.run_matrices(variable)?;
        }
        self.run_block(&input)?;
        if self.status == Status::Running {
            self.run_agents()?;
        }
        Ok(())
    }

    fn push(&mut self, action: &str, performer: &str, cause: Cause, text: &str, degrees: Vec<DegreeVector>) {
        self.log.push(ActionLogEntry {
            t: self.clock,
            seq: self.seq,
            action: action.to_string(),
            performer: performer.to_string(),
            cause,
            text: text.to_string(),
            degrees,
        });
        self.seq += 1;
    }

    fn here(&self) -> (String, String) {
        (self.scene_id().to_string(), self.step_id().to_string())
    }

    /// Logs `id`, first inserting whatever bracketed actions its
    /// preconditions need.
    fn execute(
        &mut self,
        id: &str,
        cause: Cause,
        degrees: &[DegreeVector],
        brackets: &[ActionRef],
    ) -> Result<(), RuntimeError> {
        let script = self.script.clone();
        let def = script.doc.action(id).ok_or_else(|| RuntimeError::UnknownAction(id.to_string()))?;
        for b in resolve_consistency(&script.doc, def, &self.world, brackets)? {
            let bdef = script.doc.action(&b).expect("resolved brackets exist");
            let (scene, step) = self.here();
            let cause = Cause::Bracket { scene, step, needed_by: id.to_string() };
            self.push(&bdef.id, &bdef.performer, cause, &bdef.description, degrees.to_vec());
            for e in &bdef.effects {
                self.world.set(e.clone());
            }
        }
        self.push(&def.id, &def.performer, cause, &def.description, degrees.to_vec());
        for e in &def.effects {
            self.world.set(e.clone());
        }
        Ok(())
    }

    fn enter_scene(&mut self, si: usize) -> Result<(), RuntimeError> {
        let script = self.script.clone();
        let scene = &script.doc.scenes[si];
        self.scene = si;
        if !scene.ambient.is_empty() {
            self.push(AMBIENT_ACTION, NARRATOR, Cause::Ambient { scene: scene.id.clone() }, &scene.ambient, Vec::new());
        }
        self.enter_step(si, 0)
    }

    fn enter_step(&mut self, si: usize, ti: usize) -> Result<(), RuntimeError> {
        self.scene = si;
        self.step = ti;
        self.item = 0;
        self.block = None;
        self.decide.clear();
        self.rule_degrees = None;
        self.step_entered_at = self.clock;
        self.fired_since_entry = false;
        self.run_items()
    }

    fn run_items(&mut self) -> Result<(), RuntimeError> {
        let script = self.script.clone();
        let step = &script.doc.scenes[self.scene].steps[self.step];
        while let Some(item) = step.items.get(self.item) {
            match &item.kind {
                ItemKind::Do(a) => {
                    let (scene, step) = self.here();
                    self.execute(&a.action_id, Cause::Stated { scene, step }, &[], &[])?;
                }
                ItemKind::Decide(m) => self.decide.push(m.clone()),
                ItemKind::End => {
                    self.end();
                    return Ok(());
                }
                ItemKind::Block(_) => {
                    self.enter_block(Vec::new());
                    return Ok(());
                }
            }
            self.item += 1;
        }
        self.advance_step()
    }

    fn advance_step(&mut self) -> Result<(), RuntimeError> {
        let doc = &self.script.doc;
        if self.step + 1 < doc.scenes[self.scene].steps.len() {
            self.enter_step(self.scene, self.step + 1)
        } else if self.scene + 1 < doc.scenes.len() {
            self.enter_scene(self.scene + 1)
        } else {
            self.block = None;
            self.status = Status::Ended;
            Ok(())
        }
    }

    fn end(&mut self) {
        let (scene, step) = self.here();
        self.push(END_ACTION, NARRATOR, Cause::End { scene, step }, "END", Vec::new());
        self.block = None;
        self.status = Status::Ended;
    }

    fn enter_block(&mut self, nest: Vec<usize>) {
        self.entries += 1;
        self.rule_degrees = None;
        self.block = Some(BlockCursor {
            nest,
            entered_at: self.clock,
            last_fire_at: None,
            notp_fired: false,
            entry: self.entries,
        });
    }

    fn exit_block(&mut self) -> Result<(), RuntimeError> {
        self.block = None;
        self.rule_degrees = None;
        self.item += 1;
        self.run_items()
    }

    fn rule_degree(&self, rule: &Rule, input: &Input, cursor: &BlockCursor) -> f64 {
        match &rule.condition {
            Condition::Intent(id) => input
                .intents
                .as_ref()
                .and_then(|r| r.iter().find(|m| &m.intent_id == id))
                .map(|m| m.degree)
                .filter(|d| *d >= self.config.intent_threshold)
                .unwrap_or(0.0),
            Condition::VariableTerm { variable, term } => {
                input.vector.as_ref().filter(|v| &v.variable_id == variable).and_then(|v| v.get(term)).unwrap_or(0.0)
            }
            Condition::Timeout(n) => {
                if self.clock - cursor.entered_at >= *n {
                    1.0
                } else {
                    0.0
                }
            }
            Condition::State(f) => {
                if self.world.holds(f) {
                    1.0
                } else {
                    0.0
                }
            }
            Condition::Notp => 0.0,
        }
    }

    fn run_block(&mut self, input: &Input) -> Result<(), RuntimeError> {
        let script = self.script.clone();
        for _ in 0..MAX_FALLTHROUGH {
            if self.status != Status::Running {
                return Ok(());
            }
            let Some(cursor) = self.block.clone() else { return Ok(()) };
            let block = self.current_block().expect("cursor points at a block").clone();
            let degrees: Vec<(String, f64)> = block
                .rules
                .iter()
                .map(|r| (condition_label(&r.condition), self.rule_degree(r, input, &cursor)))
                .collect();
            let snapshot = DegreeVector::from_degrees(self.block_path(), degrees.clone());
            self.rule_degrees = Some(snapshot.clone());
            let fired: Vec<usize> =
                (0..block.rules.len()).filter(|&i| degrees[i].1 >= self.config.theta_fire).collect();
            let (scene, step) = self.here();
            if let Some(&first) = fired.first() {
                if let Some(c) = self.block.as_mut() {
                    c.last_fire_at = Some(self.clock);
                }
                self.fired_since_entry = true;
                let snap = [snapshot];
                for &i in &fired {
                    let mut path: Vec<usize> = cursor.nest.iter().map(|n| n + 1).collect();
                    path.push(i + 1);
                    let cause = Cause::Rule { scene: scene.clone(), step: step.clone(), path };
                    self.run_consequence(&block.rules[i].consequence, cause, &snap)?;
                }
                return self.follow(&block.rules[first], first, &script);
            }
            let Some(notp) = &block.notp else { return Ok(()) };
            let due = !cursor.notp_fired
                && match block.notp_mode {
                    NotpMode::Immediate => true,
                    NotpMode::After(n) => {
                        let quiet_since = cursor.last_fire_at.map_or(cursor.entered_at, |f| f.max(cursor.entered_at));
                        self.clock - quiet_since >= n.unwrap_or(self.config.tau_notp)
                    }
                };
            if !due {
                return Ok(());
            }
            if let Some(c) = self.block.as_mut() {
                c.notp_fired = true;
            }
            self.fired_since_entry = true;
            let mut path: Vec<usize> = cursor.nest.iter().map(|n| n + 1).collect();
            path.push(block.rules.len() + 1);
            self.run_consequence(&notp.consequence, Cause::Notp { scene, step, path }, &[snapshot])?;
            self.follow(notp, block.rules.len(), &script)?;
            // an unmatched event carries over into a freshly entered block
            match &self.block {
                Some(c) if c.entry != cursor.entry => continue,
                _ => return Ok(()),
            }
        }
        Ok(())
    }

    fn run_consequence(&mut self, c: &Consequence, cause: Cause, degrees: &[DegreeVector]) -> Result<(), RuntimeError> {
        for a in c.actions.iter().filter(|a| !a.bracketed) {
            self.execute(&a.action_id, cause.clone(), degrees, &c.actions)?;
        }
        Ok(())
    }

    /// Enters the rule's nested block, or applies its control.
    fn follow(&mut self, rule: &Rule, index: usize, script: &Compiled) -> Result<(), RuntimeError> {
        if rule.consequence.nested.is_some() {
            let mut nest = self.block.as_ref().map(|c| c.nest.clone()).unwrap_or_default();
            nest.push(index);
            self.enter_block(nest);
            return Ok(());
        }
        self.apply_control(&rule.consequence.control, script)
    }

    fn apply_control(&mut self, control: &Control, script: &Compiled) -> Result<(), RuntimeError> {
        match control {
            Control::Stay | Control::Wait => Ok(()),
            Control::Next => self.exit_block(),
            Control::Continue => {
                let mut nest = self.block.as_ref().map(|c| c.nest.clone()).unwrap_or_default();
                let Some(parent) = nest.pop() else { return self.exit_block() };
                self.enter_block(nest);
                let block = self.current_block().expect("parent block exists");
                let rule = block.all_rules().nth(parent).expect("parent rule exists");
                let control = rule.consequence.control.clone();
                self.apply_control(&control, script)
            }
            Control::Goto(target) => {
                let scene = &script.doc.scenes[self.scene];
                let ti = scene
                    .steps
                    .iter()
                    .position(|s| &s.id == target)
                    .ok_or_else(|| RuntimeError::MalformedEvent(format!("GOTO to unknown step `{target}`")))?;
                self.enter_step(self.scene, ti)
            }
            Control::End => {
                self.end();
                Ok(())
            }
        }
    }

    fn run_matrices(&mut self, variable: &str) -> Result<(), RuntimeError> {
        let script = self.script.clone();
        for id in self.decide.clone() {
            let Some(m) = script.matrices.iter().find(|m| m.id == id) else { continue };
            if m.row_variable != variable && m.col_variable != variable {
                continue;
            }
            let vector =
                |v: &str| self.latest.get(v).cloned().or_else(|| script.doc.variable(v).map(DegreeVector::silent));
            let (Some(row), Some(col)) = (vector(&m.row_variable), vector(&m.col_variable)) else { continue };
            let cells = evaluate_matrix(m, &row, &col).map_err(|e| RuntimeError::MalformedEvent(e.to_string()))?;
            let world = &self.world;
            let holds = |f: &crate::script::Fact| world.holds(f);
            let fired: Vec<_> = cells.iter().filter(|c| c.score >= self.config.theta_fire).collect();
            let mut union = ActionSet::new();
            let mut origin: Vec<(String, usize)> = Vec::new();
            for (ci, cell) in fired.iter().enumerate() {
                let set = apply_overrides(&cell.actions, &script.doc.incompatibilities, holds);
                for a in set.iter() {
                    if !union.contains(a) {
                        origin.push((a.to_string(), ci));
                    }
                }
                union.extend(&set);
            }
            let union = apply_overrides(&union, &script.doc.incompatibilities, holds);
            let degrees = [row.clone(), col.clone()];
            for a in union.iter().map(str::to_string).collect::<Vec<_>>() {
                let ci = origin.iter().find(|(o, _)| *o == a).map_or(0, |(_, c)| *c);
                let cell = fired[ci];
                let cause = Cause::Matrix {
                    matrix: m.id.clone(),
                    row: cell.row_term.to_string(),
                    col: cell.col_term.to_string(),
                    score: cell.score,
                };
                self.execute(&a, cause, &degrees, &[])?;
            }
        }
        Ok(())
    }

    fn run_agents(&mut self) -> Result<(), RuntimeError> {
        let plot = sync_plot_goal(self);
        let world = self.world.clone();
        let truth = move |p: &Proposition| match p {
            Proposition::Fact(f) => {
                if world.holds(f) {
                    1.0
                } else {
                    0.0
                }
            }
            Proposition::Label(_) => 0.0,
        };
        let picks = self.agents.cycle(&plot, &truth);
        self.agent_view = self.agents.networks.iter().zip(&picks).map(|(n, &p)| n.snapshot(p, &truth)).collect();
        if !self.config.agent_idle {
            return Ok(());
        }
        let script = self.script.clone();
        for (n, pick) in self.agents.networks.clone().iter().zip(picks) {
            let Some(i) = pick else { continue };
            let m = &n.modules[i];
            if m.plot {
                continue;
            }
            for a in &m.actions {
                let ready = script.doc.action(a).is_some_and(|d| d.preconditions.iter().all(|p| self.world.holds(p)));
                if ready {
                    self.execute(a, Cause::Agent { module: m.id.clone() }, &[], &[])?;
                }
            }
        }
        Ok(())
    }
}

fn condition_label(c: &Condition) -> String {
    match c {
        Condition::Intent(i) => format!("~{i}"),
        Condition::VariableTerm { variable, term } => format!("{variable} IS {term}"),
        Condition::Timeout(n) => format!("TIMEOUT {n}"),
        Condition::State(f) => f.to_string(),
        Condition::Notp => crate::fuzzy::NOTP.to_string(),
    }
}
