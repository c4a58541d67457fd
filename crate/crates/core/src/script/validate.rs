use super::model::*;
use crate::fuzzy::{Axis, LinguisticVariable};
use crate::intent::Lexicon;
use crate::matrix::{detect_incompatibilities, DecisionMatrix, DEFAULT_THETA};
use crate::source::Loc;
use serde::Serialize;
use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

/// Participant id assumed when a script declares none.
pub const DEFAULT_PARTICIPANT: &str = "ZELIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FindingCode {
    MissingNotp,
    UnreachableStep,
    UnresolvedRef,
    NoEndReachable,
    IncompleteMatrix,
    UnfirableRule,
    Incompatibility,
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: FindingCode,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn count(&self, code: FindingCode) -> usize {
        self.findings.iter().filter(|f| f.code == code).count()
    }

    /// One `severity<TAB>code<TAB>line<TAB>message` record per finding.
    pub fn to_records(&self) -> String {
        self.findings
            .iter()
            .map(|f| {
                let sev = match f.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                format!("{sev}\t{}\t{}\t{}\n", f.code, f.line, f.message)
            })
            .collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in &self.findings {
            let sev = match x.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "{sev}[{}] line {}: {}", x.code, x.line, x.message)?;
        }
        let errors = self.errors().count();
        write!(f, "{} finding(s), {errors} error(s)", self.findings.len())
    }
}

/// Validates a document against its own matrices and lexicon.
pub fn validate_script(doc: &ScriptDoc) -> ValidationReport {
    validate_with(doc, &doc.decision_matrices(), &doc.lexicon())
}

pub fn validate_with(doc: &ScriptDoc, matrices: &[DecisionMatrix], lexicon: &Lexicon) -> ValidationReport {
    let mut v = Validator { doc, matrices, lexicon, findings: Vec::new() };
    v.world_refs();
    v.action_refs();
    v.matrix_checks();
    v.agent_refs();
    v.scene_checks();
    v.reachability();
    ValidationReport { findings: v.findings }
}

struct Validator<'a> {
    doc: &'a ScriptDoc,
    matrices: &'a [DecisionMatrix],
    lexicon: &'a Lexicon,
    findings: Vec<Finding>,
}

impl<'a> Validator<'a> {
    fn push(&mut self, severity: Severity, code: FindingCode, loc: Loc, message: String) {
        self.findings.push(Finding { severity, code, line: loc.line().max(1), message });
    }

    fn unresolved(&mut self, loc: Loc, message: String) {
        self.push(Severity::Error, FindingCode::UnresolvedRef, loc, message);
    }

    fn is_entity(&self, id: &str) -> bool {
        self.doc.world.has_entity(id) || (self.doc.participant().is_none() && id == DEFAULT_PARTICIPANT)
    }

    fn is_character(&self, id: &str) -> bool {
        self.doc.world.characters.iter().any(|c| c.id == id)
            || (self.doc.participant().is_none() && id == DEFAULT_PARTICIPANT)
    }

    fn check_fact(&mut self, f: &Fact, loc: Loc, ctx: &str) {
        if !self.is_entity(&f.subject) {
            self.unresolved(loc, format!("{ctx}: unknown entity `{}`", f.subject));
        }
    }

    fn check_action(&mut self, id: &str, loc: Loc, ctx: &str) {
        if self.doc.action(id).is_none() {
            self.unresolved(loc, format!("{ctx}: unknown action `{id}`"));
        }
    }

    fn matrix(&self, id: &str) -> Option<&'a DecisionMatrix> {
        self.matrices.iter().find(|m| m.id == id)
    }

    fn world_refs(&mut self) {
        for f in &self.doc.world.facts {
            self.check_fact(&f.fact, f.loc, "initial fact");
        }
    }

    fn action_refs(&mut self) {
        for a in &self.doc.actions {
            if !self.is_entity(&a.performer) {
                self.unresolved(a.loc, format!("action `{}`: unknown performer `{}`", a.id, a.performer));
            }
            for f in a.preconditions.iter().chain(&a.effects) {
                self.check_fact(f, a.loc, &format!("action `{}`", a.id));
            }
        }
    }

    fn matrix_checks(&mut self) {
        for m in self.matrices {
            let loc = self.doc.matrices.iter().find(|d| d.matrix.id == m.id).map_or(Loc::default(), |d| d.loc);
            let row_var = self.doc.variable(&m.row_variable);
            let col_var = self.doc.variable(&m.col_variable);
            for (var, id) in [(row_var, &m.row_variable), (col_var, &m.col_variable)] {
                if var.is_none() {
                    self.unresolved(loc, format!("matrix `{}`: unknown variable `{id}`", m.id));
                }
            }
            let mut missing = Vec::new();
            if let Some(rv) = row_var {
                for axis in rv.axes() {
                    if !m.rows.iter().any(|r| r.label == axis) {
                        missing.push(format!("row {axis}"));
                    }
                }
                for r in &m.rows {
                    if let Axis::Term(t) = &r.label {
                        if rv.term(t).is_none() {
                            self.unresolved(r.loc, format!("matrix `{}`: `{t}` is not a term of `{}`", m.id, rv.id));
                        }
                    }
                }
            }
            if let Some(cv) = col_var {
                for axis in cv.axes() {
                    if !m.columns.contains(&axis) {
                        missing.push(format!("column {axis}"));
                    }
                }
                for c in &m.columns {
                    if let Axis::Term(t) = c {
                        if cv.term(t).is_none() {
                            self.unresolved(loc, format!("matrix `{}`: `{t}` is not a term of `{}`", m.id, cv.id));
                        }
                    }
                }
            }
            if !missing.is_empty() {
                self.push(
                    Severity::Error,
                    FindingCode::IncompleteMatrix,
                    loc,
                    format!("matrix `{}` is missing {}", m.id, missing.join(", ")),
                );
            }
            for r in &m.rows {
                for set in &r.cells {
                    for a in set.iter() {
                        self.check_action(a, r.loc, &format!("matrix `{}`", m.id));
                    }
                }
            }
            for f in detect_incompatibilities(m, &self.doc.incompatibilities) {
                let place = match &f.cofires_with {
                    None => format!("cell ({}, {})", f.cell.0, f.cell.1),
                    Some(o) => format!("cells ({}, {}) and ({}, {})", f.cell.0, f.cell.1, o.0, o.1),
                };
                let loc = m.rows.iter().find(|r| r.label == f.cell.0).map_or(f.loc, |r| r.loc);
                self.push(
                    Severity::Error,
                    FindingCode::Incompatibility,
                    loc,
                    format!(
                        "matrix `{}`: {place} can fire incompatible `{}` and `{}` with no override",
                        m.id, f.pair.0, f.pair.1
                    ),
                );
            }
        }
        for d in &self.doc.incompatibilities {
            for a in [&d.pair.0, &d.pair.1] {
                self.check_action(a, d.loc, "INCOMPAT");
            }
            if let Some(o) = &d.override_set {
                for a in o.iter() {
                    self.check_action(a, d.loc, "INCOMPAT override");
                }
            }
            if let Some(w) = &d.when {
                self.check_fact(w, d.loc, "INCOMPAT condition");
            }
        }
    }

    fn agent_refs(&mut self) {
        let agents = &self.doc.agents;
        for g in &agents.goals {
            if !self.is_character(&g.character) {
                self.unresolved(g.loc, format!("goal `{}`: unknown character `{}`", g.id, g.character));
            }
            if let Proposition::Fact(f) = &g.condition {
                self.check_fact(f, g.loc, &format!("goal `{}`", g.id));
            }
        }
        for m in &agents.modules {
            if !self.is_character(&m.character) {
                self.unresolved(m.loc, format!("module `{}`: unknown character `{}`", m.id, m.character));
            }
            self.check_action(&m.action_id, m.loc, &format!("module `{}`", m.id));
            let props = m.preconditions.iter().chain(m.effects.iter().map(|e| &e.proposition));
            for p in props {
                if let Proposition::Fact(f) = p {
                    self.check_fact(f, m.loc, &format!("module `{}`", m.id));
                }
            }
        }
    }

    fn scene_checks(&mut self) {
        for scene in &self.doc.scenes {
            for step in &scene.steps {
                for item in &step.items {
                    match &item.kind {
                        ItemKind::Do(a) => self.check_action(&a.action_id, item.loc, &format!("step `{}`", step.id)),
                        ItemKind::Decide(id) => {
                            if let Some(m) = self.matrix(id) {
                                let _ = m;
                            } else {
                                self.unresolved(item.loc, format!("step `{}`: unknown matrix `{id}`", step.id));
                            }
                        }
                        ItemKind::End => {}
                        ItemKind::Block(b) => self.block_checks(scene, step, b, item.loc),
                    }
                }
            }
        }
    }

    fn block_checks(&mut self, scene: &Scene, step: &SceneStep, block: &RuleBlock, loc: Loc) {
        if block.notp.is_none() {
            let at = block.rules.last().map_or(loc, |r| r.loc);
            self.push(
                Severity::Error,
                FindingCode::MissingNotp,
                at,
                format!("rule block in step `{}` does not end with a NOTP rule", step.id),
            );
        }
        for rule in block.all_rules() {
            let ctx = format!("step `{}`", step.id);
            match &rule.condition {
                Condition::Intent(i) => {
                    if self.lexicon.intent(i).is_none() {
                        self.unresolved(rule.loc, format!("{ctx}: unknown intent `{i}`"));
                    }
                }
                Condition::VariableTerm { variable, term } => match self.doc.variable(variable) {
                    None => self.unresolved(rule.loc, format!("{ctx}: unknown variable `{variable}`")),
                    Some(v) => match v.term(term) {
                        None => self.unresolved(rule.loc, format!("{ctx}: `{term}` is not a term of `{variable}`")),
                        Some(t) if t.membership.peak() < DEFAULT_THETA => self.push(
                            Severity::Warning,
                            FindingCode::UnfirableRule,
                            rule.loc,
                            format!("{ctx}: term `{term}` of `{variable}` never reaches the firing threshold"),
                        ),
                        Some(_) => {}
                    },
                },
                Condition::State(f) => self.check_fact(f, rule.loc, &ctx),
                Condition::Timeout(_) | Condition::Notp => {}
            }
            for a in &rule.consequence.actions {
                self.check_action(&a.action_id, rule.loc, &ctx);
            }
            if let Control::Goto(target) = &rule.consequence.control {
                if scene.step(target).is_none() {
                    self.unresolved(rule.loc, format!("{ctx}: GOTO to unknown step `{target}`"));
                }
            }
            if let Some(n) = &rule.consequence.nested {
                self.block_checks(scene, step, n, rule.loc);
            }
        }
    }

    fn reachability(&mut self) {
        let graph = StepGraph::build(self.doc);
        let Some(start) = graph.start() else {
            self.push(Severity::Error, FindingCode::NoEndReachable, Loc(1), "script has no scenes".into());
            return;
        };
        let (reached, end) = graph.explore(start);
        for (si, scene) in self.doc.scenes.iter().enumerate() {
            for (ti, step) in scene.steps.iter().enumerate() {
                if !reached.contains(&(si, ti)) {
                    self.push(
                        Severity::Warning,
                        FindingCode::UnreachableStep,
                        step.loc,
                        format!("step `{}` of scene `{}` can never be entered", step.id, scene.id),
                    );
                }
            }
        }
        if !end {
            let loc = self.doc.scenes[0].loc;
            self.push(
                Severity::Error,
                FindingCode::NoEndReachable,
                loc,
                "no END marker is reachable from the first step".into(),
            );
        }
    }
}

/// Where control can go when leaving a point of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Exit {
    Step(usize, usize),
    End,
    /// Ran past the last step of the last scene.
    FellOff,
}

pub struct StepGraph {
    /// Per `(scene, step)`, the exits reachable by running it from entry.
    edges: Vec<Vec<BTreeSet<Exit>>>,
}

impl StepGraph {
    pub(crate) fn build(doc: &ScriptDoc) -> Self {
        let edges = doc
            .scenes
            .iter()
            .enumerate()
            .map(|(si, scene)| {
                (0..scene.steps.len())
                    .map(|ti| {
                        let mut exits = BTreeSet::new();
                        step_exits(doc, si, ti, 0, &mut exits);
                        exits
                    })
                    .collect()
            })
            .collect();
        Self { edges }
    }

    pub(crate) fn start(&self) -> Option<(usize, usize)> {
        self.edges.first().filter(|s| !s.is_empty()).map(|_| (0, 0))
    }

    /// Steps reachable from `start` and whether END is among the exits.
    pub(crate) fn explore(&self, start: (usize, usize)) -> (HashSet<(usize, usize)>, bool) {
        let mut seen = HashSet::from([start]);
        let mut queue = VecDeque::from([start]);
        let mut end = false;
        while let Some((s, t)) = queue.pop_front() {
            for exit in &self.edges[s][t] {
                match *exit {
                    Exit::Step(a, b) => {
                        if seen.insert((a, b)) {
                            queue.push_back((a, b));
                        }
                    }
                    Exit::End => end = true,
                    Exit::FellOff => {}
                }
            }
        }
        (seen, end)
    }
}

fn firable(doc: &ScriptDoc, rule: &Rule) -> bool {
    match &rule.condition {
        Condition::VariableTerm { variable, term } => doc
            .variable(variable)
            .and_then(|v: &LinguisticVariable| v.term(term))
            .is_none_or(|t| t.membership.peak() >= DEFAULT_THETA),
        _ => true,
    }
}

fn following(doc: &ScriptDoc, si: usize, ti: usize) -> Exit {
    if ti + 1 < doc.scenes[si].steps.len() {
        Exit::Step(si, ti + 1)
    } else if si + 1 < doc.scenes.len() {
        Exit::Step(si + 1, 0)
    } else {
        Exit::FellOff
    }
}

/// Runs the items of a step from `from`, collecting every way out.
fn step_exits(doc: &ScriptDoc, si: usize, ti: usize, from: usize, out: &mut BTreeSet<Exit>) {
    let step = &doc.scenes[si].steps[ti];
    for (i, item) in step.items.iter().enumerate().skip(from) {
        match &item.kind {
            ItemKind::Do(_) | ItemKind::Decide(_) => {}
            ItemKind::End => {
                out.insert(Exit::End);
                return;
            }
            ItemKind::Block(b) => {
                let mut resumes = false;
                block_exits(doc, si, b, &mut resumes, out);
                if resumes {
                    step_exits(doc, si, ti, i + 1, out);
                }
                return;
            }
        }
    }
    out.insert(following(doc, si, ti));
}

/// Exits of a top-level block; `resumes` is set when the step carries on after it.
fn block_exits(doc: &ScriptDoc, si: usize, block: &RuleBlock, resumes: &mut bool, out: &mut BTreeSet<Exit>) {
    for rule in block.all_rules().filter(|r| firable(doc, r)) {
        let mut controls = Vec::new();
        match &rule.consequence.nested {
            None => controls.push(rule.consequence.control.clone()),
            Some(n) => nested_controls(doc, n, &rule.consequence.control, &mut controls),
        }
        for c in controls {
            match c {
                Control::Next | Control::Continue => *resumes = true,
                Control::Stay | Control::Wait => {}
                Control::End => {
                    out.insert(Exit::End);
                }
                Control::Goto(target) => {
                    if let Some(t) = doc.scenes[si].steps.iter().position(|s| s.id == target) {
                        out.insert(Exit::Step(si, t));
                    }
                }
            }
        }
    }
}

/// Controls that leave a nested block, as seen by its parent level.
fn nested_controls(doc: &ScriptDoc, block: &RuleBlock, parent: &Control, out: &mut Vec<Control>) {
    for rule in block.all_rules().filter(|r| firable(doc, r)) {
        let mut own = Vec::new();
        match &rule.consequence.nested {
            None => own.push(rule.consequence.control.clone()),
            Some(n) => nested_controls(doc, n, &rule.consequence.control, &mut own),
        }
        for c in own {
            match c {
                Control::Continue => out.push(parent.clone()),
                other => out.push(other),
            }
        }
    }
}
