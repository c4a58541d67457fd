use super::lines::quote;
use super::model::*;
use crate::matrix::IncompatibilityDecl;
use std::fmt::Write;

const UNIT: &str = "  ";

/// Deterministic text form of a document; re-parsing it yields an equal model.
pub fn canonical_serialize(doc: &ScriptDoc) -> String {
    let mut out = Out::default();
    for c in &doc.comments {
        out.line(0, &format!("({c})"), &[]);
    }
    if !doc.title.is_empty() {
        out.line(0, &format!("TITLE {}", quote(&doc.title)), &[]);
    }
    for i in &doc.imports {
        out.line(0, &format!("IMPORT {}", quote(&i.path)), &i.comments);
    }
    if !doc.world.is_empty() {
        out.section("WORLD");
        for c in &doc.world.characters {
            let mut s = format!("CHARACTER {}", c.id);
            if c.participant {
                s.push_str(" PARTICIPANT");
            }
            if !c.on_stage {
                s.push_str(" OFFSTAGE");
            }
            if let Some(z) = &c.zone {
                write!(s, " AT {z}").unwrap();
            }
            out.line(1, &s, &c.comments);
        }
        for p in &doc.world.props {
            out.line(1, &format!("PROP {}", p.id), &p.comments);
        }
        for f in &doc.world.facts {
            out.line(1, &format!("FACT {}", f.fact), &f.comments);
        }
    }
    if !doc.actions.is_empty() {
        out.section("ACTIONS");
        for a in &doc.actions {
            let mut s = format!("{} BY {} {}", a.id, a.performer, quote(&a.description));
            if !a.preconditions.is_empty() {
                write!(s, " REQUIRES {}", join(&a.preconditions)).unwrap();
            }
            if !a.effects.is_empty() {
                write!(s, " EFFECT {}", join(&a.effects)).unwrap();
            }
            out.line(1, &s, &a.comments);
        }
    }
    if !doc.variables.is_empty() {
        out.section("VARS");
        for v in &doc.variables {
            let var = &v.variable;
            let desc = v.description.as_ref().map(|d| format!(" {}", quote(d))).unwrap_or_default();
            out.line(1, &format!("VAR {}{desc} DOMAIN {} {}", var.id, var.domain.0, var.domain.1), &v.comments);
            for t in &var.terms {
                let pts: Vec<String> = t.membership.points().iter().map(|(x, mu)| format!("{x}:{mu}")).collect();
                out.line(2, &format!("TERM {} {}", t.id, pts.join(" ")), &[]);
            }
        }
    }
    if !doc.intents.is_empty() {
        out.section("LEXICON");
        for i in &doc.intents {
            out.line(1, &format!("INTENT {}", i.intent.id), &i.comments);
            for p in &i.intent.phrases {
                out.line(2, &quote(p), &[]);
            }
            for g in &i.intent.synonym_groups {
                out.line(2, &format!("SYN {}", g.join(" ")), &[]);
            }
        }
    }
    for m in &doc.matrices {
        let mx = &m.matrix;
        out.blank();
        out.line(0, &format!("MATRIX {} {} BY {}", mx.id, mx.row_variable, mx.col_variable), &m.comments);
        let cols: Vec<&str> = mx.columns.iter().map(|c| c.label()).collect();
        out.line(1, &format!("COLS {}", cols.join(" | ")), &[]);
        for r in &mx.rows {
            let cells: Vec<String> = r.cells.iter().map(|c| c.to_string()).collect();
            out.line(1, &format!("{}: {}", r.label, cells.join(" | ")), &[]);
        }
    }
    if !doc.incompatibilities.is_empty() {
        out.blank();
        for d in &doc.incompatibilities {
            out.line(0, &incompat(d), &d.comments);
        }
    }
    if !doc.agents.is_empty() {
        out.section("AGENTS");
        for g in &doc.agents.goals {
            let s = format!(
                "GOAL {} FOR {} ON {} IMPORTANCE {} RELEVANCE {}",
                g.id, g.character, g.condition, g.importance, g.relevance
            );
            out.line(1, &s, &g.comments);
        }
        for m in &doc.agents.modules {
            let mut s = format!("MODULE {} FOR {} DOES {}", m.id, m.character, m.action_id);
            if !m.preconditions.is_empty() {
                write!(s, " NEEDS {}", join(&m.preconditions)).unwrap();
            }
            if !m.effects.is_empty() {
                let effects: Vec<String> = m
                    .effects
                    .iter()
                    .map(|e| format!("{}{} {}", if e.negated { "!" } else { "" }, e.proposition, e.expectation))
                    .collect();
                write!(s, " EXPECTS {}", effects.join(", ")).unwrap();
            }
            out.line(1, &s, &m.comments);
        }
    }
    for scene in &doc.scenes {
        out.blank();
        out.line(0, &format!("SCENE {}", scene.id), &scene.comments);
        if !scene.ambient.is_empty() {
            out.line(1, &format!("AMBIENT {}", quote(&scene.ambient)), &[]);
        }
        for step in &scene.steps {
            out.line(1, &format!("STEP {}", step.id), &step.comments);
            for item in &step.items {
                match &item.kind {
                    ItemKind::Do(a) => out.line(2, &format!("DO {}", a.action_id), &item.comments),
                    ItemKind::Decide(m) => out.line(2, &format!("DECIDE {m}"), &item.comments),
                    ItemKind::End => out.line(2, "END", &item.comments),
                    ItemKind::Block(b) => block(&mut out, b, 2),
                }
            }
        }
    }
    out.text
}

fn block(out: &mut Out, b: &RuleBlock, level: usize) {
    for r in &b.rules {
        out.line(level, &format!("IF {} THEN {}", condition(&r.condition), consequence(&r.consequence)), &r.comments);
        if let Some(n) = &r.consequence.nested {
            block(out, n, level + 1);
        }
    }
    if let Some(r) = &b.notp {
        let mode = match b.notp_mode {
            NotpMode::Immediate => " IMMEDIATE".to_string(),
            NotpMode::After(Some(n)) => format!(" AFTER {n}"),
            NotpMode::After(None) => String::new(),
        };
        out.line(level, &format!("NOTP{mode} THEN {}", consequence(&r.consequence)), &r.comments);
        if let Some(n) = &r.consequence.nested {
            block(out, n, level + 1);
        }
    }
}

fn condition(c: &Condition) -> String {
    match c {
        Condition::Intent(i) => format!("SAYS ~{i}"),
        Condition::VariableTerm { variable, term } => format!("{variable} IS {term}"),
        Condition::Timeout(n) => format!("TIMEOUT {n}"),
        Condition::State(f) => f.to_string(),
        Condition::Notp => "NOTP".to_string(),
    }
}

fn control(c: &Control) -> String {
    match c {
        Control::Next => "NEXT".into(),
        Control::Continue => "CONTINUE".into(),
        Control::Stay => "STAY".into(),
        Control::Wait => "WAIT".into(),
        Control::End => "END".into(),
        Control::Goto(s) => format!("GOTO {s}"),
    }
}

fn consequence(c: &Consequence) -> String {
    if c.actions.is_empty() {
        return control(&c.control);
    }
    let refs: Vec<String> = c
        .actions
        .iter()
        .map(|a| if a.bracketed { format!("[{}]", a.action_id) } else { a.action_id.clone() })
        .collect();
    match c.control {
        Control::Stay => refs.join(", "),
        ref other => format!("{} ; {}", refs.join(", "), control(other)),
    }
}

fn incompat(d: &IncompatibilityDecl) -> String {
    let mut s = format!("INCOMPAT {} {}", d.pair.0, d.pair.1);
    if let Some(w) = &d.when {
        write!(s, " WHEN {w}").unwrap();
    }
    if let Some(o) = &d.override_set {
        write!(s, " OVERRIDE {o}").unwrap();
    }
    s
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Default)]
struct Out {
    text: String,
}

impl Out {
    fn line(&mut self, level: usize, content: &str, comments: &[String]) {
        for _ in 0..level {
            self.text.push_str(UNIT);
        }
        self.text.push_str(content);
        for c in comments {
            write!(self.text, " ({c})").unwrap();
        }
        self.text.push('\n');
    }

    fn blank(&mut self) {
        if !self.text.is_empty() && !self.text.ends_with("\n\n") {
            self.text.push('\n');
        }
    }

    fn section(&mut self, header: &str) {
        self.blank();
        self.line(0, header, &[]);
    }
}
