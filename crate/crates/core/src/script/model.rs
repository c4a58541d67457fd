use crate::fuzzy::LinguisticVariable;
use crate::intent::{Intent, Lexicon};
use crate::matrix::{DecisionMatrix, IncompatibilityDecl};
use crate::source::Loc;
use serde::Serialize;
use std::fmt;

/// Value side of a fact: a boolean or a symbolic tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Tag(String),
}

impl Value {
    pub fn parse(s: &str) -> Self {
        match s {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            other => Value::Tag(other.to_string()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Tag(t) => f.write_str(t),
        }
    }
}

/// `subject.predicate = value`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Fact {
    pub subject: String,
    pub predicate: String,
    pub value: Value,
}

impl Fact {
    pub fn new(subject: impl Into<String>, predicate: impl Into<String>, value: Value) -> Self {
        Self { subject: subject.into(), predicate: predicate.into(), value }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{} = {}", self.subject, self.predicate, self.value)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScriptDoc {
    pub title: String,
    /// Comments before any declaration, and those attached to section headers.
    pub comments: Vec<String>,
    pub imports: Vec<Import>,
    pub world: WorldDecl,
    pub actions: Vec<ActionDef>,
    pub variables: Vec<VarDecl>,
    pub intents: Vec<IntentDecl>,
    pub matrices: Vec<MatrixDecl>,
    pub incompatibilities: Vec<IncompatibilityDecl>,
    pub agents: AgentDecls,
    pub scenes: Vec<Scene>,
}

impl ScriptDoc {
    pub fn action(&self, id: &str) -> Option<&ActionDef> {
        self.actions.iter().find(|a| a.id == id)
    }

    pub fn variable(&self, id: &str) -> Option<&LinguisticVariable> {
        self.variables.iter().map(|v| &v.variable).find(|v| v.id == id)
    }

    pub fn matrix(&self, id: &str) -> Option<&DecisionMatrix> {
        self.matrices.iter().map(|m| &m.matrix).find(|m| m.id == id)
    }

    pub fn lexicon(&self) -> Lexicon {
        Lexicon { intents: self.intents.iter().map(|i| i.intent.clone()).collect() }
    }

    pub fn decision_matrices(&self) -> Vec<DecisionMatrix> {
        self.matrices.iter().map(|m| m.matrix.clone()).collect()
    }

    pub fn scene(&self, id: &str) -> Option<&Scene> {
        self.scenes.iter().find(|s| s.id == id)
    }

    /// Id of the participant character, if one is declared.
    pub fn participant(&self) -> Option<&str> {
        self.world.characters.iter().find(|c| c.participant).map(|c| c.id.as_str())
    }
}

/// `IMPORT "relative/path.drama"`: declarations merged in at load time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Import {
    pub path: String,
    pub comments: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WorldDecl {
    pub characters: Vec<CharacterDecl>,
    pub props: Vec<PropDecl>,
    pub facts: Vec<FactDecl>,
}

impl WorldDecl {
    pub fn is_empty(&self) -> bool {
        self.characters.is_empty() && self.props.is_empty() && self.facts.is_empty()
    }

    pub fn has_entity(&self, id: &str) -> bool {
        self.characters.iter().any(|c| c.id == id) || self.props.iter().any(|p| p.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacterDecl {
    pub id: String,
    pub participant: bool,
    pub on_stage: bool,
    pub zone: Option<String>,
    pub comments: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropDecl {
    pub id: String,
    pub comments: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactDecl {
    pub fact: Fact,
    pub comments: Vec<String>,
    pub loc: Loc,
}

/// An executable story action.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionDef {
    pub id: String,
    pub performer: String,
    pub description: String,
    pub preconditions: Vec<Fact>,
    pub effects: Vec<Fact>,
    pub comments: Vec<String>,
    pub loc: Loc,
}

impl ActionDef {
    pub fn new(id: impl Into<String>, performer: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            performer: performer.into(),
            description: description.into(),
            preconditions: Vec::new(),
            effects: Vec::new(),
            comments: Vec::new(),
            loc: Loc::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarDecl {
    pub variable: LinguisticVariable,
    pub description: Option<String>,
    pub comments: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntentDecl {
    pub intent: Intent,
    pub comments: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixDecl {
    pub matrix: DecisionMatrix,
    pub comments: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AgentDecls {
    pub goals: Vec<GoalDecl>,
    pub modules: Vec<ModuleDecl>,
}

impl AgentDecls {
    pub fn is_empty(&self) -> bool {
        self.goals.is_empty() && self.modules.is_empty()
    }
}

/// A proposition an agent can reason about: a world fact or a free label
/// whose necessity degree is supplied by the session.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Proposition {
    Fact(Fact),
    Label(String),
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proposition::Fact(fact) => write!(f, "{fact}"),
            Proposition::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoalDecl {
    pub id: String,
    pub character: String,
    pub condition: Proposition,
    pub importance: f64,
    pub relevance: f64,
    pub comments: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectDecl {
    pub proposition: Proposition,
    /// A negated effect works against goals with this condition.
    pub negated: bool,
    pub expectation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleDecl {
    pub id: String,
    pub character: String,
    pub action_id: String,
    pub preconditions: Vec<Proposition>,
    pub effects: Vec<EffectDecl>,
    pub comments: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scene {
    pub id: String,
    pub ambient: String,
    pub steps: Vec<SceneStep>,
    pub comments: Vec<String>,
    pub loc: Loc,
}

impl Scene {
    pub fn step(&self, id: &str) -> Option<&SceneStep> {
        self.steps.iter().find(|s| s.id == id)
    }
}

/// One state of the scene's finite state machine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneStep {
    pub id: String,
    pub items: Vec<StepItem>,
    pub comments: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepItem {
    pub kind: ItemKind,
    pub comments: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ItemKind {
    /// Unconditional stated action.
    Do(ActionRef),
    Block(RuleBlock),
    /// Evaluate a decision matrix on intensity events while in this step.
    Decide(String),
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NotpMode {
    Immediate,
    /// `None` defers to the runtime's configured latency.
    After(Option<u64>),
}

/// A set of `IF x THEN y` rules closed by NOTP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleBlock {
    pub rules: Vec<Rule>,
    /// Only a top-level block can lack it (reported by validation); nested
    /// blocks without NOTP are rejected by the parser.
    pub notp: Option<Rule>,
    pub notp_mode: NotpMode,
    pub depth: usize,
}

impl RuleBlock {
    /// Non-NOTP rules followed by the NOTP rule.
    pub fn all_rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().chain(self.notp.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule {
    pub condition: Condition,
    pub consequence: Consequence,
    pub comments: Vec<String>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Condition {
    Intent(String),
    VariableTerm { variable: String, term: String },
    Timeout(u64),
    State(Fact),
    Notp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Consequence {
    pub actions: Vec<ActionRef>,
    /// Sub-step entered after the actions run.
    pub nested: Option<Box<RuleBlock>>,
    pub control: Control,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Control {
    /// Leave the whole rule block and carry on with the step.
    Next,
    /// Leave this block level; at top level this carries on with the step,
    /// inside a nested block it hands over to the enclosing rule's control.
    Continue,
    Stay,
    Wait,
    Goto(String),
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActionRef {
    pub action_id: String,
    /// Consistency action: runs only when needed to establish a precondition.
    pub bracketed: bool,
}

impl ActionRef {
    pub fn stated(id: impl Into<String>) -> Self {
        Self { action_id: id.into(), bracketed: false }
    }

    pub fn bracketed(id: impl Into<String>) -> Self {
        Self { action_id: id.into(), bracketed: true }
    }
}
