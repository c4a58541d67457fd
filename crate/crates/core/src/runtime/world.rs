use crate::script::{Fact, ScriptDoc, Value, DEFAULT_PARTICIPANT};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use std::collections::BTreeMap;

pub const ON_STAGE: &str = "on_stage";
pub const ZONE: &str = "zone";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CharacterState {
    pub on_stage: bool,
    pub zone: Option<String>,
}

/// Facts keyed by `(subject, predicate)`. Character stage presence and zone
/// live here too, as `c.on_stage` and `c.zone`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WorldState {
    facts: BTreeMap<(String, String), Value>,
    characters: Vec<String>,
    participant: String,
}

impl WorldState {
    pub fn from_script(doc: &ScriptDoc) -> Self {
        let participant = doc.participant().unwrap_or(DEFAULT_PARTICIPANT).to_string();
        let mut w = WorldState { participant: participant.clone(), ..Default::default() };
        if doc.participant().is_none() {
            w.characters.push(participant.clone());
            w.insert(Fact::new(&participant, ON_STAGE, Value::Bool(true)));
        }
        for c in &doc.world.characters {
            w.characters.push(c.id.clone());
            w.insert(Fact::new(&c.id, ON_STAGE, Value::Bool(c.on_stage || c.participant)));
            if let Some(z) = &c.zone {
                w.set(Fact::new(&c.id, ZONE, Value::Tag(z.clone())));
            }
        }
        for f in &doc.world.facts {
            w.set(f.fact.clone());
        }
        w
    }

    pub fn participant(&self) -> &str {
        &self.participant
    }

    pub fn get(&self, subject: &str, predicate: &str) -> Option<&Value> {
        self.facts.get(&(subject.to_string(), predicate.to_string()))
    }

    /// Booleans are closed-world: an absent boolean fact is false.
    pub fn holds(&self, f: &Fact) -> bool {
        match (self.get(&f.subject, &f.predicate), &f.value) {
            (Some(v), want) => v == want,
            (None, Value::Bool(false)) => true,
            (None, _) => false,
        }
    }

    pub fn set(&mut self, f: Fact) {
        if f.subject == self.participant && f.predicate == ON_STAGE {
            // the participant never leaves the stage
            return;
        }
        self.insert(f);
    }

    fn insert(&mut self, f: Fact) {
        self.facts.insert((f.subject, f.predicate), f.value);
    }

    pub fn move_participant(&mut self, zone: &str) {
        let p = self.participant.clone();
        self.set(Fact::new(p, ZONE, Value::Tag(zone.to_string())));
    }

    pub fn character(&self, id: &str) -> Option<CharacterState> {
        if !self.characters.iter().any(|c| c == id) {
            return None;
        }
        let on_stage = self.get(id, ON_STAGE) == Some(&Value::Bool(true));
        let zone = match self.get(id, ZONE) {
            Some(Value::Tag(z)) => Some(z.clone()),
            _ => None,
        };
        Some(CharacterState { on_stage, zone })
    }

    pub fn facts(&self) -> impl Iterator<Item = Fact> + '_ {
        self.facts.iter().map(|((s, p), v)| Fact::new(s, p, v.clone()))
    }
}

impl Serialize for WorldState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.facts.len()))?;
        for f in self.facts() {
            seq.serialize_element(&f)?;
        }
        seq.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::parse_script;

    #[test]
    fn initial_world_follows_declarations() {
        let doc = parse_script("WORLD\n  CHARACTER Z PARTICIPANT AT street\n  CHARACTER cop OFFSTAGE\n  PROP lamp\n  FACT lamp.lit = true\n").unwrap();
        let w = WorldState::from_script(&doc);
        assert_eq!(w.participant(), "Z");
        assert_eq!(w.character("Z"), Some(CharacterState { on_stage: true, zone: Some("street".into()) }));
        assert!(!w.character("cop").unwrap().on_stage);
        assert!(w.holds(&Fact::new("lamp", "lit", Value::Bool(true))));
        assert!(w.holds(&Fact::new("cop", "aware", Value::Bool(false))));
    }

    #[test]
    fn participant_is_implicit_and_stays_on_stage() {
        let mut w = WorldState::from_script(&ScriptDoc::default());
        assert_eq!(w.participant(), DEFAULT_PARTICIPANT);
        w.set(Fact::new(DEFAULT_PARTICIPANT, ON_STAGE, Value::Bool(false)));
        assert!(w.character(DEFAULT_PARTICIPANT).unwrap().on_stage);
    }
}
