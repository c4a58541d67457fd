#![allow(dead_code)]

pub mod agents;
pub mod lexicon;
#[cfg(feature = "server")]
pub mod live;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use zelig::runtime::{parse_trace, Event};
use zelig::script::{load_script, ScriptDoc};

pub const FIXTURES: &[&str] = &["example3.drama", "drunk_keys.drama", "angie.drama"];

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn drunk_keys() -> ScriptDoc {
    load_script(fixture("drunk_keys.drama")).unwrap()
}

pub fn example3() -> ScriptDoc {
    load_script(fixture("example3.drama")).unwrap()
}

pub fn trace(name: &str) -> Vec<Event> {
    parse_trace(&read(&format!("{name}.trace.jsonl"))).unwrap()
}

/// Copy of the script fixtures in a temporary directory, for edits.
pub struct Scratch {
    pub dir: tempfile::TempDir,
}

impl Scratch {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        for f in FIXTURES {
            std::fs::copy(fixture(f), dir.path().join(f)).unwrap();
        }
        Scratch { dir }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Rewrites one file; panics if the edit changes nothing.
    pub fn edit(&self, name: &str, f: impl FnOnce(&str) -> String) -> &Self {
        let p = self.path(name);
        let before = std::fs::read_to_string(&p).unwrap();
        let after = f(&before);
        assert_ne!(before, after, "edit of {name} changed nothing");
        std::fs::write(&p, after).unwrap();
        self
    }

    pub fn load(&self, name: &str) -> ScriptDoc {
        load_script(self.path(name)).unwrap()
    }
}

/// Removes the first line that, trimmed, equals `line`.
pub fn drop_line(text: &str, line: &str) -> String {
    let mut done = false;
    text.lines()
        .filter(|l| {
            if !done && l.trim() == line {
                done = true;
                return false;
            }
            true
        })
        .map(|l| format!("{l}\n"))
        .collect()
}

/// A plausible participant: random pauses, phrases, moves and intensity readings.
pub fn random_trace(rng: &mut ChaCha8Rng) -> Vec<Event> {
    let mut t = 0;
    let mut out = Vec::new();
    let phrases: Vec<&str> = lexicon::PARAPHRASES.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    for _ in 0..rng.gen_range(0..40) {
        t += rng.gen_range(0..4);
        let ev = match rng.gen_range(0..10) {
            0..=3 => Event::tick(t),
            4..=5 => Event::utterance(t, *phrases.choose(rng).unwrap()),
            6 => Event::utterance(t, *lexicon::NONSENSE.choose(rng).unwrap()),
            7 => Event::moved(t, *["searching", "street", "door"].choose(rng).unwrap()),
            8 => Event::intensity(t, "surprise", rng.gen_range(0.0..=1.0)),
            _ => Event::intensity(t, *["anger", "approach"].choose(rng).unwrap(), rng.gen_range(0.0..=1.0)),
        };
        out.push(ev);
    }
    out
}
