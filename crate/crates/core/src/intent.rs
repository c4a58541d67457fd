//! Utterance-to-intent matching with synonym groups.
//!
//! Utterances and phrases are normalized to token sets, each token is mapped
//! to the canonical (first) member of the intent's synonym group containing
//! it, and the degree of an intent is the best Jaccard similarity over its
//! phrases.

use serde::Serialize;
use std::collections::BTreeSet;

/// Default degree below which an utterance is not considered to express an intent.
pub const DEFAULT_ACCEPTANCE: f64 = 0.6;

const CONTRACTIONS: &[(&str, &[&str])] = &[
    ("what's", &["what", "is"]),
    ("where's", &["where", "is"]),
    ("who's", &["who", "is"]),
    ("how's", &["how", "is"]),
    ("that's", &["that", "is"]),
    ("there's", &["there", "is"]),
    ("here's", &["here", "is"]),
    ("it's", &["it", "is"]),
    ("he's", &["he", "is"]),
    ("she's", &["she", "is"]),
    ("i'm", &["i", "am"]),
    ("you're", &["you", "are"]),
    ("we're", &["we", "are"]),
    ("they're", &["they", "are"]),
    ("i've", &["i", "have"]),
    ("you've", &["you", "have"]),
    ("we've", &["we", "have"]),
    ("they've", &["they", "have"]),
    ("i'll", &["i", "will"]),
    ("you'll", &["you", "will"]),
    ("he'll", &["he", "will"]),
    ("she'll", &["she", "will"]),
    ("we'll", &["we", "will"]),
    ("they'll", &["they", "will"]),
    ("i'd", &["i", "would"]),
    ("you'd", &["you", "would"]),
    ("let's", &["let", "us"]),
    ("don't", &["do", "not"]),
    ("doesn't", &["does", "not"]),
    ("didn't", &["did", "not"]),
    ("isn't", &["is", "not"]),
    ("aren't", &["are", "not"]),
    ("wasn't", &["was", "not"]),
    ("weren't", &["were", "not"]),
    ("haven't", &["have", "not"]),
    ("hasn't", &["has", "not"]),
    ("can't", &["can", "not"]),
    ("cannot", &["can", "not"]),
    ("won't", &["will", "not"]),
    ("wouldn't", &["would", "not"]),
    ("shouldn't", &["should", "not"]),
    ("couldn't", &["could", "not"]),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Intent {
    pub id: String,
    pub phrases: Vec<String>,
    pub synonym_groups: Vec<Vec<String>>,
}

impl Intent {
    pub fn new(id: impl Into<String>, phrases: Vec<String>, synonym_groups: Vec<Vec<String>>) -> Self {
        Self { id: id.into(), phrases, synonym_groups }
    }

    fn canonical<'a>(&'a self, token: &'a str) -> &'a str {
        self.synonym_groups
            .iter()
            .find(|g| g.iter().any(|s| s == token))
            .and_then(|g| g.first())
            .map_or(token, String::as_str)
    }

    fn token_set(&self, tokens: &[String]) -> BTreeSet<String> {
        tokens.iter().map(|t| self.canonical(t).to_string()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Lexicon {
    pub intents: Vec<Intent>,
}

impl Lexicon {
    pub fn intent(&self, id: &str) -> Option<&Intent> {
        self.intents.iter().find(|i| i.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub intent_id: String,
    pub degree: f64,
    pub best_phrase: String,
}

/// Lowercases, expands contractions, strips punctuation and splits on whitespace.
pub fn normalize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'");
    let mut out = Vec::new();
    for raw in lowered.split_whitespace() {
        // keep inner apostrophes long enough to look up contractions
        let word: String = raw.chars().filter(|c| c.is_alphanumeric() || *c == '\'').collect();
        let word = word.trim_matches('\'');
        if word.is_empty() {
            continue;
        }
        if let Some((_, expansion)) = CONTRACTIONS.iter().find(|(c, _)| *c == word) {
            out.extend(expansion.iter().map(|s| s.to_string()));
            continue;
        }
        let stripped: String = word.chars().filter(|c| *c != '\'').collect();
        out.push(stripped);
    }
    out
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Scores every intent; sorted by degree descending, ties in declaration order.
pub fn match_intent(utterance: &str, lexicon: &Lexicon) -> Vec<MatchResult> {
    let tokens = normalize(utterance);
    let mut results: Vec<MatchResult> = lexicon
        .intents
        .iter()
        .map(|intent| {
            let u = intent.token_set(&tokens);
            let mut best: Option<(f64, &String)> = None;
            for phrase in &intent.phrases {
                let d = jaccard(&u, &intent.token_set(&normalize(phrase)));
                if best.is_none_or(|(b, _)| d > b) {
                    best = Some((d, phrase));
                }
            }
            let (degree, phrase) = best.map_or((0.0, String::new()), |(d, p)| (d, p.clone()));
            MatchResult { intent_id: intent.id.clone(), degree, best_phrase: phrase }
        })
        .collect();
    // stable sort keeps declaration order among equal degrees
    results.sort_by(|a, b| b.degree.total_cmp(&a.degree));
    results
}
