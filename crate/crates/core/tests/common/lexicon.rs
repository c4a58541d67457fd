use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use zelig::intent::Lexicon;

/// Utterances a participant might type for each intent of the fixture.
pub const PARAPHRASES: &[(&str, &[&str])] = &[
    (
        "ask-problem",
        &[
            "What is the problem?",
            "What's the problem?",
            "what's going on",
            "What is going on here?",
            "What's wrong?",
            "what is the matter",
            "Hey, what's the trouble?",
            "What happened?",
            "what is happening",
        ],
    ),
    (
        "other-question",
        &[
            "Where are they?",
            "where are we",
            "Why is he like that?",
            "What's his name?",
            "what's he's name",
            "Who are you?",
        ],
    ),
    (
        "ask-sure",
        &[
            "Are you sure of having them lost over here?",
            "Are you sure you lost them over here?",
            "are you sure you lost them here",
            "Are you sure?",
            "are you certain",
            "Are you positive you lost them here?",
        ],
    ),
];

pub const NONSENSE: &[&str] = &[
    "weather",
    "purple",
    "elephants",
    "dance",
    "tomorrow",
    "banana",
    "piano",
    "quietly",
    "mountain",
    "river",
    "seven",
    "bicycle",
    "sings",
    "green",
    "loudly",
    "ocean",
    "library",
    "painted",
    "cheese",
    "winter",
    "the",
    "a",
    "and",
    "of",
    "under",
    "my",
    "cat",
    "likes",
    "jazz",
];

/// Direct transcription of the matching rule: token sets after contraction
/// expansion and synonym canonicalization, scored by Jaccard similarity.
pub fn oracle(utterance: &str, lexicon: &Lexicon, intent: &str) -> f64 {
    let tokens = |s: &str| -> Vec<String> {
        s.to_lowercase()
            .replace("what's", "what is")
            .replace("he's", "he is")
            .split_whitespace()
            .map(|w| w.chars().filter(|c| c.is_alphanumeric()).collect::<String>())
            .filter(|w| !w.is_empty())
            .collect()
    };
    let it = lexicon.intent(intent).unwrap();
    let canon =
        |w: String| -> String { it.synonym_groups.iter().find(|g| g.contains(&w)).map(|g| g[0].clone()).unwrap_or(w) };
    let set = |s: &str| -> BTreeSet<String> { tokens(s).into_iter().map(canon).collect() };
    let u = set(utterance);
    let mut best: f64 = 0.0;
    for p in &it.phrases {
        let p = set(p);
        if u.is_empty() || p.is_empty() {
            continue;
        }
        let inter = u.intersection(&p).count() as f64;
        let union = u.union(&p).count() as f64;
        best = best.max(inter / union);
    }
    best
}

pub fn non_sequiturs(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(3..=7);
            (0..len).map(|_| *NONSENSE.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ")
        })
        .collect()
}
