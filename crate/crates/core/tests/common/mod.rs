#![allow(dead_code)]

use gibbsgen_core::{ConstraintSchema, Corpus};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sentiment_schema() -> ConstraintSchema {
    ConstraintSchema::from_pairs(&[("sentiment", &["negative", "positive"])]).unwrap()
}

pub fn build(schema: ConstraintSchema, data: &[(usize, &str)], min_count: usize) -> Corpus {
    let rows: Vec<(Vec<usize>, Vec<&str>)> = data
        .iter()
        .map(|(l, s)| (vec![*l], s.split_whitespace().collect()))
        .collect();
    Corpus::from_labeled(schema, &rows, min_count)
}

/// Four content words; `a`, `b` lean positive and `c`, `d` negative.
pub fn toy_corpus() -> Corpus {
    build(
        sentiment_schema(),
        &[
            (1, "a b a"),
            (1, "a a"),
            (1, "b a b d"),
            (1, "a b"),
            (1, "b"),
            (0, "c d"),
            (0, "d c c"),
            (0, "c a d"),
            (0, "d"),
            (0, "c d c b"),
        ],
        1,
    )
}

const NOUNS: &[&str] = &[
    "movie",
    "film",
    "plot",
    "story",
    "acting",
    "ending",
    "cast",
    "script",
    "director",
    "music",
    "scene",
    "dialogue",
    "pacing",
    "camera",
    "soundtrack",
    "villain",
    "hero",
    "lead",
    "score",
    "effects",
    "premise",
    "finale",
    "editing",
    "sequel",
    "comedy",
    "drama",
    "thriller",
    "romance",
    "cinematography",
    "performance",
    "writing",
    "character",
    "twist",
    "humor",
    "runtime",
    "setting",
    "costume",
    "studio",
    "trailer",
    "opening",
];
const POS_ADJ: &[&str] = &[
    "great",
    "wonderful",
    "excellent",
    "fun",
    "moving",
    "charming",
    "brilliant",
    "beautiful",
    "clever",
    "funny",
    "touching",
    "gripping",
    "fresh",
    "smart",
    "powerful",
    "delightful",
    "stunning",
    "memorable",
    "superb",
    "enjoyable",
    "heartfelt",
    "witty",
    "solid",
    "engaging",
    "lovely",
];
const NEG_ADJ: &[&str] = &[
    "bad",
    "boring",
    "awful",
    "dull",
    "weak",
    "painful",
    "terrible",
    "stupid",
    "messy",
    "flat",
    "lifeless",
    "tedious",
    "predictable",
    "clumsy",
    "forgettable",
    "annoying",
    "bland",
    "silly",
    "lazy",
    "pointless",
    "shallow",
    "sloppy",
    "tired",
    "confusing",
    "ugly",
];
const NEUTRAL_ADJ: &[&str] = &[
    "long",
    "different",
    "quiet",
    "simple",
    "strange",
    "old",
    "new",
    "short",
    "dark",
    "familiar",
    "slow",
    "loud",
    "odd",
    "serious",
    "unusual",
];
const VERBS: &[&str] = &["was", "is", "seemed", "felt", "looked", "sounded", "became", "remained"];
const ADVS: &[&str] = &[
    "really", "very", "quite", "so", "truly", "rather", "pretty", "fairly", "almost", "mostly",
];
const PEOPLE: &[&str] = &[
    "i",
    "we",
    "my wife",
    "my friend",
    "the kids",
    "everyone",
    "the audience",
    "my brother",
];
const POS_VERBS: &[&str] = &["loved", "enjoyed", "liked", "admired", "appreciated", "adored"];
const NEG_VERBS: &[&str] = &["hated", "disliked", "regretted", "endured", "resented", "tolerated"];
const JOINS: &[&str] = &["and", "but", ",", "because", "although", "while", "so"];

fn pick<'a, R: Rng>(words: &[&'a str], rng: &mut R) -> &'a str {
    words.choose(rng).unwrap()
}

/// Zipf-like choice: rank `r` is drawn with weight `1 / (r + 1)`.
fn zipf<'a, R: Rng>(words: &[&'a str], rng: &mut R) -> &'a str {
    let weights = WeightedIndex::new((0..words.len()).map(|r| 1.0 / (r + 1) as f64)).unwrap();
    words[weights.sample(rng)]
}

fn clause<R: Rng>(polarity: usize, rng: &mut R, out: &mut Vec<String>) {
    let adj = |rng: &mut R| match polarity {
        0 => zipf(NEG_ADJ, rng),
        1 => zipf(POS_ADJ, rng),
        _ => zipf(NEUTRAL_ADJ, rng),
    };
    let mut push = |words: &[&str]| out.extend(words.iter().map(|w| w.to_string()));
    match rng.random_range(0..5) {
        0 => {
            push(&["the", zipf(NOUNS, rng), pick(VERBS, rng)]);
            if rng.random::<f64>() < 0.5 {
                push(&[pick(ADVS, rng)]);
            }
            push(&[adj(rng)]);
        }
        1 => {
            let verb = match polarity {
                0 => pick(NEG_VERBS, rng),
                1 => pick(POS_VERBS, rng),
                _ => "watched",
            };
            push(&[pick(PEOPLE, rng), verb, "the", zipf(NOUNS, rng)]);
        }
        2 => push(&["it", "was", "a", adj(rng), zipf(NOUNS, rng)]),
        3 => push(&[
            "the",
            zipf(NOUNS, rng),
            "of",
            "the",
            zipf(NOUNS, rng),
            pick(VERBS, rng),
            adj(rng),
        ]),
        _ => push(&["i", "found", "the", zipf(NOUNS, rng), pick(ADVS, rng), adj(rng)]),
    }
}

/// Review-like sentences from a small stochastic grammar: one to three
/// clauses, Zipf-distributed word choice, and clauses that mostly but not
/// always agree with the sentence label. Labels alternate.
pub fn sentiment_sentences(count: usize, seed: u64) -> Vec<(usize, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let label = i % 2;
            let clauses = rng.random_range(1..=3);
            let mut words = Vec::new();
            for c in 0..clauses {
                if c > 0 {
                    words.push(pick(JOINS, &mut rng).to_string());
                }
                let u: f64 = rng.random();
                let polarity = if u < 0.7 {
                    label
                } else if u < 0.9 {
                    2
                } else {
                    1 - label
                };
                clause(polarity, &mut rng, &mut words);
            }
            (label, words.join(" "))
        })
        .collect()
}

pub fn sentiment_corpus(count: usize, seed: u64) -> Corpus {
    let data = sentiment_sentences(count, seed);
    let borrowed: Vec<(usize, &str)> = data.iter().map(|(l, s)| (*l, s.as_str())).collect();
    build(sentiment_schema(), &borrowed, 1)
}
