//! Evaluation: sentence-level BLEU-4 with optional brevity penalty, the
//! per-label averaging protocol, valid-sentence ratios and per-word
//! log-likelihoods.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Corpus, TokenId};
use crate::discriminator::{target_posteriors, Discriminator, DiscriminatorError};
use crate::lm::NGramModel;
use crate::sampler::{ScoredSentence, Snapshot};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("no reference sentences with labels {0:?}")]
    NoReferences(Vec<usize>),
    #[error("sentence {0} is empty")]
    EmptySentence(usize),
    #[error(transparent)]
    Constraint(#[from] DiscriminatorError),
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches and candidate n-gram total for one order.
pub fn clipped_matches<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> (usize, usize) {
    let total = candidate.len().saturating_sub(n - 1);
    if total == 0 {
        return (0, 0);
    }
    let refs = ngram_counts(reference, n);
    let matches = ngram_counts(candidate, n)
        .into_iter()
        .map(|(gram, c)| c.min(refs.get(gram).copied().unwrap_or(0)))
        .sum();
    (matches, total)
}

pub fn brevity_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    if candidate_len == 0 {
        return 0.0;
    }
    (1.0 - reference_len as f64 / candidate_len as f64).exp().min(1.0)
}

/// Sentence BLEU-4: geometric mean of clipped precisions for orders 1..4,
/// with add-one smoothing of numerator and denominator for orders 2..4,
/// optionally times the brevity penalty. An empty candidate scores 0.
pub fn bleu4<T: Eq + Hash>(candidate: &[T], reference: &[T], with_bp: bool) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=MAX_ORDER {
        let (matches, total) = clipped_matches(candidate, reference, n);
        let p = if n == 1 {
            matches as f64 / total as f64
        } else {
            (matches as f64 + 1.0) / (total as f64 + 1.0)
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    let score = (log_sum / MAX_ORDER as f64).exp();
    if with_bp {
        score * brevity_penalty(candidate.len(), reference.len())
    } else {
        score
    }
}

fn references_by_label(corpus: &Corpus) -> HashMap<&[usize], Vec<&[TokenId]>> {
    let mut refs: HashMap<&[usize], Vec<&[TokenId]>> = HashMap::new();
    for s in &corpus.sentences {
        refs.entry(&s.labels).or_default().push(&s.tokens);
    }
    refs
}

/// Per generated sentence, the mean BLEU against every corpus sentence with
/// the same labels; then the mean over generated sentences.
pub fn avg_bleu(generated: &[(Vec<TokenId>, Vec<usize>)], corpus: &Corpus, with_bp: bool) -> Result<f64, EvalError> {
    Ok(mean(&per_sentence_bleu(generated, corpus, with_bp)?))
}

pub fn per_sentence_bleu(
    generated: &[(Vec<TokenId>, Vec<usize>)],
    corpus: &Corpus,
    with_bp: bool,
) -> Result<Vec<f64>, EvalError> {
    if generated.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let refs = references_by_label(corpus);
    for (_, labels) in generated {
        if !refs.contains_key(labels.as_slice()) {
            return Err(EvalError::NoReferences(labels.clone()));
        }
    }
    Ok(generated
        .par_iter()
        .map(|(tokens, labels)| {
            let pool = &refs[labels.as_slice()];
            let sum: f64 = pool.iter().map(|r| bleu4(tokens, r, with_bp)).sum();
            sum / pool.len() as f64
        })
        .collect())
}

/// Draws `count` corpus sentences, cycling through the label combinations
/// present in the corpus so each gets an equal share, for the random
/// self-similarity baseline.
pub fn random_reference_sample<R: Rng + ?Sized>(
    corpus: &Corpus,
    count: usize,
    rng: &mut R,
) -> Vec<(Vec<TokenId>, Vec<usize>)> {
    let by_label: BTreeMap<&[usize], Vec<&[TokenId]>> = references_by_label(corpus).into_iter().collect();
    let groups: Vec<_> = by_label.into_iter().collect();
    if groups.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|g| {
            let (labels, pool) = &groups[g % groups.len()];
            (pool.choose(rng).unwrap().to_vec(), labels.to_vec())
        })
        .collect()
}

pub fn valid_ratio(items: &[ScoredSentence], threshold: f64) -> Result<f64, EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let valid = items.iter().filter(|s| s.is_valid(threshold)).count();
    Ok(valid as f64 / items.len() as f64)
}

/// Valid ratio of raw sentences, scoring them with `discs` first.
pub fn valid_ratio_of(
    sentences: &[Vec<TokenId>],
    discs: &[Discriminator],
    labels: &[usize],
    threshold: f64,
) -> Result<f64, EvalError> {
    if sentences.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut valid = 0;
    for s in sentences {
        if target_posteriors(discs, s, labels)?.iter().all(|&p| p > threshold) {
            valid += 1;
        }
    }
    Ok(valid as f64 / sentences.len() as f64)
}

/// Valid ratio per turn, in turn order.
pub fn valid_ratio_curve(snapshots: &[Snapshot], threshold: f64) -> Vec<(usize, f64)> {
    let mut per_turn: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for s in snapshots {
        let entry = per_turn.entry(s.turn).or_default();
        entry.1 += 1;
        if s.sentence.is_valid(threshold) {
            entry.0 += 1;
        }
    }
    per_turn
        .into_iter()
        .map(|(turn, (valid, total))| (turn, valid as f64 / total as f64))
        .collect()
}

/// Total log probability over word count, per sentence.
pub fn loglik_per_word(sentences: &[Vec<TokenId>], lm: &NGramModel, include_eos: bool) -> Result<Vec<f64>, EvalError> {
    sentences
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            if s.is_empty() {
                return Err(EvalError::EmptySentence(idx));
            }
            Ok(lm.sentence_logprob(s, include_eos).total_logprob / s.len() as f64)
        })
        .collect()
}

/// Equal-width histogram; returns `(bin center, count)` pairs.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, usize)> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in finite {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + (b as f64 + 0.5) * width, c))
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `key=value` lines for harness consumption.
pub fn format_summary(entries: &[(String, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Two whitespace-separated columns per line.
pub fn format_columns<A: std::fmt::Display, B: std::fmt::Display>(rows: &[(A, B)]) -> String {
    rows.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect()
}
