//! Gibbs sampling over the word positions of a fixed-length sentence.
//!
//! Each update resamples one position from
//!
//! ```text
//! p(w_i | w_-i, c)  ∝  p(w_i | w_<i, w_>i) · p(c | w_1..n)
//! ```
//!
//! with the first factor taken from the language model's local window and the
//! second from the product of per-dimension discriminators. The support of
//! each update is the candidate set from [`crate::candidates::propose`]; when
//! `k` covers every word the chain targets the exact constrained posterior,
//! otherwise the truncated proposal is an approximation.

use rand::Rng;
use thiserror::Error;

use crate::candidates::propose;
use crate::corpus::{Corpus, TokenId};
use crate::discriminator::{
    check_target, joint_constraint_logprob, log_sum_exp, target_posteriors, Discriminator, DiscriminatorError,
};
use crate::lm::NGramModel;

/// Length of the training segment a seed sentence is cut from.
pub const SEED_SEGMENT: usize = 8;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot draw a seed sentence from an empty corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Constraint(#[from] DiscriminatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanOrder {
    /// Positions `0..n` in order, every turn.
    #[default]
    Sequential,
    /// `n` positions drawn uniformly with replacement per turn.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub turns: usize,
    pub burn_in: usize,
    pub length: usize,
    pub candidates: usize,
    pub threshold: f64,
    /// One class index per constraint dimension.
    pub labels: Vec<usize>,
    pub seed: u64,
    pub scan: ScanOrder,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            turns: 100,
            burn_in: 10,
            length: 8,
            candidates: 5,
            threshold: 0.6,
            labels: Vec::new(),
            seed: 0,
            scan: ScanOrder::Sequential,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.to_string()));
        if self.burn_in >= self.turns {
            return bad("burn-in must be smaller than the number of turns");
        }
        if self.length == 0 {
            return bad("sentence length must be at least 1");
        }
        if self.candidates == 0 {
            return bad("candidate count must be at least 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie strictly between 0 and 1");
        }
        Ok(())
    }

    pub fn expected_snapshots(&self) -> usize {
        (self.turns - self.burn_in) * self.length
    }
}

/// A sentence with its language-model score (EOS included) and the posterior
/// of the target class in each constraint dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSentence {
    pub tokens: Vec<TokenId>,
    pub lm_logprob: f64,
    pub posteriors: Vec<f64>,
}

impl ScoredSentence {
    pub fn score(
        tokens: Vec<TokenId>,
        model: &NGramModel,
        discs: &[Discriminator],
        labels: &[usize],
    ) -> Result<Self, DiscriminatorError> {
        let posteriors = target_posteriors(discs, &tokens, labels)?;
        let lm_logprob = model.sentence_logprob(&tokens, true).total_logprob;
        Ok(Self {
            tokens,
            lm_logprob,
            posteriors,
        })
    }

    /// Every target posterior strictly above `threshold`. Vacuously true with
    /// no constraints.
    pub fn is_valid(&self, threshold: f64) -> bool {
        self.posteriors.iter().all(|&p| p > threshold)
    }

    pub fn min_posterior(&self) -> f64 {
        self.posteriors.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub turn: usize,
    pub position: usize,
    pub sentence: ScoredSentence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Index of the chosen item in the input sequence.
    pub index: usize,
    pub sentence: ScoredSentence,
    /// False when nothing passed the threshold and the fallback was used.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    pub seed: Vec<TokenId>,
    pub output: Option<Selection>,
    pub snapshots: Vec<Snapshot>,
    pub valid_count: usize,
    pub total_count: usize,
}

/// Cuts a seed from a uniformly chosen training sentence: its first
/// `min(8, len)` words, truncated to `n` or right-padded with UNK up to `n`.
pub fn make_seed<R: Rng + ?Sized>(corpus: &Corpus, n: usize, rng: &mut R) -> Result<Vec<TokenId>, SamplerError> {
    if corpus.is_empty() {
        return Err(SamplerError::EmptyCorpus);
    }
    let source = &corpus.sentences[rng.random_range(0..corpus.len())].tokens;
    Ok(seed_from_segment(source, n, corpus.vocab.specials().unk))
}

pub fn seed_from_segment(source: &[TokenId], n: usize, unk: TokenId) -> Vec<TokenId> {
    let segment = &source[..source.len().min(SEED_SEGMENT)];
    let mut seed: Vec<TokenId> = segment.iter().copied().take(n).collect();
    seed.resize(n, unk);
    seed
}

/// Normalized full-conditional over the candidate set at position `i`.
pub fn step_distribution(
    state: &[TokenId],
    i: usize,
    model: &NGramModel,
    discs: &[Discriminator],
    labels: &[usize],
    k: usize,
) -> Result<Vec<(TokenId, f64)>, SamplerError> {
    let candidates = propose(model, state, i, k);
    let mut scratch = state.to_vec();
    let mut log_weights = Vec::with_capacity(candidates.len());
    for c in &candidates {
        scratch[i] = c.token;
        log_weights.push(c.score + joint_constraint_logprob(discs, &scratch, labels)?);
    }
    let norm = log_sum_exp(&log_weights);
    Ok(candidates
        .iter()
        .zip(log_weights)
        .map(|(c, lw)| (c.token, (lw - norm).exp()))
        .collect())
}

/// One Gibbs update of position `i`.
pub fn gibbs_step<R: Rng + ?Sized>(
    state: &[TokenId],
    i: usize,
    model: &NGramModel,
    discs: &[Discriminator],
    labels: &[usize],
    k: usize,
    rng: &mut R,
) -> Result<Vec<TokenId>, SamplerError> {
    let dist = step_distribution(state, i, model, discs, labels, k)?;
    let mut next = state.to_vec();
    next[i] = sample_categorical(&dist, rng);
    Ok(next)
}

fn sample_categorical<R: Rng + ?Sized>(dist: &[(TokenId, f64)], rng: &mut R) -> TokenId {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(tok, p) in dist {
        acc += p;
        if u < acc {
            return tok;
        }
    }
    // Rounding left `acc` a hair below one.
    dist.iter().rev().find(|(_, p)| *p > 0.0).map_or(dist[0].0, |d| d.0)
}

/// Runs one chain: seed, `turns` sweeps, one snapshot per position update
/// once the burn-in turns are over, then output selection.
pub fn run<R: Rng + ?Sized>(
    config: &SamplerConfig,
    corpus: &Corpus,
    model: &NGramModel,
    discs: &[Discriminator],
    rng: &mut R,
) -> Result<GenerationResult, SamplerError> {
    config.validate()?;
    check_target(discs, &config.labels)?;
    let seed = make_seed(corpus, config.length, rng)?;
    run_from(config, seed, model, discs, rng)
}

/// [`run`] starting from an explicit seed sentence.
pub fn run_from<R: Rng + ?Sized>(
    config: &SamplerConfig,
    seed: Vec<TokenId>,
    model: &NGramModel,
    discs: &[Discriminator],
    rng: &mut R,
) -> Result<GenerationResult, SamplerError> {
    config.validate()?;
    check_target(discs, &config.labels)?;
    if seed.len() != config.length {
        return Err(SamplerError::InvalidConfig(format!(
            "seed has {} words, expected {}",
            seed.len(),
            config.length
        )));
    }
    let n = config.length;
    let labels = &config.labels;
    let mut state = seed.clone();
    let mut snapshots = Vec::with_capacity(config.expected_snapshots());
    for turn in 0..config.turns {
        for step in 0..n {
            let i = match config.scan {
                ScanOrder::Sequential => step,
                ScanOrder::Random => rng.random_range(0..n),
            };
            state = gibbs_step(&state, i, model, discs, labels, config.candidates, rng)?;
            if turn >= config.burn_in {
                snapshots.push(Snapshot {
                    turn,
                    position: i,
                    sentence: ScoredSentence::score(state.clone(), model, discs, labels)?,
                });
            }
        }
    }
    let valid_count = snapshots
        .iter()
        .filter(|s| s.sentence.is_valid(config.threshold))
        .count();
    let output = select_output(snapshots.iter().map(|s| &s.sentence), config.threshold);
    Ok(GenerationResult {
        seed,
        output,
        total_count: snapshots.len(),
        valid_count,
        snapshots,
    })
}

/// Among items whose every posterior exceeds `threshold`, the one with the
/// highest language-model score (earliest on ties). If none qualifies, the
/// item with the largest minimum posterior, flagged as not valid.
pub fn select_output<'a>(items: impl IntoIterator<Item = &'a ScoredSentence>, threshold: f64) -> Option<Selection> {
    let mut best_valid: Option<(usize, &ScoredSentence)> = None;
    let mut best_fallback: Option<(usize, &ScoredSentence)> = None;
    for (idx, item) in items.into_iter().enumerate() {
        if item.is_valid(threshold) {
            if best_valid.is_none_or(|(_, b)| item.lm_logprob > b.lm_logprob) {
                best_valid = Some((idx, item));
            }
        } else if best_fallback.is_none_or(|(_, b)| item.min_posterior() > b.min_posterior()) {
            best_fallback = Some((idx, item));
        }
    }
    match (best_valid, best_fallback) {
        (Some((index, s)), _) => Some(Selection {
            index,
            sentence: s.clone(),
            valid: true,
        }),
        (None, Some((index, s))) => Some(Selection {
            index,
            sentence: s.clone(),
            valid: false,
        }),
        (None, None) => None,
    }
}
