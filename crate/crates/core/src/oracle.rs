//! Brute-force ground truth for small instances: the exact constrained
//! sentence distribution and total variation distance.
//!
//! Scoring goes through the same language-model and discriminator calls the
//! sampler uses, so a mismatch between the two points at the sampler.

use thiserror::Error;

use crate::corpus::TokenId;
use crate::discriminator::{joint_constraint_logprob, log_sum_exp, Discriminator, DiscriminatorError};
use crate::lm::NGramModel;

pub const MAX_SUPPORT: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("support of {0} sequences exceeds the enumeration limit")]
    TooLarge(String),
    #[error("distributions have different supports ({0} vs {1})")]
    SupportMismatch(usize, usize),
    #[error("alphabet must be non-empty and free of duplicates")]
    BadAlphabet,
    #[error(transparent)]
    Constraint(#[from] DiscriminatorError),
}

/// A distribution over all length-`length` sequences of `alphabet`, indexed
/// in mixed radix with the first position most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub alphabet: Vec<TokenId>,
    pub length: usize,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn support_size(alphabet: usize, length: usize) -> Option<usize> {
        let mut size: usize = 1;
        for _ in 0..length {
            size = size.checked_mul(alphabet)?;
        }
        Some(size)
    }

    pub fn index_of(&self, sequence: &[TokenId]) -> Option<usize> {
        if sequence.len() != self.length {
            return None;
        }
        sequence.iter().try_fold(0usize, |acc, tok| {
            let digit = self.alphabet.iter().position(|a| a == tok)?;
            Some(acc * self.alphabet.len() + digit)
        })
    }

    pub fn sequence(&self, mut index: usize) -> Vec<TokenId> {
        let base = self.alphabet.len();
        let mut seq = vec![0; self.length];
        for slot in seq.iter_mut().rev() {
            *slot = self.alphabet[index % base];
            index /= base;
        }
        seq
    }

    /// Normalized histogram of `samples`. Sequences outside the support
    /// are counted in the total but land in no bin.
    pub fn empirical<'a>(
        alphabet: Vec<TokenId>,
        length: usize,
        samples: impl IntoIterator<Item = &'a [TokenId]>,
    ) -> Result<Self, OracleError> {
        let size = checked_support(&alphabet, length)?;
        let mut dist = Self {
            alphabet,
            length,
            probs: vec![0.0; size],
        };
        let mut total = 0usize;
        for s in samples {
            total += 1;
            if let Some(idx) = dist.index_of(s) {
                dist.probs[idx] += 1.0;
            }
        }
        if total > 0 {
            dist.probs.iter_mut().for_each(|p| *p /= total as f64);
        }
        Ok(dist)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

fn checked_support(alphabet: &[TokenId], length: usize) -> Result<usize, OracleError> {
    let mut sorted = alphabet.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if alphabet.is_empty() || sorted.len() != alphabet.len() {
        return Err(OracleError::BadAlphabet);
    }
    match Distribution::support_size(alphabet.len(), length) {
        Some(size) if size <= MAX_SUPPORT => Ok(size),
        _ => Err(OracleError::TooLarge(format!("{}^{length}", alphabet.len()))),
    }
}

/// `p(w | c) ∝ p(w) · Π_j p(c_j | w)` over every length-`n` sequence of
/// `alphabet`, with `p(w)` the language-model sentence probability (EOS
/// term included iff `include_eos`).
pub fn exact_posterior(
    lm: &NGramModel,
    discs: &[Discriminator],
    labels: &[usize],
    n: usize,
    alphabet: &[TokenId],
    include_eos: bool,
) -> Result<Distribution, OracleError> {
    let size = checked_support(alphabet, n)?;
    let mut dist = Distribution {
        alphabet: alphabet.to_vec(),
        length: n,
        probs: Vec::with_capacity(size),
    };
    let mut log_weights = Vec::with_capacity(size);
    for idx in 0..size {
        let seq = dist.sequence(idx);
        let lp = lm.sentence_logprob(&seq, include_eos).total_logprob;
        log_weights.push(lp + joint_constraint_logprob(discs, &seq, labels)?);
    }
    let norm = log_sum_exp(&log_weights);
    dist.probs = log_weights.into_iter().map(|lw| (lw - norm).exp()).collect();
    Ok(dist)
}

/// `½ Σ |p − q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64, OracleError> {
    if p.len() != q.len() {
        return Err(OracleError::SupportMismatch(p.len(), q.len()));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Counts normalized to a probability vector.
pub fn normalize_counts(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}
