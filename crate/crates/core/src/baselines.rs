//! Left-to-right baselines: beam search over a label-conditioned language
//! model and reject sampling from the unconstrained one.
//!
//! Both emit sentences of at least one word. The conditional model is a
//! separate n-gram model per label combination, trained on the sentences
//! carrying exactly that combination.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::corpus::{Corpus, TokenId};
use crate::discriminator::{check_target, Discriminator, DiscriminatorError};
use crate::lm::{floor_ln, train_ngram, LmError, NGramModel, Smoothing};
use crate::sampler::{select_output, ScoredSentence, Selection};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("no training sentences for label combination {0}")]
    MissingCombination(String),
    #[error("no conditional model for labels {0:?}")]
    UnknownLabels(Vec<usize>),
    #[error("{0} must be at least 1")]
    ZeroParameter(&'static str),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Constraint(#[from] DiscriminatorError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalLM {
    models: BTreeMap<Vec<usize>, NGramModel>,
}

pub fn train_conditional_lm(
    corpus: &Corpus,
    order: usize,
    smoothing: Smoothing,
) -> Result<ConditionalLM, BaselineError> {
    let mut models = BTreeMap::new();
    for labels in corpus.schema.combinations() {
        let subset = corpus.filter_labels(&labels);
        if subset.is_empty() {
            let name = if labels.is_empty() {
                "(none)".to_string()
            } else {
                corpus.schema.describe(&labels)
            };
            return Err(BaselineError::MissingCombination(name));
        }
        models.insert(labels, train_ngram(&subset, order, smoothing)?);
    }
    Ok(ConditionalLM { models })
}

impl ConditionalLM {
    pub fn from_models(models: BTreeMap<Vec<usize>, NGramModel>) -> Self {
        Self { models }
    }

    pub fn model(&self, labels: &[usize]) -> Option<&NGramModel> {
        self.models.get(labels)
    }

    pub fn models(&self) -> &BTreeMap<Vec<usize>, NGramModel> {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    /// Log probability, EOS term included when `completed`.
    pub logprob: f64,
    pub completed: bool,
}

fn hypothesis_order(a: &(Vec<TokenId>, f64), b: &(Vec<TokenId>, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Beam search keeping the `beam_size` best prefixes per step. Hypotheses
/// that emit EOS move to a completed pool; the best completed hypothesis is
/// returned, or the best live prefix at `max_len` when none completed.
pub fn beam_search(
    clm: &ConditionalLM,
    labels: &[usize],
    beam_size: usize,
    max_len: usize,
) -> Result<Hypothesis, BaselineError> {
    let model = clm
        .model(labels)
        .ok_or_else(|| BaselineError::UnknownLabels(labels.to_vec()))?;
    beam_search_model(model, beam_size, max_len)
}

pub fn beam_search_model(model: &NGramModel, beam_size: usize, max_len: usize) -> Result<Hypothesis, BaselineError> {
    if beam_size == 0 {
        return Err(BaselineError::ZeroParameter("beam size"));
    }
    if max_len == 0 {
        return Err(BaselineError::ZeroParameter("maximum length"));
    }
    let eos = model.specials().eos;
    let events: Vec<TokenId> = model.events().collect();
    let mut live: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    let mut best_done: Option<(Vec<TokenId>, f64)> = None;

    // Step `max_len` only closes full-length prefixes with EOS.
    for step in 0..=max_len {
        let mut expanded = Vec::with_capacity(live.len() * events.len());
        for (prefix, lp) in &live {
            let dist = model.distribution(prefix);
            for &w in &events {
                let next_lp = lp + floor_ln(dist[w as usize]);
                if w == eos {
                    if step > 0 && best_done.as_ref().is_none_or(|b| next_lp > b.1) {
                        best_done = Some((prefix.clone(), next_lp));
                    }
                } else if step < max_len {
                    let mut tokens = prefix.clone();
                    tokens.push(w);
                    expanded.push((tokens, next_lp));
                }
            }
        }
        if expanded.len() > beam_size {
            expanded.select_nth_unstable_by(beam_size - 1, hypothesis_order);
            expanded.truncate(beam_size);
        }
        expanded.sort_by(hypothesis_order);
        if step == max_len {
            break;
        }
        live = expanded;
        // Extending a prefix only lowers its score.
        if let Some(done) = &best_done {
            if live.first().is_none_or(|l| l.1 <= done.1) {
                break;
            }
        }
    }

    let (tokens, completed) = match best_done {
        Some((tokens, _)) => (tokens, true),
        None => (live.swap_remove(0).0, false),
    };
    let logprob = model.sentence_logprob(&tokens, completed).total_logprob;
    Ok(Hypothesis {
        tokens,
        logprob,
        completed,
    })
}

/// Top-`top_w` truncation of a next-event distribution, renormalized.
/// Candidates are ranked by probability, ties to the lower id.
pub fn truncated_distribution(
    dist: &[f64],
    allowed: impl Iterator<Item = TokenId>,
    top_w: usize,
) -> Vec<(TokenId, f64)> {
    let mut ranked: Vec<(TokenId, f64)> = allowed.map(|w| (w, dist[w as usize])).collect();
    let order = |a: &(TokenId, f64), b: &(TokenId, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if top_w < ranked.len() {
        ranked.select_nth_unstable_by(top_w - 1, order);
        ranked.truncate(top_w);
    }
    ranked.sort_by(order);
    let total: f64 = ranked.iter().map(|r| r.1).sum();
    ranked.iter_mut().for_each(|r| r.1 /= total);
    ranked
}

/// Draws one sentence left to right from the top-`top_w` truncated model,
/// stopping at EOS or `max_len` words. EOS is not allowed as the first event.
pub fn sample_sentence<R: Rng + ?Sized>(model: &NGramModel, top_w: usize, max_len: usize, rng: &mut R) -> Vec<TokenId> {
    let eos = model.specials().eos;
    let mut tokens = Vec::new();
    while tokens.len() < max_len {
        let dist = model.distribution(&tokens);
        let first = tokens.is_empty();
        let allowed = model.events().filter(|&w| !(first && w == eos));
        let choices = truncated_distribution(&dist, allowed, top_w);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = choices[choices.len() - 1].0;
        for &(w, p) in &choices {
            acc += p;
            if u < acc {
                pick = w;
                break;
            }
        }
        if pick == eos {
            break;
        }
        tokens.push(pick);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectResult {
    pub output: Option<Selection>,
    pub samples: Vec<ScoredSentence>,
}

impl RejectResult {
    pub fn valid_count(&self, threshold: f64) -> usize {
        self.samples.iter().filter(|s| s.is_valid(threshold)).count()
    }
}

/// Draws `samples` unconstrained sentences and applies the same selection
/// rule as the Gibbs sampler.
#[allow(clippy::too_many_arguments)]
pub fn reject_sample<R: Rng + ?Sized>(
    lm: &NGramModel,
    discs: &[Discriminator],
    labels: &[usize],
    samples: usize,
    threshold: f64,
    top_w: usize,
    max_len: usize,
    rng: &mut R,
) -> Result<RejectResult, BaselineError> {
    if samples == 0 {
        return Err(BaselineError::ZeroParameter("sample count"));
    }
    if top_w == 0 {
        return Err(BaselineError::ZeroParameter("top-w"));
    }
    if max_len == 0 {
        return Err(BaselineError::ZeroParameter("maximum length"));
    }
    check_target(discs, labels)?;
    let drawn = (0..samples)
        .map(|_| {
            let tokens = sample_sentence(lm, top_w, max_len, rng);
            ScoredSentence::score(tokens, lm, discs, labels)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RejectResult {
        output: select_output(&drawn, threshold),
        samples: drawn,
    })
}
