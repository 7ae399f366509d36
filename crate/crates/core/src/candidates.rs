//! Candidate generator: restricts each Gibbs update to the `k` words that
//! best fit the surrounding context under the language model.

use std::cmp::Ordering;

use crate::corpus::TokenId;
use crate::lm::NGramModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub token: TokenId,
    /// Local window log score, EOS term excluded.
    pub score: f64,
}

/// Ranks every word id by its local window score at position `i` and keeps
/// the best `k` (ties to the lower id). The word currently at `i` is always
/// included, appended last when it falls outside the top `k`, so the result
/// holds at most `k + 1` distinct ids in non-increasing score order.
pub fn propose(model: &NGramModel, sentence: &[TokenId], i: usize, k: usize) -> Vec<Candidate> {
    assert!(k >= 1, "candidate count must be positive");
    let words: Vec<TokenId> = model.word_ids().collect();
    let scores = model.window_scores(sentence, i, words.iter().copied(), false);
    let mut ranked: Vec<Candidate> = words
        .into_iter()
        .zip(scores)
        .map(|(token, score)| Candidate { token, score })
        .collect();
    ranked.sort_by(rank_order);

    let incumbent = sentence[i];
    let mut out: Vec<Candidate> = ranked.iter().take(k).copied().collect();
    if !out.iter().any(|c| c.token == incumbent) {
        let score = ranked
            .iter()
            .find(|c| c.token == incumbent)
            .map(|c| c.score)
            .unwrap_or_else(|| model.local_window_logprob(sentence, i, incumbent, false));
        out.push(Candidate {
            token: incumbent,
            score,
        });
    }
    out
}

fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score.total_cmp(&a.score).then(a.token.cmp(&b.token))
}
