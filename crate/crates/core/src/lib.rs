//! Constrained sentence generation by Gibbs sampling.
//!
//! A fixed-length sentence is revised one position at a time. Each update
//! samples the new word from the product of a constraint-free language model
//! score and the probability that the whole sentence satisfies the requested
//! labels, as judged by one discriminator per constraint dimension. Beam
//! search and reject sampling baselines, an evaluation harness, and a
//! brute-force oracle for small instances sit alongside the sampler.

pub mod baselines;
pub mod candidates;
pub mod corpus;
pub mod discriminator;
pub mod eval;
pub mod lm;
pub mod oracle;
pub mod pipeline;
pub mod sampler;

/// Probabilities are clamped to this value before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

pub use baselines::{beam_search, reject_sample, train_conditional_lm, ConditionalLM, Hypothesis, RejectResult};
pub use candidates::{propose, Candidate};
pub use corpus::{
    build_vocabulary, decode, encode, load_corpus, ConstraintSchema, Corpus, CorpusError, Dimension, LabeledSentence,
    TokenId, Vocabulary,
};
pub use discriminator::{joint_constraint_logprob, train_discriminator, Discriminator};
pub use eval::{avg_bleu, bleu4, loglik_per_word, valid_ratio, valid_ratio_curve};
pub use lm::{train_ngram, NGramModel, SentenceScore, Smoothing};
pub use oracle::{exact_posterior, tv_distance, Distribution};
pub use pipeline::{Method, ModelBundle, TrainOptions};
pub use sampler::{
    gibbs_step, make_seed, run, select_output, GenerationResult, SamplerConfig, ScanOrder, ScoredSentence, Selection,
    Snapshot,
};
