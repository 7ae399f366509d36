//! Per-dimension constraint classifiers and the joint constraint probability.
//!
//! Each discriminator is a multinomial naive Bayes model over the bag of
//! words of a sentence with add-alpha smoothing over the full vocabulary.
//! Dimensions are treated as independent, so the joint log probability of a
//! target label vector is the sum of the per-dimension log posteriors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{Corpus, TokenId, Vocabulary};
use crate::lm::{floor_ln, parse_header};

const MODEL_MAGIC: &str = "gibbsgen-nb";

#[derive(Debug, Error)]
pub enum DiscriminatorError {
    #[error("dimension index {0} is not in the schema")]
    NoSuchDimension(usize),
    #[error("class `{class}` of dimension `{dimension}` has no training sentences")]
    MissingClass { dimension: String, class: String },
    #[error("smoothing alpha must be finite and non-negative, got {0}")]
    InvalidAlpha(f64),
    #[error("expected {expected} target labels, got {found}")]
    TargetArity { expected: usize, found: usize },
    #[error("target class {class} out of range for dimension {dimension}")]
    TargetClass { dimension: usize, class: usize },
    #[error("model line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    dimension: usize,
    alpha: f64,
    vocab_size: usize,
    vocab_fingerprint: String,
    sentence_counts: Vec<u64>,
    token_counts: Vec<Vec<u64>>,
    log_priors: Vec<f64>,
    /// `[class][token]` smoothed log p(token | class).
    log_likelihood: Vec<Vec<f64>>,
}

pub fn train_discriminator(corpus: &Corpus, dimension: usize, alpha: f64) -> Result<Discriminator, DiscriminatorError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(DiscriminatorError::InvalidAlpha(alpha));
    }
    let dim = corpus
        .schema
        .dimensions()
        .get(dimension)
        .ok_or(DiscriminatorError::NoSuchDimension(dimension))?;
    let n_classes = dim.classes.len();
    let vocab_size = corpus.vocab.len();
    let mut sentence_counts = vec![0u64; n_classes];
    let mut token_counts = vec![vec![0u64; vocab_size]; n_classes];
    for s in &corpus.sentences {
        let class = s.labels[dimension];
        sentence_counts[class] += 1;
        for &tok in &s.tokens {
            token_counts[class][tok as usize] += 1;
        }
    }
    if let Some(missing) = sentence_counts.iter().position(|&c| c == 0) {
        return Err(DiscriminatorError::MissingClass {
            dimension: dim.name.clone(),
            class: dim.classes[missing].clone(),
        });
    }
    Ok(Discriminator::from_counts(
        dimension,
        alpha,
        corpus.vocab.fingerprint(),
        sentence_counts,
        token_counts,
    ))
}

impl Discriminator {
    fn from_counts(
        dimension: usize,
        alpha: f64,
        vocab_fingerprint: String,
        sentence_counts: Vec<u64>,
        token_counts: Vec<Vec<u64>>,
    ) -> Self {
        let vocab_size = token_counts.first().map_or(0, Vec::len);
        let n_sentences: u64 = sentence_counts.iter().sum();
        let log_priors = sentence_counts
            .iter()
            .map(|&c| floor_ln(c as f64 / n_sentences as f64))
            .collect();
        let log_likelihood = token_counts
            .iter()
            .map(|counts| {
                let total: u64 = counts.iter().sum();
                let denom = total as f64 + alpha * vocab_size as f64;
                counts.iter().map(|&c| floor_ln((c as f64 + alpha) / denom)).collect()
            })
            .collect();
        Self {
            dimension,
            alpha,
            vocab_size,
            vocab_fingerprint,
            sentence_counts,
            token_counts,
            log_priors,
            log_likelihood,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn num_classes(&self) -> usize {
        self.log_priors.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_compatible_with(&self, vocab: &Vocabulary) -> bool {
        self.vocab_size == vocab.len() && self.vocab_fingerprint == vocab.fingerprint()
    }

    pub fn priors(&self) -> Vec<f64> {
        self.log_priors.iter().map(|l| l.exp()).collect()
    }

    /// Unnormalized `log p(class) + sum log p(token | class)` per class.
    pub fn class_log_scores(&self, sentence: &[TokenId]) -> Vec<f64> {
        let mut scores = self.log_priors.clone();
        for &tok in sentence {
            for (score, ll) in scores.iter_mut().zip(&self.log_likelihood) {
                *score += ll[tok as usize];
            }
        }
        scores
    }

    pub fn log_posterior(&self, sentence: &[TokenId]) -> Vec<f64> {
        let scores = self.class_log_scores(sentence);
        let norm = log_sum_exp(&scores);
        scores.into_iter().map(|s| s - norm).collect()
    }

    /// Class posterior; an empty sentence yields the priors.
    pub fn posterior(&self, sentence: &[TokenId]) -> Vec<f64> {
        self.log_posterior(sentence).into_iter().map(f64::exp).collect()
    }

    /// Most probable class, lowest index on ties.
    pub fn predict(&self, sentence: &[TokenId]) -> usize {
        let scores = self.class_log_scores(sentence);
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        best
    }

    pub fn accuracy(&self, corpus: &Corpus) -> f64 {
        if corpus.is_empty() {
            return f64::NAN;
        }
        let correct = corpus
            .sentences
            .iter()
            .filter(|s| self.predict(&s.tokens) == s.labels[self.dimension])
            .count();
        correct as f64 / corpus.len() as f64
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{MODEL_MAGIC} v1 dimension={} classes={} alpha={} vocab={} vocab_size={}",
            self.dimension,
            self.num_classes(),
            self.alpha,
            self.vocab_fingerprint,
            self.vocab_size
        )
        .unwrap();
        for (class, counts) in self.token_counts.iter().enumerate() {
            let fields: Vec<String> = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(w, c)| format!("{w}:{c}"))
                .collect();
            writeln!(out, "{class}\t{}\t{}", self.sentence_counts[class], fields.join(" ")).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DiscriminatorError> {
        let err = |line: usize, message: String| DiscriminatorError::Parse { line, message };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let fields = parse_header(header, MODEL_MAGIC).map_err(|m| err(1, m))?;
        let get = |key: &str| {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| err(1, format!("header is missing `{key}`")))
        };
        let num = |key: &str| -> Result<usize, DiscriminatorError> {
            get(key)?.parse().map_err(|_| err(1, format!("bad `{key}`")))
        };
        let dimension = num("dimension")?;
        let classes = num("classes")?;
        let vocab_size = num("vocab_size")?;
        let alpha: f64 = get("alpha")?.parse().map_err(|_| err(1, "bad alpha".into()))?;
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(DiscriminatorError::InvalidAlpha(alpha));
        }
        let mut rows: BTreeMap<usize, (u64, Vec<u64>)> = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            let line_no = n + 2;
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(err(line_no, "expected class<TAB>sentences<TAB>counts".into()));
            }
            let class: usize = parts[0].parse().map_err(|_| err(line_no, "bad class".into()))?;
            let sentences: u64 = parts[1]
                .parse()
                .map_err(|_| err(line_no, "bad sentence count".into()))?;
            let mut counts = vec![0u64; vocab_size];
            for field in parts[2].split(' ').filter(|f| !f.is_empty()) {
                let (w, c) = field
                    .split_once(':')
                    .ok_or_else(|| err(line_no, format!("bad count `{field}`")))?;
                let w: usize = w.parse().map_err(|_| err(line_no, format!("bad id `{w}`")))?;
                let c: u64 = c.parse().map_err(|_| err(line_no, format!("bad count `{c}`")))?;
                *counts
                    .get_mut(w)
                    .ok_or_else(|| err(line_no, format!("id {w} out of range")))? = c;
            }
            if rows.insert(class, (sentences, counts)).is_some() {
                return Err(err(line_no, format!("duplicate class {class}")));
            }
        }
        if rows.len() != classes || rows.keys().copied().ne(0..classes) {
            return Err(err(1, format!("expected rows for classes 0..{classes}")));
        }
        let (sentence_counts, token_counts) = rows.into_values().unzip();
        Ok(Self::from_counts(
            dimension,
            alpha,
            get("vocab")?.to_string(),
            sentence_counts,
            token_counts,
        ))
    }
}

/// `sum_j log p(target_j | sentence)` under independent discriminators.
/// With no dimensions the result is 0, i.e. probability one.
pub fn joint_constraint_logprob(
    discs: &[Discriminator],
    sentence: &[TokenId],
    target: &[usize],
) -> Result<f64, DiscriminatorError> {
    check_target(discs, target)?;
    Ok(discs
        .iter()
        .zip(target)
        .map(|(d, &c)| d.log_posterior(sentence)[c])
        .sum())
}

/// Posterior of the target class in each dimension.
pub fn target_posteriors(
    discs: &[Discriminator],
    sentence: &[TokenId],
    target: &[usize],
) -> Result<Vec<f64>, DiscriminatorError> {
    check_target(discs, target)?;
    Ok(discs
        .iter()
        .zip(target)
        .map(|(d, &c)| d.posterior(sentence)[c])
        .collect())
}

pub fn check_target(discs: &[Discriminator], target: &[usize]) -> Result<(), DiscriminatorError> {
    if discs.len() != target.len() {
        return Err(DiscriminatorError::TargetArity {
            expected: discs.len(),
            found: target.len(),
        });
    }
    for (j, (d, &c)) in discs.iter().zip(target).enumerate() {
        if c >= d.num_classes() {
            return Err(DiscriminatorError::TargetClass { dimension: j, class: c });
        }
    }
    Ok(())
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ConstraintSchema;

    fn sentiment_corpus(data: &[(usize, &str)]) -> Corpus {
        let schema = ConstraintSchema::from_pairs(&[("sentiment", &["negative", "positive"])]).unwrap();
        let data: Vec<(Vec<usize>, Vec<&str>)> = data
            .iter()
            .map(|(c, s)| (vec![*c], s.split_whitespace().collect()))
            .collect();
        Corpus::from_labeled(schema, &data, 1)
    }

    #[test]
    fn identical_bags_give_priors() {
        // Both classes see a:2, b:2 in total; priors are 2/3 and 1/3.
        let c = sentiment_corpus(&[(0, "a b"), (0, "b a"), (1, "a b a b")]);
        let d = train_discriminator(&c, 0, 1.0).unwrap();
        let (a, b) = (c.vocab.id("a").unwrap(), c.vocab.id("b").unwrap());
        for s in [&[a][..], &[a, a, b], &[b, 0]] {
            let post = d.posterior(s);
            assert!((post[0] - 2.0 / 3.0).abs() < 1e-12, "{post:?}");
            assert!((post[1] - 1.0 / 3.0).abs() < 1e-12, "{post:?}");
        }
    }

    #[test]
    fn exclusive_token_dominates_as_alpha_vanishes() {
        let c = sentiment_corpus(&[(1, "great film"), (0, "bad film"), (0, "dull film")]);
        let d = train_discriminator(&c, 0, 0.0).unwrap();
        let great = c.vocab.id("great").unwrap();
        let film = c.vocab.id("film").unwrap();
        let post = d.posterior(&[film, great]);
        assert!(post[1] > 1.0 - 1e-9, "{post:?}");
    }

    #[test]
    fn empty_sentence_gives_priors_and_permutation_invariance() {
        let c = sentiment_corpus(&[(1, "great film"), (0, "bad film"), (0, "dull film")]);
        let d = train_discriminator(&c, 0, 1.0).unwrap();
        let post = d.posterior(&[]);
        assert!((post[0] - 2.0 / 3.0).abs() < 1e-12);
        let s = [4, 5, 6, 4];
        let (a, b) = (d.posterior(&s), d.posterior(&[6, 4, 4, 5]));
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12), "{a:?} {b:?}");
    }

    #[test]
    fn missing_class_is_named() {
        let c = sentiment_corpus(&[(1, "great film")]);
        let err = train_discriminator(&c, 0, 1.0).unwrap_err();
        assert!(err.to_string().contains("negative"), "{err}");
        assert!(matches!(
            train_discriminator(&c, 3, 1.0),
            Err(DiscriminatorError::NoSuchDimension(3))
        ));
        assert!(matches!(
            train_discriminator(&c, 0, -1.0),
            Err(DiscriminatorError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn joint_edge_cases() {
        let c = sentiment_corpus(&[(1, "great film"), (0, "bad film")]);
        let d = train_discriminator(&c, 0, 1.0).unwrap();
        let s = [4, 5];
        assert_eq!(joint_constraint_logprob(&[], &s, &[]).unwrap(), 0.0);
        let single = joint_constraint_logprob(std::slice::from_ref(&d), &s, &[1]).unwrap();
        assert!((single - d.posterior(&s)[1].ln()).abs() < 1e-12);
        assert!(matches!(
            joint_constraint_logprob(std::slice::from_ref(&d), &s, &[]),
            Err(DiscriminatorError::TargetArity { .. })
        ));
        assert!(matches!(
            joint_constraint_logprob(std::slice::from_ref(&d), &s, &[2]),
            Err(DiscriminatorError::TargetClass { .. })
        ));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let c = sentiment_corpus(&[(1, "great film"), (0, "bad film"), (0, "dull dull")]);
        let d = train_discriminator(&c, 0, 0.5).unwrap();
        let text = d.to_text();
        let back = Discriminator::from_text(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_text(), text);
        assert!(back.is_compatible_with(&c.vocab));
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
