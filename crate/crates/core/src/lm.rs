//! Constraint-free n-gram language model with interpolated Witten–Bell
//! smoothing.
//!
//! The event space is every vocabulary id except BOS and PAD: content words,
//! UNK and EOS. Contexts are the previous `order - 1` tokens with BOS padding
//! on the left. For a context `h` with `c(h)` observed events of `t(h)`
//! distinct types,
//!
//! ```text
//! p(w | h) = (c(h, w) + t(h) * p(w | h')) / (c(h) + t(h))
//! ```
//!
//! where `h'` drops the oldest token of `h`. The recursion bottoms out at the
//! uniform distribution over the event space, so every event has positive
//! probability and every conditional sums to one.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{Corpus, Specials, TokenId, Vocabulary};
use crate::PROB_FLOOR;

const MODEL_MAGIC: &str = "gibbsgen-ngram";

#[derive(Debug, Error)]
pub enum LmError {
    #[error("cannot train a language model on an empty corpus")]
    EmptyCorpus,
    #[error("n-gram order must be at least 2, got {0}")]
    InvalidOrder(usize),
    #[error("model line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    #[default]
    WittenBell,
}

impl Smoothing {
    pub fn name(self) -> &'static str {
        match self {
            Smoothing::WittenBell => "witten-bell",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "witten-bell" | "wb" => Some(Smoothing::WittenBell),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ContextStats {
    total: u64,
    counts: HashMap<TokenId, u64>,
}

impl ContextStats {
    fn types(&self) -> u64 {
        self.counts.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceScore {
    pub total_logprob: f64,
    /// One entry per word, plus a trailing EOS entry when EOS was scored.
    pub per_word: Vec<f64>,
    /// Number of words, excluding BOS/EOS.
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    smoothing: Smoothing,
    vocab_size: usize,
    specials: Specials,
    vocab_fingerprint: String,
    contexts: HashMap<Box<[TokenId]>, ContextStats>,
}

pub fn train_ngram(corpus: &Corpus, order: usize, smoothing: Smoothing) -> Result<NGramModel, LmError> {
    if order < 2 {
        return Err(LmError::InvalidOrder(order));
    }
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    let mut model = NGramModel {
        order,
        smoothing,
        vocab_size: corpus.vocab.len(),
        specials: corpus.vocab.specials(),
        vocab_fingerprint: corpus.vocab.fingerprint(),
        contexts: HashMap::new(),
    };
    for sentence in &corpus.sentences {
        model.add_sentence(&sentence.tokens);
    }
    Ok(model)
}

impl NGramModel {
    fn add_sentence(&mut self, tokens: &[TokenId]) {
        let padded = self.pad(tokens, true);
        let hist = self.order - 1;
        for j in hist..padded.len() {
            let event = padded[j];
            for m in 0..=hist {
                let h = &padded[j - m..j];
                let stats = match self.contexts.get_mut(h) {
                    Some(s) => s,
                    None => self.contexts.entry(h.into()).or_default(),
                };
                stats.total += 1;
                *stats.counts.entry(event).or_default() += 1;
            }
        }
    }

    /// `[BOS; order-1] ++ tokens (++ EOS)`.
    fn pad(&self, tokens: &[TokenId], eos: bool) -> Vec<TokenId> {
        let mut padded = Vec::with_capacity(tokens.len() + self.order);
        padded.extend(std::iter::repeat_n(self.specials.bos, self.order - 1));
        padded.extend_from_slice(tokens);
        if eos {
            padded.push(self.specials.eos);
        }
        padded
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn specials(&self) -> Specials {
        self.specials
    }

    pub fn vocab_fingerprint(&self) -> &str {
        &self.vocab_fingerprint
    }

    pub fn is_compatible_with(&self, vocab: &Vocabulary) -> bool {
        self.vocab_size == vocab.len() && self.vocab_fingerprint == vocab.fingerprint()
    }

    pub fn num_events(&self) -> usize {
        self.vocab_size - 2
    }

    pub fn is_event(&self, id: TokenId) -> bool {
        (id as usize) < self.vocab_size && id != self.specials.bos && id != self.specials.pad
    }

    /// Event ids in ascending order: UNK, EOS and all content words.
    pub fn events(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.vocab_size as TokenId).filter(|&id| self.is_event(id))
    }

    /// Ids that may fill a sentence position: the event space minus EOS.
    pub fn word_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.events().filter(|&id| id != self.specials.eos)
    }

    /// Probability of `next` given a context of exactly `order - 1` tokens.
    pub fn prob_in_context(&self, context: &[TokenId], next: TokenId) -> f64 {
        debug_assert_eq!(context.len(), self.order - 1);
        if !self.is_event(next) {
            return 0.0;
        }
        let mut p = 1.0 / self.num_events() as f64;
        for m in 0..=context.len() {
            let h = &context[context.len() - m..];
            // A longer context can only have been seen if its suffix was.
            let Some(stats) = self.contexts.get(h) else { break };
            let c = stats.counts.get(&next).copied().unwrap_or(0) as f64;
            let t = stats.types() as f64;
            p = (c + t * p) / (stats.total as f64 + t);
        }
        p
    }

    /// Full next-event distribution indexed by token id. BOS and PAD get 0.
    pub fn distribution_in_context(&self, context: &[TokenId]) -> Vec<f64> {
        debug_assert_eq!(context.len(), self.order - 1);
        let base = 1.0 / self.num_events() as f64;
        let mut p = vec![base; self.vocab_size];
        p[self.specials.bos as usize] = 0.0;
        p[self.specials.pad as usize] = 0.0;
        for m in 0..=context.len() {
            let h = &context[context.len() - m..];
            let Some(stats) = self.contexts.get(h) else { break };
            let t = stats.types() as f64;
            let denom = stats.total as f64 + t;
            let scale = t / denom;
            p.iter_mut().for_each(|v| *v *= scale);
            for (&w, &c) in &stats.counts {
                p[w as usize] += c as f64 / denom;
            }
        }
        p
    }

    /// The `order - 1` token context that follows `prefix`.
    pub fn context_of(&self, prefix: &[TokenId]) -> Vec<TokenId> {
        let hist = self.order - 1;
        let mut ctx = vec![self.specials.bos; hist];
        let take = prefix.len().min(hist);
        ctx[hist - take..].copy_from_slice(&prefix[prefix.len() - take..]);
        ctx
    }

    pub fn distribution(&self, prefix: &[TokenId]) -> Vec<f64> {
        self.distribution_in_context(&self.context_of(prefix))
    }

    /// `log p(next | prefix)`, looking only at the last `order - 1` tokens.
    pub fn cond_logprob(&self, prefix: &[TokenId], next: TokenId) -> f64 {
        floor_ln(self.prob_in_context(&self.context_of(prefix), next))
    }

    pub fn sentence_logprob(&self, sentence: &[TokenId], include_eos: bool) -> SentenceScore {
        let padded = self.pad(sentence, include_eos);
        let hist = self.order - 1;
        let per_word: Vec<f64> = (hist..padded.len())
            .map(|j| floor_ln(self.prob_in_context(&padded[j - hist..j], padded[j])))
            .collect();
        SentenceScore {
            total_logprob: per_word.iter().sum(),
            per_word,
            length: sentence.len(),
        }
    }

    /// Sum of the log conditionals that depend on position `i` once it holds
    /// `candidate`. Differences across candidates equal differences of the
    /// full sentence log probability computed with the same `include_eos`.
    pub fn local_window_logprob(&self, sentence: &[TokenId], i: usize, candidate: TokenId, include_eos: bool) -> f64 {
        self.window_scores(sentence, i, [candidate], include_eos)[0]
    }

    /// `local_window_logprob` for several candidates, sharing one buffer.
    pub fn window_scores(
        &self,
        sentence: &[TokenId],
        i: usize,
        candidates: impl IntoIterator<Item = TokenId>,
        include_eos: bool,
    ) -> Vec<f64> {
        let n = sentence.len();
        assert!(i < n, "position {i} out of range for length {n}");
        let hist = self.order - 1;
        let mut padded = self.pad(sentence, include_eos);
        let last = (i + hist).min(padded.len() - 1 - hist);
        candidates
            .into_iter()
            .map(|candidate| {
                padded[hist + i] = candidate;
                (i..=last)
                    .map(|t| {
                        let j = t + hist;
                        floor_ln(self.prob_in_context(&padded[j - hist..j], padded[j]))
                    })
                    .sum()
            })
            .collect()
    }

    /// Per-event perplexity over sentences, EOS events included.
    pub fn perplexity<'a>(&self, sentences: impl IntoIterator<Item = &'a [TokenId]>) -> f64 {
        let (mut logprob, mut events) = (0.0, 0usize);
        for s in sentences {
            logprob += self.sentence_logprob(s, true).total_logprob;
            events += s.len() + 1;
        }
        if events == 0 {
            return f64::NAN;
        }
        (-logprob / events as f64).exp()
    }

    pub fn to_text(&self) -> String {
        let sorted: BTreeMap<&[TokenId], &ContextStats> = self.contexts.iter().map(|(k, v)| (&**k, v)).collect();
        let mut out = String::new();
        writeln!(
            out,
            "{MODEL_MAGIC} v1 order={} smoothing={} vocab={} vocab_size={} contexts={}",
            self.order,
            self.smoothing.name(),
            self.vocab_fingerprint,
            self.vocab_size,
            sorted.len()
        )
        .unwrap();
        for (ctx, stats) in sorted {
            if ctx.is_empty() {
                out.push('-');
            } else {
                out.push_str(&join_ids(ctx));
            }
            out.push('\t');
            let counts: BTreeMap<_, _> = stats.counts.iter().collect();
            let fields: Vec<String> = counts.iter().map(|(w, c)| format!("{w}:{c}")).collect();
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LmError> {
        let err = |line: usize, message: String| LmError::Parse { line, message };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let fields = parse_header(header, MODEL_MAGIC).map_err(|m| err(1, m))?;
        let get = |key: &str| {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| err(1, format!("header is missing `{key}`")))
        };
        let order: usize = get("order")?.parse().map_err(|_| err(1, "bad order".into()))?;
        if order < 2 {
            return Err(LmError::InvalidOrder(order));
        }
        let smoothing = Smoothing::from_name(get("smoothing")?).ok_or_else(|| err(1, "unknown smoothing".into()))?;
        let vocab_size: usize = get("vocab_size")?
            .parse()
            .map_err(|_| err(1, "bad vocab_size".into()))?;
        if vocab_size < 4 {
            return Err(err(1, "vocab_size below the special token count".into()));
        }
        let declared: usize = get("contexts")?.parse().map_err(|_| err(1, "bad contexts".into()))?;
        let mut contexts = HashMap::new();
        for (n, line) in lines.enumerate() {
            let line_no = n + 2;
            let (ctx, counts) = line
                .split_once('\t')
                .ok_or_else(|| err(line_no, "expected context<TAB>counts".into()))?;
            let ctx: Vec<TokenId> = if ctx == "-" {
                Vec::new()
            } else {
                parse_ids(ctx).map_err(|m| err(line_no, m))?
            };
            if ctx.len() >= order {
                return Err(err(line_no, "context longer than order - 1".into()));
            }
            let mut stats = ContextStats::default();
            for field in counts.split(' ').filter(|f| !f.is_empty()) {
                let (w, c) = field
                    .split_once(':')
                    .ok_or_else(|| err(line_no, format!("bad count `{field}`")))?;
                let w: TokenId = w.parse().map_err(|_| err(line_no, format!("bad id `{w}`")))?;
                let c: u64 = c.parse().map_err(|_| err(line_no, format!("bad count `{c}`")))?;
                if w as usize >= vocab_size {
                    return Err(err(line_no, format!("id {w} out of range")));
                }
                stats.total += c;
                stats.counts.insert(w, c);
            }
            if contexts.insert(ctx.into_boxed_slice(), stats).is_some() {
                return Err(err(line_no, "duplicate context".into()));
            }
        }
        if contexts.len() != declared {
            return Err(err(
                1,
                format!("header declares {declared} contexts, found {}", contexts.len()),
            ));
        }
        Ok(Self {
            order,
            smoothing,
            vocab_size,
            specials: Specials {
                unk: 0,
                bos: 1,
                eos: 2,
                pad: 3,
            },
            vocab_fingerprint: get("vocab")?.to_string(),
            contexts,
        })
    }
}

pub(crate) fn floor_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

pub(crate) fn join_ids(ids: &[TokenId]) -> String {
    ids.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(" ")
}

pub(crate) fn parse_ids(s: &str) -> Result<Vec<TokenId>, String> {
    s.split(' ')
        .map(|p| p.parse().map_err(|_| format!("bad id `{p}`")))
        .collect()
}

/// Splits `magic v1 key=value ...` into its key/value pairs.
pub(crate) fn parse_header<'a>(header: &'a str, magic: &str) -> Result<HashMap<&'a str, &'a str>, String> {
    let mut parts = header.split(' ');
    if parts.next() != Some(magic) {
        return Err(format!("expected a `{magic}` header"));
    }
    if parts.next() != Some("v1") {
        return Err("unsupported format version".into());
    }
    parts
        .map(|p| p.split_once('=').ok_or_else(|| format!("bad header field `{p}`")))
        .collect()
}
