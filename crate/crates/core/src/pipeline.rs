//! Trained model bundles, their on-disk layout, and generation with any of
//! the three methods.
//!
//! A models directory holds:
//!
//! ```text
//! schema.txt        constraint schema
//! vocab.txt         vocabulary
//! lm.txt            constraint-free language model
//! clm-<labels>.txt  one conditional model per label combination
//! disc-<dim>.txt    one discriminator per dimension
//! train.txt         training sentences (seed material), corpus format
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{beam_search, reject_sample, train_conditional_lm, BaselineError, ConditionalLM};
use crate::corpus::{decode_string, encode, ConstraintSchema, Corpus, CorpusError, TokenId, Vocabulary};
use crate::discriminator::{target_posteriors, train_discriminator, Discriminator, DiscriminatorError};
use crate::lm::{train_ngram, LmError, NGramModel, Smoothing};
use crate::sampler::{self, SamplerConfig, SamplerError, Snapshot};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("unknown class `{label}` for dimension `{dimension}`; valid classes: {valid}")]
    UnknownClass {
        dimension: String,
        label: String,
        valid: String,
    },
    #[error("unknown dimension `{name}`; valid dimensions: {valid}")]
    UnknownDimension { name: String, valid: String },
    #[error("no class given for dimension `{0}`")]
    MissingDimension(String),
    #[error("malformed label assignment `{0}`, expected dim=class")]
    BadAssignment(String),
    #[error("model {0} was trained on a different vocabulary")]
    VocabMismatch(String),
    #[error("unknown method `{0}`; expected gibbs, beam or reject")]
    UnknownMethod(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Discriminator(#[from] DiscriminatorError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub order: usize,
    pub smoothing: Smoothing,
    pub alpha: f64,
    /// Fraction of each label group held out for the report.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            order: 3,
            smoothing: Smoothing::WittenBell,
            alpha: 1.0,
            holdout: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_sentences: usize,
    pub heldout_sentences: usize,
    pub vocab_size: usize,
    pub lm_perplexity: f64,
    pub conditional_perplexity: f64,
    /// `(dimension name, accuracy)` on the held-out split.
    pub accuracies: Vec<(String, f64)>,
}

impl TrainReport {
    pub fn summary(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("train_sentences".to_string(), self.train_sentences.to_string()),
            ("heldout_sentences".to_string(), self.heldout_sentences.to_string()),
            ("vocab_size".to_string(), self.vocab_size.to_string()),
            ("perplexity_pure_lm".to_string(), self.lm_perplexity.to_string()),
            (
                "perplexity_conditional_lm".to_string(),
                self.conditional_perplexity.to_string(),
            ),
        ];
        for (name, acc) in &self.accuracies {
            out.push((format!("accuracy_{name}"), acc.to_string()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub schema: ConstraintSchema,
    pub vocab: Vocabulary,
    pub lm: NGramModel,
    pub clm: ConditionalLM,
    pub discs: Vec<Discriminator>,
    pub train: Corpus,
}

/// Holds out `holdout` of each label group, keeping at least one training
/// sentence per group. Deterministic in `seed`.
pub fn stratified_split(corpus: &Corpus, holdout: f64, seed: u64) -> (Corpus, Corpus) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for labels in corpus.schema.combinations() {
        let mut group: Vec<_> = corpus
            .sentences
            .iter()
            .filter(|s| s.labels == labels)
            .cloned()
            .collect();
        group.shuffle(&mut rng);
        let n_held = ((group.len() as f64 * holdout).floor() as usize).min(group.len().saturating_sub(1));
        held.extend(group.drain(..n_held));
        train.extend(group);
    }
    (corpus.with_sentences(train), corpus.with_sentences(held))
}

impl ModelBundle {
    pub fn train(corpus: &Corpus, options: &TrainOptions) -> Result<(Self, TrainReport), PipelineError> {
        let (train, held) = stratified_split(corpus, options.holdout, options.seed);
        let lm = train_ngram(&train, options.order, options.smoothing)?;
        let clm = train_conditional_lm(&train, options.order, options.smoothing)?;
        let discs = (0..corpus.schema.len())
            .map(|d| train_discriminator(&train, d, options.alpha))
            .collect::<Result<Vec<_>, _>>()?;

        let lm_perplexity = lm.perplexity(held.sentences.iter().map(|s| s.tokens.as_slice()));
        let (mut logprob, mut events) = (0.0, 0usize);
        for s in &held.sentences {
            let model = clm.model(&s.labels).expect("every combination has a model");
            logprob += model.sentence_logprob(&s.tokens, true).total_logprob;
            events += s.tokens.len() + 1;
        }
        let conditional_perplexity = if events == 0 {
            f64::NAN
        } else {
            (-logprob / events as f64).exp()
        };
        let accuracies = discs
            .iter()
            .zip(corpus.schema.dimensions())
            .map(|(d, dim)| (dim.name.clone(), d.accuracy(&held)))
            .collect();
        let report = TrainReport {
            train_sentences: train.len(),
            heldout_sentences: held.len(),
            vocab_size: corpus.vocab.len(),
            lm_perplexity,
            conditional_perplexity,
            accuracies,
        };
        let bundle = Self {
            schema: corpus.schema.clone(),
            vocab: corpus.vocab.clone(),
            lm,
            clm,
            discs,
            train,
        };
        Ok((bundle, report))
    }

    fn clm_file(labels: &[usize]) -> String {
        if labels.is_empty() {
            "clm.txt".to_string()
        } else {
            let parts: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
            format!("clm-{}.txt", parts.join("-"))
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), PipelineError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let write = |name: &str, text: String| -> Result<(), PipelineError> {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io_err(&path))
        };
        write("schema.txt", self.schema.to_text())?;
        write("vocab.txt", self.vocab.to_text())?;
        write("lm.txt", self.lm.to_text())?;
        for (labels, model) in self.clm.models() {
            write(&Self::clm_file(labels), model.to_text())?;
        }
        for (d, disc) in self.discs.iter().enumerate() {
            write(&format!("disc-{d}.txt"), disc.to_text())?;
        }
        write("train.txt", self.train.to_text())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let dir = dir.as_ref();
        let read = |name: &str| -> Result<(PathBuf, String), PipelineError> {
            let path = dir.join(name);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            Ok((path, text))
        };
        let with_path = |path: &Path, message: String| PipelineError::Format {
            path: path.display().to_string(),
            message,
        };

        let (path, text) = read("schema.txt")?;
        let schema = ConstraintSchema::parse(&text).map_err(|e| with_path(&path, e.to_string()))?;
        let (path, text) = read("vocab.txt")?;
        let vocab = Vocabulary::from_text(&text).map_err(|e| with_path(&path, e.to_string()))?;

        let load_lm = |name: &str| -> Result<NGramModel, PipelineError> {
            let (path, text) = read(name)?;
            let model = NGramModel::from_text(&text).map_err(|e| with_path(&path, e.to_string()))?;
            if !model.is_compatible_with(&vocab) {
                return Err(PipelineError::VocabMismatch(path.display().to_string()));
            }
            Ok(model)
        };
        let lm = load_lm("lm.txt")?;
        let clm = ConditionalLM::from_models(
            schema
                .combinations()
                .into_iter()
                .map(|labels| Ok((labels.clone(), load_lm(&Self::clm_file(&labels))?)))
                .collect::<Result<_, PipelineError>>()?,
        );
        let mut discs = Vec::with_capacity(schema.len());
        for d in 0..schema.len() {
            let (path, text) = read(&format!("disc-{d}.txt"))?;
            let disc = Discriminator::from_text(&text).map_err(|e| with_path(&path, e.to_string()))?;
            if !disc.is_compatible_with(&vocab) {
                return Err(PipelineError::VocabMismatch(path.display().to_string()));
            }
            if disc.dimension() != d || disc.num_classes() != schema.dimensions()[d].classes.len() {
                return Err(with_path(&path, "does not match the schema".into()));
            }
            discs.push(disc);
        }
        let (path, text) = read("train.txt")?;
        let train = Corpus::parse_with_vocab(&text, schema.clone(), vocab.clone())
            .map_err(|e| with_path(&path, e.to_string()))?;
        Ok(Self {
            schema,
            vocab,
            lm,
            clm,
            discs,
            train,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gibbs,
    Beam,
    Reject,
}

impl std::str::FromStr for Method {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gibbs" | "gs" => Ok(Method::Gibbs),
            "beam" | "bs" => Ok(Method::Beam),
            "reject" | "rs" => Ok(Method::Reject),
            _ => Err(PipelineError::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationParams {
    /// Gibbs settings; `threshold` also applies to the baselines.
    pub sampler: SamplerConfig,
    pub beam_size: usize,
    pub rs_samples: usize,
    pub top_w: usize,
    pub max_len: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            beam_size: 300,
            rs_samples: 800,
            top_w: 10,
            max_len: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedRecord {
    pub index: usize,
    pub labels: Vec<usize>,
    pub tokens: Vec<TokenId>,
    pub valid: bool,
    /// Constraint-free model score, EOS included.
    pub lm_logprob: f64,
    pub posteriors: Vec<f64>,
    /// Sentences inspected on the way: snapshots or reject-sampling draws.
    pub sampled: usize,
    pub sampled_valid: usize,
    /// Gibbs snapshots, when a trace was requested.
    pub trace: Option<Vec<Snapshot>>,
}

impl ModelBundle {
    /// Generates one sentence. The random stream depends only on `seed` and
    /// `index`, so results do not depend on scheduling.
    pub fn generate(
        &self,
        method: Method,
        labels: &[usize],
        params: &GenerationParams,
        seed: u64,
        index: usize,
        keep_trace: bool,
    ) -> Result<GeneratedRecord, PipelineError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let threshold = params.sampler.threshold;
        let (tokens, sampled, sampled_valid, trace) = match method {
            Method::Gibbs => {
                let config = SamplerConfig {
                    labels: labels.to_vec(),
                    ..params.sampler.clone()
                };
                let result = sampler::run(&config, &self.train, &self.lm, &self.discs, &mut rng)?;
                let output = result.output.expect("a validated run records snapshots");
                let trace = keep_trace.then_some(result.snapshots);
                (output.sentence.tokens, result.total_count, result.valid_count, trace)
            }
            Method::Beam => {
                let h = beam_search(&self.clm, labels, params.beam_size, params.max_len)?;
                (h.tokens, 0, 0, None)
            }
            Method::Reject => {
                let r = reject_sample(
                    &self.lm,
                    &self.discs,
                    labels,
                    params.rs_samples,
                    threshold,
                    params.top_w,
                    params.max_len,
                    &mut rng,
                )?;
                let valid = r.valid_count(threshold);
                let output = r.output.expect("at least one sample was drawn");
                (output.sentence.tokens, r.samples.len(), valid, None)
            }
        };
        let posteriors = target_posteriors(&self.discs, &tokens, labels)?;
        Ok(GeneratedRecord {
            index,
            labels: labels.to_vec(),
            valid: posteriors.iter().all(|&p| p > threshold),
            lm_logprob: self.lm.sentence_logprob(&tokens, true).total_logprob,
            posteriors,
            tokens,
            sampled,
            sampled_valid,
            trace,
        })
    }

    /// Generates one sentence per entry of `plan`, in parallel, returned in
    /// plan order.
    pub fn generate_many(
        &self,
        method: Method,
        plan: &[Vec<usize>],
        params: &GenerationParams,
        seed: u64,
        keep_trace: bool,
    ) -> Result<Vec<GeneratedRecord>, PipelineError> {
        plan.par_iter()
            .enumerate()
            .map(|(index, labels)| self.generate(method, labels, params, seed, index, keep_trace))
            .collect()
    }

    /// `count` label vectors cycling through every combination in schema
    /// order, so each combination gets an equal share.
    pub fn balanced_plan(&self, count: usize) -> Vec<Vec<usize>> {
        let combos = self.schema.combinations();
        (0..count).map(|i| combos[i % combos.len()].clone()).collect()
    }
}

/// Parses `dim=class[,dim=class]`; every dimension must be assigned.
pub fn parse_labels(schema: &ConstraintSchema, spec: &str) -> Result<Vec<usize>, PipelineError> {
    let mut labels: Vec<Option<usize>> = vec![None; schema.len()];
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, class) = part
            .split_once('=')
            .ok_or_else(|| PipelineError::BadAssignment(part.to_string()))?;
        let (name, class) = (name.trim(), class.trim());
        let d = schema
            .dimension_index(name)
            .ok_or_else(|| PipelineError::UnknownDimension {
                name: name.to_string(),
                valid: schema
                    .dimensions()
                    .iter()
                    .map(|d| d.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
            })?;
        let dim = &schema.dimensions()[d];
        let c = dim.class_index(class).ok_or_else(|| PipelineError::UnknownClass {
            dimension: dim.name.clone(),
            label: class.to_string(),
            valid: dim.classes.join(", "),
        })?;
        labels[d] = Some(c);
    }
    labels
        .into_iter()
        .zip(schema.dimensions())
        .map(|(l, dim)| l.ok_or_else(|| PipelineError::MissingDimension(dim.name.clone())))
        .collect()
}

/// One line of a generated-sentence file.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedLine {
    pub labels: Vec<usize>,
    pub valid: bool,
    pub lm_logprob: f64,
    pub tokens: Vec<TokenId>,
}

/// Generated-sentence file: per line, one class per dimension, the valid
/// flag (0/1), the language-model log probability and the sentence, all
/// TAB-separated.
pub fn format_generated(records: &[GeneratedRecord], schema: &ConstraintSchema, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for r in records {
        for name in schema.label_names(&r.labels) {
            out.push_str(name);
            out.push('\t');
        }
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            u8::from(r.valid),
            r.lm_logprob,
            decode_string(&r.tokens, vocab)
        ));
    }
    out
}

pub fn parse_generated(
    text: &str,
    schema: &ConstraintSchema,
    vocab: &Vocabulary,
) -> Result<Vec<GeneratedLine>, String> {
    let k = schema.len();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != k + 3 {
            return Err(format!(
                "line {line_no}: expected {} fields, found {}",
                k + 3,
                fields.len()
            ));
        }
        let mut labels = Vec::with_capacity(k);
        for (dim, field) in schema.dimensions().iter().zip(&fields) {
            labels.push(
                dim.class_index(field)
                    .ok_or_else(|| format!("line {line_no}: unknown class `{field}` for `{}`", dim.name))?,
            );
        }
        let valid = match fields[k] {
            "1" => true,
            "0" => false,
            other => return Err(format!("line {line_no}: bad valid flag `{other}`")),
        };
        let lm_logprob = fields[k + 1]
            .parse()
            .map_err(|_| format!("line {line_no}: bad log probability `{}`", fields[k + 1]))?;
        let words: Vec<&str> = fields[k + 2].split_whitespace().collect();
        out.push(GeneratedLine {
            labels,
            valid,
            lm_logprob,
            tokens: encode(&words, vocab),
        });
    }
    Ok(out)
}

/// Snapshot trace: generation index, turn, position, LM log probability,
/// comma-separated target posteriors, sentence.
pub fn format_trace(records: &[GeneratedRecord], vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for r in records {
        for s in r.trace.iter().flatten() {
            let posts: Vec<String> = s.sentence.posteriors.iter().map(|p| p.to_string()).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.index,
                s.turn,
                s.position,
                s.sentence.lm_logprob,
                posts.join(","),
                decode_string(&s.sentence.tokens, vocab)
            ));
        }
    }
    out
}

pub fn parse_trace(text: &str, vocab: &Vocabulary) -> Result<Vec<(usize, Snapshot)>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(format!("line {line_no}: expected 6 fields, found {}", f.len()));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| format!("line {line_no}: bad integer `{s}`"))
        };
        let posteriors = if f[4].is_empty() {
            Vec::new()
        } else {
            f[4].split(',')
                .map(|p| {
                    p.parse::<f64>()
                        .map_err(|_| format!("line {line_no}: bad posterior `{p}`"))
                })
                .collect::<Result<_, _>>()?
        };
        let words: Vec<&str> = f[5].split_whitespace().collect();
        out.push((
            num(f[0])?,
            Snapshot {
                turn: num(f[1])?,
                position: num(f[2])?,
                sentence: crate::sampler::ScoredSentence {
                    tokens: encode(&words, vocab),
                    lm_logprob: f[3]
                        .parse()
                        .map_err(|_| format!("line {line_no}: bad log probability"))?,
                    posteriors,
                },
            },
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> ConstraintSchema {
        ConstraintSchema::from_pairs(&[("sentiment", &["negative", "positive"]), ("domain", &["books", "dvd"])])
            .unwrap()
    }

    #[test]
    fn label_parsing() {
        let s = schema();
        assert_eq!(parse_labels(&s, "domain=dvd,sentiment=positive").unwrap(), vec![1, 1]);
        let err = parse_labels(&s, "sentiment=neutral,domain=dvd")
            .unwrap_err()
            .to_string();
        assert!(err.contains("negative, positive"), "{err}");
        assert!(matches!(
            parse_labels(&s, "sentiment=positive"),
            Err(PipelineError::MissingDimension(_))
        ));
        assert!(matches!(
            parse_labels(&s, "mood=x"),
            Err(PipelineError::UnknownDimension { .. })
        ));
        assert!(matches!(
            parse_labels(&s, "positive"),
            Err(PipelineError::BadAssignment(_))
        ));
        assert_eq!(
            parse_labels(&ConstraintSchema::default(), "").unwrap(),
            Vec::<usize>::new()
        );
    }

    #[test]
    fn method_names() {
        assert_eq!("gibbs".parse::<Method>().unwrap(), Method::Gibbs);
        assert_eq!("rs".parse::<Method>().unwrap(), Method::Reject);
        assert!("greedy".parse::<Method>().is_err());
    }

    #[test]
    fn stratified_split_keeps_each_group() {
        let data: Vec<(Vec<usize>, Vec<&str>)> = (0..20)
            .map(|i| (vec![usize::from(i % 5 == 0), usize::from(i % 2 == 0)], vec!["w"]))
            .collect();
        let corpus = Corpus::from_labeled(schema(), &data, 1);
        let (train, held) = stratified_split(&corpus, 0.5, 1);
        assert_eq!(train.len() + held.len(), 20);
        for labels in schema().combinations() {
            assert!(!train.filter_labels(&labels).is_empty());
        }
        let (again, _) = stratified_split(&corpus, 0.5, 1);
        assert_eq!(again, train);
    }
}
