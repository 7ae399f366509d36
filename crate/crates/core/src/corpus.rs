//! Corpus ingestion: vocabulary construction, encoding, constraint schemas and
//! the labeled sentence file format.
//!
//! A corpus file holds one record per line. Fields are separated by a single
//! TAB: one class label per schema dimension, then the pre-tokenized sentence
//! (tokens separated by spaces). Blank lines are skipped.
//!
//! A schema file holds one dimension per line as `name: class1,class2,...`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub type TokenId = u32;

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const PAD: &str = "<pad>";

const VOCAB_MAGIC: &str = "gibbsgen-vocab";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected {expected} tab-separated fields, found {found}")]
    FieldCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: unknown class `{label}` for dimension `{dimension}`")]
    UnknownLabel {
        line: usize,
        dimension: String,
        label: String,
    },
    #[error("line {line}: empty sentence")]
    EmptySentence { line: usize },
    #[error("schema line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("dimension `{0}` must have at least two classes")]
    TooFewClasses(String),
    #[error("duplicate dimension name `{0}`")]
    DuplicateDimension(String),
    #[error("duplicate class `{class}` in dimension `{dimension}`")]
    DuplicateClass { dimension: String, class: String },
    #[error("vocabulary: {0}")]
    Vocabulary(String),
}

/// Ids of the reserved tokens. They always occupy ids 0..4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Specials {
    pub unk: TokenId,
    pub bos: TokenId,
    pub eos: TokenId,
    pub pad: TokenId,
}

const SPECIALS: Specials = Specials {
    unk: 0,
    bos: 1,
    eos: 2,
    pad: 3,
};

/// Bidirectional token/id map. Ids are dense, starting at zero, with the four
/// special tokens first and content tokens ordered by descending corpus
/// frequency, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self, CorpusError> {
        if tokens.len() < 4 || tokens[..4] != [UNK, BOS, EOS, PAD] {
            return Err(CorpusError::Vocabulary(
                "the first four entries must be the special tokens".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.contains(char::is_whitespace) {
                return Err(CorpusError::Vocabulary(format!("invalid token {tok:?}")));
            }
            if index.insert(tok.clone(), id as TokenId).is_some() {
                return Err(CorpusError::Vocabulary(format!("duplicate token {tok:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn specials(&self) -> Specials {
        SPECIALS
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        id < 4
    }

    /// Tokens that may appear inside a sentence: every content token plus UNK.
    pub fn word_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        std::iter::once(SPECIALS.unk).chain(4..self.len() as TokenId)
    }

    /// Short content hash used to tie serialized models to a vocabulary.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for tok in &self.tokens {
            hasher.update(tok.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{VOCAB_MAGIC} v{FORMAT_VERSION} size={}\n", self.len());
        for tok in &self.tokens {
            out.push_str(tok);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CorpusError::Vocabulary("missing header".into()))?;
        let mut parts = header.split(' ');
        if parts.next() != Some(VOCAB_MAGIC) || parts.next() != Some("v1") {
            return Err(CorpusError::Vocabulary(format!("bad header {header:?}")));
        }
        let size: usize = parts
            .next()
            .and_then(|p| p.strip_prefix("size="))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CorpusError::Vocabulary(format!("bad header {header:?}")))?;
        let tokens: Vec<String> = lines.map(str::to_string).collect();
        if tokens.len() != size {
            return Err(CorpusError::Vocabulary(format!(
                "header declares {size} tokens, found {}",
                tokens.len()
            )));
        }
        Self::from_tokens(tokens)
    }
}

/// Builds a vocabulary keeping every token seen at least `min_count` times.
/// Tokens spelled like a special token are folded into that special.
pub fn build_vocabulary<S: AsRef<str>>(sentences: &[Vec<S>], min_count: usize) -> Vocabulary {
    let min_count = min_count.max(1);
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for sentence in sentences {
        for tok in sentence {
            let tok = tok.as_ref();
            if [UNK, BOS, EOS, PAD].contains(&tok) {
                continue;
            }
            *freq.entry(tok).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let tokens = [UNK, BOS, EOS, PAD]
        .into_iter()
        .chain(kept.into_iter().map(|(t, _)| t))
        .map(str::to_string)
        .collect();
    Vocabulary::from_tokens(tokens).expect("constructed vocabulary is well formed")
}

/// Maps tokens to ids; anything outside the vocabulary becomes UNK.
pub fn encode<S: AsRef<str>>(sentence: &[S], vocab: &Vocabulary) -> Vec<TokenId> {
    sentence
        .iter()
        .map(|t| vocab.id(t.as_ref()).unwrap_or(SPECIALS.unk))
        .collect()
}

pub fn decode(ids: &[TokenId], vocab: &Vocabulary) -> Vec<String> {
    ids.iter()
        .map(|&id| vocab.token(id).unwrap_or(UNK).to_string())
        .collect()
}

pub fn decode_string(ids: &[TokenId], vocab: &Vocabulary) -> String {
    decode(ids, vocab).join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dimension {
    pub name: String,
    pub classes: Vec<String>,
}

impl Dimension {
    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }
}

/// Ordered constraint dimensions, each a categorical variable with at least
/// two classes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConstraintSchema {
    dimensions: Vec<Dimension>,
}

impl ConstraintSchema {
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self, CorpusError> {
        let mut names = HashSet::new();
        for dim in &dimensions {
            if !names.insert(dim.name.as_str()) {
                return Err(CorpusError::DuplicateDimension(dim.name.clone()));
            }
            if dim.classes.len() < 2 {
                return Err(CorpusError::TooFewClasses(dim.name.clone()));
            }
            let mut seen = HashSet::new();
            for class in &dim.classes {
                if !seen.insert(class.as_str()) {
                    return Err(CorpusError::DuplicateClass {
                        dimension: dim.name.clone(),
                        class: class.clone(),
                    });
                }
            }
        }
        Ok(Self { dimensions })
    }

    /// Convenience constructor from `(name, [classes])` pairs.
    pub fn from_pairs(pairs: &[(&str, &[&str])]) -> Result<Self, CorpusError> {
        Self::new(
            pairs
                .iter()
                .map(|(name, classes)| Dimension {
                    name: name.to_string(),
                    classes: classes.iter().map(|c| c.to_string()).collect(),
                })
                .collect(),
        )
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut dimensions = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, classes) = line.split_once(':').ok_or_else(|| CorpusError::Schema {
                line: n + 1,
                message: "expected `name: class1,class2,...`".into(),
            })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(CorpusError::Schema {
                    line: n + 1,
                    message: "empty dimension name".into(),
                });
            }
            let classes: Vec<String> = classes
                .split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect();
            dimensions.push(Dimension {
                name: name.to_string(),
                classes,
            });
        }
        Self::new(dimensions)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        Self::parse(&read_file(path.as_ref())?)
    }

    pub fn to_text(&self) -> String {
        self.dimensions
            .iter()
            .map(|d| format!("{}: {}\n", d.name, d.classes.join(",")))
            .collect()
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn dimension_index(&self, name: &str) -> Option<usize> {
        self.dimensions.iter().position(|d| d.name == name)
    }

    /// Every label combination in row-major order (last dimension fastest).
    /// A schema with no dimensions has exactly one, empty, combination.
    pub fn combinations(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for dim in &self.dimensions {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..dim.classes.len()).map(move |c| {
                        let mut next = prefix.clone();
                        next.push(c);
                        next
                    })
                })
                .collect();
        }
        out
    }

    pub fn label_names(&self, labels: &[usize]) -> Vec<&str> {
        self.dimensions
            .iter()
            .zip(labels)
            .map(|(d, &c)| d.classes[c].as_str())
            .collect()
    }

    /// `dim=class,dim=class` rendering used in messages and reports.
    pub fn describe(&self, labels: &[usize]) -> String {
        self.dimensions
            .iter()
            .zip(labels)
            .map(|(d, &c)| format!("{}={}", d.name, d.classes[c]))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Display for ConstraintSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledSentence {
    pub tokens: Vec<TokenId>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub schema: ConstraintSchema,
    pub sentences: Vec<LabeledSentence>,
    pub vocab: Vocabulary,
}

struct RawRecord<'a> {
    labels: Vec<usize>,
    tokens: Vec<&'a str>,
}

fn parse_records<'a>(text: &'a str, schema: &ConstraintSchema) -> Result<Vec<RawRecord<'a>>, CorpusError> {
    let k = schema.len();
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != k + 1 {
            return Err(CorpusError::FieldCount {
                line: line_no,
                expected: k + 1,
                found: fields.len(),
            });
        }
        let mut labels = Vec::with_capacity(k);
        for (dim, field) in schema.dimensions().iter().zip(&fields) {
            let label = field.trim();
            let class = dim.class_index(label).ok_or_else(|| CorpusError::UnknownLabel {
                line: line_no,
                dimension: dim.name.clone(),
                label: label.to_string(),
            })?;
            labels.push(class);
        }
        let tokens: Vec<&str> = fields[k].split_whitespace().collect();
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence { line: line_no });
        }
        records.push(RawRecord { labels, tokens });
    }
    Ok(records)
}

impl Corpus {
    /// Parses corpus text and builds the vocabulary from its own sentences.
    pub fn parse(text: &str, schema: ConstraintSchema, min_count: usize) -> Result<Self, CorpusError> {
        let records = parse_records(text, &schema)?;
        let raw: Vec<Vec<&str>> = records.iter().map(|r| r.tokens.clone()).collect();
        let vocab = build_vocabulary(&raw, min_count);
        Ok(Self::from_records(records, schema, vocab))
    }

    /// Parses corpus text against an existing vocabulary.
    pub fn parse_with_vocab(text: &str, schema: ConstraintSchema, vocab: Vocabulary) -> Result<Self, CorpusError> {
        let records = parse_records(text, &schema)?;
        Ok(Self::from_records(records, schema, vocab))
    }

    fn from_records(records: Vec<RawRecord<'_>>, schema: ConstraintSchema, vocab: Vocabulary) -> Self {
        let sentences = records
            .into_iter()
            .map(|r| LabeledSentence {
                tokens: encode(&r.tokens, &vocab),
                labels: r.labels,
            })
            .collect();
        Self {
            schema,
            sentences,
            vocab,
        }
    }

    /// Builds a corpus from in-memory `(labels, tokens)` pairs.
    pub fn from_labeled<S: AsRef<str>>(
        schema: ConstraintSchema,
        data: &[(Vec<usize>, Vec<S>)],
        min_count: usize,
    ) -> Self {
        let raw: Vec<Vec<&str>> = data
            .iter()
            .map(|(_, toks)| toks.iter().map(AsRef::as_ref).collect())
            .collect();
        let vocab = build_vocabulary(&raw, min_count);
        let sentences = data
            .iter()
            .map(|(labels, toks)| {
                assert_eq!(labels.len(), schema.len(), "label arity must match schema");
                LabeledSentence {
                    tokens: encode(toks, &vocab),
                    labels: labels.clone(),
                }
            })
            .collect();
        Self {
            schema,
            sentences,
            vocab,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Same schema and vocabulary, a subset of sentences.
    pub fn with_sentences(&self, sentences: Vec<LabeledSentence>) -> Self {
        Self {
            schema: self.schema.clone(),
            sentences,
            vocab: self.vocab.clone(),
        }
    }

    /// Sentences whose labels equal `labels` exactly.
    pub fn filter_labels(&self, labels: &[usize]) -> Self {
        self.with_sentences(self.sentences.iter().filter(|s| s.labels == labels).cloned().collect())
    }

    /// Serializes back to the corpus file format (UNK-replaced tokens).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            for name in self.schema.label_names(&s.labels) {
                out.push_str(name);
                out.push('\t');
            }
            out.push_str(&decode_string(&s.tokens, &self.vocab));
            out.push('\n');
        }
        out
    }
}

pub fn load_corpus(path: impl AsRef<Path>, schema: ConstraintSchema, min_count: usize) -> Result<Corpus, CorpusError> {
    Corpus::parse(&read_file(path.as_ref())?, schema, min_count)
}

pub(crate) fn read_file(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn two_dim_schema() -> ConstraintSchema {
        ConstraintSchema::from_pairs(&[("sentiment", &["negative", "positive"]), ("domain", &["books", "dvd"])])
            .unwrap()
    }

    #[test]
    fn empty_input_yields_specials_only() {
        let vocab = build_vocabulary::<String>(&[], 1);
        assert_eq!(vocab.tokens(), &[UNK, BOS, EOS, PAD]);
        let s = vocab.specials();
        let ids: HashSet<_> = [s.unk, s.bos, s.eos, s.pad].into_iter().collect();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn min_count_boundary() {
        let mut raw = vec![words("rare"); 9];
        raw.extend(vec![words("common"); 10]);
        let vocab = build_vocabulary(&raw, 10);
        assert!(vocab.id("rare").is_none());
        assert!(vocab.id("common").is_some());
        assert_eq!(encode(&["rare"], &vocab), vec![vocab.specials().unk]);
    }

    #[test]
    fn ids_by_descending_frequency_then_lexicographic() {
        let raw = vec![words("b a c b"), words("c b d")];
        let vocab = build_vocabulary(&raw, 1);
        // b:3, c:2, a:1, d:1
        assert_eq!(&vocab.tokens()[4..], &["b", "c", "a", "d"]);
        for (id, tok) in vocab.tokens().iter().enumerate() {
            assert_eq!(vocab.id(tok), Some(id as TokenId));
        }
    }

    #[test]
    fn special_spellings_are_not_counted_as_content() {
        let raw = vec![words("<unk> x </s>")];
        let vocab = build_vocabulary(&raw, 1);
        assert_eq!(vocab.len(), 5);
        assert_eq!(encode(&["<unk>"], &vocab), vec![vocab.specials().unk]);
    }

    #[test]
    fn encode_cases() {
        let vocab = build_vocabulary(&[words("good movie")], 1);
        assert_eq!(
            encode(&["good", "movie"], &vocab),
            vec![vocab.id("good").unwrap(), vocab.id("movie").unwrap()]
        );
        assert_eq!(encode(&["zxqv"], &vocab), vec![vocab.specials().unk]);
        assert!(encode::<&str>(&[], &vocab).is_empty());
    }

    #[test]
    fn vocab_text_round_trip() {
        let vocab = build_vocabulary(&[words("x y z y")], 1);
        let text = vocab.to_text();
        let back = Vocabulary::from_text(&text).unwrap();
        assert_eq!(back, vocab);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.fingerprint(), vocab.fingerprint());
    }

    #[test]
    fn corpus_line_with_two_labels() {
        let corpus = Corpus::parse("positive\tbooks\tgreat read .\n", two_dim_schema(), 1).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.sentences[0].labels, vec![1, 0]);
        assert_eq!(
            decode_string(&corpus.sentences[0].tokens, &corpus.vocab),
            "great read ."
        );
    }

    #[test]
    fn corpus_arity_error_names_line() {
        let text = "positive\tbooks\tgood\n\npositive\tbad line\n";
        match Corpus::parse(text, two_dim_schema(), 1) {
            Err(CorpusError::FieldCount { line, expected, found }) => {
                assert_eq!((line, expected, found), (3, 3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn corpus_unknown_label_error() {
        let err = Corpus::parse("neutral\tbooks\tok\n", two_dim_schema(), 1).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("line 1") && msg.contains("neutral") && msg.contains("sentiment"),
            "{msg}"
        );
    }

    #[test]
    fn three_lines_three_sentences() {
        let text = "negative\tdvd\ta b\npositive\tbooks\tc\n\nnegative\tbooks\ta\n";
        let corpus = Corpus::parse(text, two_dim_schema(), 1).unwrap();
        assert_eq!(corpus.len(), 3);
    }

    #[test]
    fn schema_parse_and_validation() {
        let schema = ConstraintSchema::parse("sentiment: negative,positive\ndomain: a, b ,c\n").unwrap();
        assert_eq!(schema.len(), 2);
        assert_eq!(schema.dimensions()[1].classes, vec!["a", "b", "c"]);
        assert_eq!(ConstraintSchema::parse(&schema.to_text()).unwrap(), schema);
        assert!(matches!(
            ConstraintSchema::parse("s: only"),
            Err(CorpusError::TooFewClasses(_))
        ));
        assert!(matches!(
            ConstraintSchema::parse("s: a,b\ns: c,d"),
            Err(CorpusError::DuplicateDimension(_))
        ));
        assert!(matches!(
            ConstraintSchema::parse("no colon here"),
            Err(CorpusError::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn combinations_row_major() {
        let schema = two_dim_schema();
        assert_eq!(
            schema.combinations(),
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
        assert_eq!(ConstraintSchema::default().combinations(), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn corpus_text_round_trip() {
        let text = "negative\tdvd\ta b\npositive\tbooks\tc a\n";
        let corpus = Corpus::parse(text, two_dim_schema(), 1).unwrap();
        assert_eq!(corpus.to_text(), text);
        let again = Corpus::parse_with_vocab(&corpus.to_text(), two_dim_schema(), corpus.vocab.clone()).unwrap();
        assert_eq!(again, corpus);
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_corpus("/nonexistent/corpus.tsv", two_dim_schema(), 1).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/corpus.tsv"));
    }
}
