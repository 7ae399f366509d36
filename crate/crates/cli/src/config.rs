//! `key = value` configuration files. Keys are the hyper-parameter names
//! used in experiment write-ups, spelled exactly as below.

use std::path::Path;

use anyhow::{bail, Context, Result};
use gibbsgen_core::pipeline::GenerationParams;
use gibbsgen_core::ScanOrder;

pub const TURNS: &str = "Turns in Gibbs Sampling";
pub const LENGTH: &str = "Fixed sentence length";
pub const BURN_IN: &str = "Burn-in turns";
pub const THRESHOLD: &str = "Threshold";
pub const CANDIDATES: &str = "Candidate word number(k)";
pub const RS_SAMPLES: &str = "Sentences sampled in RS";
pub const BEAM_SIZE: &str = "Beam size";
pub const TOP_W: &str = "Top words in RS";
pub const MAX_LEN: &str = "Maximum length";
pub const SCAN: &str = "Scan order";

/// Settings of the neural models these samplers were first paired with.
/// They have no counterpart here and are skipped with a warning.
const IGNORED: &[&str] = &["Hidden-units", "Word-vec-size", "Constraint-embedding-size"];

const KNOWN: &[&str] = &[
    TURNS, LENGTH, BURN_IN, THRESHOLD, CANDIDATES, RS_SAMPLES, BEAM_SIZE, TOP_W, MAX_LEN, SCAN,
];

pub fn parse_scan(value: &str) -> Result<ScanOrder> {
    match value {
        "sequential" => Ok(ScanOrder::Sequential),
        "random" => Ok(ScanOrder::Random),
        other => bail!("unknown scan order `{other}`; expected sequential or random"),
    }
}

/// Applies every entry of `text` to `params`. `origin` names the source in
/// error messages.
pub fn apply(text: &str, origin: &str, params: &mut GenerationParams) -> Result<()> {
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = || format!("{origin}:{}", n + 1);
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("{}: expected `key = value`", at()))?;
        let (key, value) = (key.trim(), value.trim());
        if IGNORED.contains(&key) {
            log::warn!("{}: `{key}` has no effect on count-based models; ignored", at());
            continue;
        }
        let int = || -> Result<usize> {
            value
                .parse()
                .with_context(|| format!("{}: `{key}` needs a non-negative integer, got `{value}`", at()))
        };
        let s = &mut params.sampler;
        match key {
            TURNS => s.turns = int()?,
            LENGTH => s.length = int()?,
            BURN_IN => s.burn_in = int()?,
            CANDIDATES => s.candidates = int()?,
            THRESHOLD => {
                s.threshold = value
                    .parse()
                    .with_context(|| format!("{}: `{key}` needs a number, got `{value}`", at()))?
            }
            SCAN => s.scan = parse_scan(value).with_context(at)?,
            RS_SAMPLES => params.rs_samples = int()?,
            BEAM_SIZE => params.beam_size = int()?,
            TOP_W => params.top_w = int()?,
            MAX_LEN => params.max_len = int()?,
            _ => bail!("{}: unknown key `{key}`; known keys: {}", at(), KNOWN.join(", ")),
        }
    }
    Ok(())
}

pub fn load(path: &Path, params: &mut GenerationParams) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    apply(&text, &path.display().to_string(), params)
}
