use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use gibbsgen_core::discriminator::target_posteriors;
use gibbsgen_core::eval::{
    avg_bleu, format_columns, format_summary, histogram, loglik_per_word, mean, random_reference_sample, valid_ratio,
    valid_ratio_curve,
};
use gibbsgen_core::pipeline::{
    format_generated, format_trace, parse_generated, parse_labels, parse_trace, GenerationParams,
};
use gibbsgen_core::{ConstraintSchema, Corpus, Method, ModelBundle, ScoredSentence, TokenId, TrainOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config;
use crate::{EvalArgs, GenerateArgs, MethodArg, TrainArgs};

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_models(dir: &Path) -> Result<ModelBundle> {
    ModelBundle::load(dir).with_context(|| format!("loading models from {}", dir.display()))
}

pub fn train(args: &TrainArgs) -> Result<()> {
    if args.min_count == 0 {
        bail!("--min-count must be at least 1");
    }
    if !(0.0..1.0).contains(&args.holdout) {
        bail!("--holdout must lie in [0, 1)");
    }
    let schema =
        ConstraintSchema::parse(&read(&args.schema)?).with_context(|| format!("parsing {}", args.schema.display()))?;
    let corpus = Corpus::parse(&read(&args.corpus)?, schema, args.min_count)
        .with_context(|| format!("parsing {}", args.corpus.display()))?;
    let options = TrainOptions {
        order: args.order,
        alpha: args.alpha,
        holdout: args.holdout,
        seed: args.seed,
        ..TrainOptions::default()
    };
    let (bundle, report) = ModelBundle::train(&corpus, &options)?;
    bundle.save(&args.out)?;
    let summary = format_summary(&report.summary());
    write(&args.out.join("report.txt"), &summary)?;

    println!(
        "trained on {} sentences ({} held out), vocabulary {}",
        report.train_sentences, report.heldout_sentences, report.vocab_size
    );
    println!("held-out perplexity, pure LM:        {:.3}", report.lm_perplexity);
    println!(
        "held-out perplexity, conditional LM: {:.3}",
        report.conditional_perplexity
    );
    for (name, acc) in &report.accuracies {
        println!("held-out accuracy, {name}: {acc:.4}");
    }
    println!("models written to {}", args.out.display());
    Ok(())
}

fn generation_params(args: &GenerateArgs) -> Result<GenerationParams> {
    let mut params = GenerationParams::default();
    if let Some(path) = &args.config {
        config::load(path, &mut params)?;
    }
    let s = &mut params.sampler;
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut s.turns, args.turns);
    set(&mut s.burn_in, args.burn_in);
    set(&mut s.length, args.length);
    set(&mut s.candidates, args.candidates);
    if let Some(t) = args.threshold {
        s.threshold = t;
    }
    if let Some(scan) = &args.scan {
        s.scan = config::parse_scan(scan)?;
    }
    s.seed = args.seed;
    set(&mut params.beam_size, args.beam_size);
    set(&mut params.rs_samples, args.rs_samples);
    set(&mut params.top_w, args.top_w);
    set(&mut params.max_len, args.max_len);
    Ok(params)
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let method = match args.method {
        MethodArg::Gibbs => Method::Gibbs,
        MethodArg::Beam => Method::Beam,
        MethodArg::Reject => Method::Reject,
    };
    if args.trace.is_some() && method != Method::Gibbs {
        bail!("--trace is only available with --method gibbs");
    }
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    let params = generation_params(args)?;
    let bundle = load_models(&args.models)?;
    let plan = match &args.labels {
        Some(spec) => vec![parse_labels(&bundle.schema, spec)?; args.count],
        None => bundle.balanced_plan(args.count),
    };
    let records = bundle.generate_many(method, &plan, &params, args.seed, args.trace.is_some())?;

    let text = format_generated(&records, &bundle.schema, &bundle.vocab);
    match &args.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    if let Some(path) = &args.trace {
        write(path, &format_trace(&records, &bundle.vocab))?;
    }
    let valid = records.iter().filter(|r| r.valid).count();
    eprintln!(
        "{} sentences, {valid} valid at threshold {}",
        records.len(),
        params.sampler.threshold
    );
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let bundle = load_models(&args.models)?;
    let references = Corpus::parse_with_vocab(&read(&args.corpus)?, bundle.schema.clone(), bundle.vocab.clone())
        .with_context(|| format!("parsing {}", args.corpus.display()))?;
    let lines = parse_generated(&read(&args.generated)?, &bundle.schema, &bundle.vocab)
        .map_err(anyhow::Error::msg)
        .with_context(|| format!("parsing {}", args.generated.display()))?;
    if lines.is_empty() {
        bail!("{} contains no generated sentences", args.generated.display());
    }

    let generated: Vec<(Vec<TokenId>, Vec<usize>)> =
        lines.iter().map(|l| (l.tokens.clone(), l.labels.clone())).collect();
    let bleu_bp = avg_bleu(&generated, &references, true)?;
    let bleu = avg_bleu(&generated, &references, false)?;
    let scored = lines
        .iter()
        .map(|l| {
            Ok(ScoredSentence {
                tokens: l.tokens.clone(),
                lm_logprob: l.lm_logprob,
                posteriors: target_posteriors(&bundle.discs, &l.tokens, &l.labels)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratio = valid_ratio(&scored, args.threshold)?;
    let sentences: Vec<Vec<TokenId>> = lines.iter().map(|l| l.tokens.clone()).collect();
    let loglik = loglik_per_word(&sentences, &bundle.lm, true)?;

    let mut summary = vec![
        ("sentences".to_string(), lines.len().to_string()),
        ("bleu_with_bp".to_string(), bleu_bp.to_string()),
        ("bleu_without_bp".to_string(), bleu.to_string()),
        ("valid_ratio".to_string(), ratio.to_string()),
        ("loglik_per_word_mean".to_string(), mean(&loglik).to_string()),
    ];
    println!("sentences:                     {}", lines.len());
    println!("avg BLEU with brevity penalty: {bleu_bp:.6}");
    println!("avg BLEU without penalty:      {bleu:.6}");
    println!("valid ratio (threshold {}):   {ratio:.4}", args.threshold);
    println!("mean log-likelihood per word:  {:.4}", mean(&loglik));

    let mut curve = None;
    if let Some(path) = &args.trace {
        let snapshots: Vec<_> = parse_trace(&read(path)?, &bundle.vocab)
            .map_err(anyhow::Error::msg)
            .with_context(|| format!("parsing {}", path.display()))?
            .into_iter()
            .map(|(_, s)| s)
            .collect();
        if snapshots.is_empty() {
            bail!("{} contains no snapshots", path.display());
        }
        let items: Vec<ScoredSentence> = snapshots.iter().map(|s| s.sentence.clone()).collect();
        let snapshot_ratio = valid_ratio(&items, args.threshold)?;
        println!(
            "snapshot valid ratio:          {snapshot_ratio:.4} over {} snapshots",
            items.len()
        );
        summary.push(("snapshots".to_string(), items.len().to_string()));
        summary.push(("snapshot_valid_ratio".to_string(), snapshot_ratio.to_string()));
        curve = Some(valid_ratio_curve(&snapshots, args.threshold));
    }

    if args.random_baseline {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let sample = random_reference_sample(&references, lines.len(), &mut rng);
        let random_bp = avg_bleu(&sample, &references, true)?;
        let random = avg_bleu(&sample, &references, false)?;
        println!("RANDOM avg BLEU with penalty:  {random_bp:.6}");
        println!("RANDOM avg BLEU without:       {random:.6}");
        summary.push(("random_bleu_with_bp".to_string(), random_bp.to_string()));
        summary.push(("random_bleu_without_bp".to_string(), random.to_string()));
    }

    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join("summary.txt"), &format_summary(&summary))?;
        let per_sentence: Vec<(usize, f64)> = loglik.iter().copied().enumerate().collect();
        write(&dir.join("loglik.tsv"), &format_columns(&per_sentence))?;
        write(
            &dir.join("loglik-hist.tsv"),
            &format_columns(&histogram(&loglik, args.bins)),
        )?;
        if let Some(curve) = &curve {
            write(&dir.join("valid-curve.tsv"), &format_columns(curve))?;
        }
    }
    Ok(())
}
