mod common;

use gibbsgen_core::baselines::beam_search_model;
use gibbsgen_core::discriminator::target_posteriors;
use gibbsgen_core::eval::valid_ratio;
use gibbsgen_core::sampler::{run, ScanOrder};
use gibbsgen_core::{
    bleu4, build_vocabulary, decode, encode, exact_posterior, joint_constraint_logprob, propose, train_discriminator,
    train_ngram, ConstraintSchema, Corpus, Discriminator, NGramModel, SamplerConfig, ScoredSentence, Smoothing,
    TokenId, Vocabulary,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

fn sentence() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..WORDS.len(), 1..6)
}

/// Labeled sentences over `WORDS`; the first two rows carry both labels so
/// every class is present.
fn rows() -> impl Strategy<Value = Vec<(usize, Vec<usize>)>> {
    prop::collection::vec((0..2usize, sentence()), 2..12).prop_map(|mut rows| {
        rows[0].0 = 0;
        rows[1].0 = 1;
        rows
    })
}

fn corpus_of(rows: &[(usize, Vec<usize>)]) -> Corpus {
    let schema = ConstraintSchema::from_pairs(&[("sentiment", &["negative", "positive"])]).unwrap();
    let data: Vec<(Vec<usize>, Vec<&str>)> = rows
        .iter()
        .map(|(l, s)| (vec![*l], s.iter().map(|&w| WORDS[w]).collect()))
        .collect();
    Corpus::from_labeled(schema, &data, 1)
}

fn models(rows: &[(usize, Vec<usize>)], order: usize) -> (Corpus, NGramModel, Vec<Discriminator>) {
    let corpus = corpus_of(rows);
    let lm = train_ngram(&corpus, order, Smoothing::WittenBell).unwrap();
    let discs = vec![train_discriminator(&corpus, 0, 1.0).unwrap()];
    (corpus, lm, discs)
}

/// Maps arbitrary indices onto the model's word ids.
fn to_words(lm: &NGramModel, picks: &[usize]) -> Vec<TokenId> {
    let words: Vec<TokenId> = lm.word_ids().collect();
    picks.iter().map(|&p| words[p % words.len()]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_identity(rows in rows(), pick in sentence()) {
        let corpus = corpus_of(&rows);
        let known: Vec<&str> = pick.iter().map(|&w| WORDS[w]).filter(|w| corpus.vocab.id(w).is_some()).collect();
        let ids = encode(&known, &corpus.vocab);
        prop_assert_eq!(decode(&ids, &corpus.vocab), known);
    }

    #[test]
    fn min_count_excludes_rare_tokens(rows in rows(), m in 1usize..4) {
        let sentences: Vec<Vec<&str>> = rows.iter().map(|(_, s)| s.iter().map(|&w| WORDS[w]).collect()).collect();
        let vocab = build_vocabulary(&sentences, m);
        for token in &vocab.tokens()[4..] {
            let freq = sentences.iter().flatten().filter(|w| *w == token).count();
            prop_assert!(freq >= m);
        }
    }

    #[test]
    fn parsing_is_deterministic(rows in rows()) {
        let text = corpus_of(&rows).to_text();
        let schema = ConstraintSchema::from_pairs(&[("sentiment", &["negative", "positive"])]).unwrap();
        let a = Corpus::parse(&text, schema.clone(), 1).unwrap();
        let b = Corpus::parse(&text, schema, 1).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn next_event_distribution_sums_to_one(rows in rows(), order in 2usize..5, prefix in prop::collection::vec(0usize..8, 0..6)) {
        let (_, lm, _) = models(&rows, order);
        let prefix = to_words(&lm, &prefix);
        let total: f64 = lm.distribution(&prefix).iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9, "{}", total);
        let pointwise: f64 = lm.events().map(|w| lm.cond_logprob(&prefix, w).exp()).sum();
        prop_assert!((pointwise - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn window_differences_equal_sentence_differences(
        rows in rows(),
        order in 2usize..5,
        picks in prop::collection::vec(0usize..8, 1..7),
        pos in 0usize..7,
        c1 in 0usize..8,
        c2 in 0usize..8,
        include_eos in any::<bool>(),
    ) {
        let (_, lm, _) = models(&rows, order);
        let s = to_words(&lm, &picks);
        let i = pos % s.len();
        let (c1, c2) = (to_words(&lm, &[c1])[0], to_words(&lm, &[c2])[0]);
        let full = |c| {
            let mut t = s.clone();
            t[i] = c;
            lm.sentence_logprob(&t, include_eos).total_logprob
        };
        let window = lm.local_window_logprob(&s, i, c1, include_eos) - lm.local_window_logprob(&s, i, c2, include_eos);
        prop_assert!((window - (full(c1) - full(c2))).abs() < 1e-9);

        let all: Vec<TokenId> = lm.word_ids().collect();
        let argmax = |f: &dyn Fn(TokenId) -> f64| {
            all.iter().copied().fold((all[0], f64::NEG_INFINITY), |best, w| {
                let v = f(w);
                if v > best.1 + 1e-12 { (w, v) } else { best }
            }).0
        };
        let by_window = argmax(&|w| lm.local_window_logprob(&s, i, w, include_eos));
        let by_sentence = argmax(&|w| full(w));
        prop_assert!((full(by_window) - full(by_sentence)).abs() < 1e-9);
    }

    #[test]
    fn more_copies_never_lower_probability(rows in rows(), order in 2usize..4, which in 0usize..12, extra in 1usize..4) {
        let target = rows[which % rows.len()].clone();
        let mut more = rows.clone();
        for _ in 0..extra {
            more.push(target.clone());
        }
        let (c1, lm1, _) = models(&rows, order);
        let (c2, lm2, _) = models(&more, order);
        let words: Vec<&str> = target.1.iter().map(|&w| WORDS[w]).collect();
        let before = lm1.sentence_logprob(&encode(&words, &c1.vocab), true).total_logprob;
        let after = lm2.sentence_logprob(&encode(&words, &c2.vocab), true).total_logprob;
        prop_assert!(after >= before - 1e-12, "{} -> {}", before, after);
    }

    #[test]
    fn posterior_properties(rows in rows(), picks in prop::collection::vec(0usize..8, 0..8), shuffle_seed in any::<u64>()) {
        let (_, lm, discs) = models(&rows, 2);
        let s = to_words(&lm, &picks);
        let post = discs[0].posterior(&s);
        prop_assert!((post.iter().sum::<f64>() - 1.0).abs() <= 1e-9);

        let mut shuffled = s.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        prop_assert_eq!(discs[0].class_log_scores(&s).len(), 2);
        let again = discs[0].posterior(&shuffled);
        for (a, b) in post.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-12);
        }

        for label in 0..2 {
            let joint = joint_constraint_logprob(&discs, &s, &[label]).unwrap().exp();
            let product: f64 = target_posteriors(&discs, &s, &[label]).unwrap().iter().product();
            prop_assert!(((joint - product) / product).abs() <= 1e-9);
        }
    }

    #[test]
    fn candidate_set_invariants(rows in rows(), order in 2usize..4, picks in prop::collection::vec(0usize..8, 1..7), pos in 0usize..7, k in 1usize..10) {
        let (_, lm, _) = models(&rows, order);
        let s = to_words(&lm, &picks);
        let i = pos % s.len();
        let cands = propose(&lm, &s, i, k);
        prop_assert!(cands.iter().any(|c| c.token == s[i]));
        prop_assert!(cands.windows(2).all(|w| w[0].score >= w[1].score));
        let mut ids: Vec<TokenId> = cands.iter().map(|c| c.token).collect();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), cands.len());
        prop_assert!(cands.len() <= k + 1);
    }

    #[test]
    fn chain_moves_one_position_at_a_time(rows in rows(), seed in any::<u64>(), random_scan in any::<bool>(), label in 0usize..2) {
        let (corpus, lm, discs) = models(&rows, 3);
        let config = SamplerConfig {
            turns: 6,
            burn_in: 0,
            length: 4,
            candidates: 3,
            labels: vec![label],
            scan: if random_scan { ScanOrder::Random } else { ScanOrder::Sequential },
            ..SamplerConfig::default()
        };
        let result = run(&config, &corpus, &lm, &discs, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(result.snapshots.len(), 24);
        let mut prev = &result.seed;
        for snap in &result.snapshots {
            let diff = prev.iter().zip(&snap.sentence.tokens).filter(|(a, b)| a != b).count();
            prop_assert!(diff <= 1);
            prop_assert!(prev.iter().zip(&snap.sentence.tokens).enumerate().all(|(j, (a, b))| a == b || j == snap.position));
            prev = &snap.sentence.tokens;
        }
        let again = run(&config, &corpus, &lm, &discs, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(result, again);
    }

    #[test]
    fn bleu_bounds_and_symmetry(c in prop::collection::vec(0u32..5, 0..9), r in prop::collection::vec(0u32..5, 1..9), shift in 1u32..5) {
        let with = bleu4(&c, &r, true);
        let without = bleu4(&c, &r, false);
        prop_assert!((0.0..=1.0).contains(&with) && (0.0..=1.0).contains(&without));
        prop_assert!(with <= without);
        if without > 0.0 {
            prop_assert_eq!(with == without, c.len() >= r.len());
        }
        let perm = |xs: &[u32]| xs.iter().map(|x| (x + shift) % 5).collect::<Vec<_>>();
        prop_assert!((bleu4(&perm(&c), &perm(&r), true) - with).abs() < 1e-12);
    }

    #[test]
    fn valid_ratio_ignores_order(posts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..20), seed in any::<u64>()) {
        let items: Vec<ScoredSentence> = posts
            .iter()
            .map(|p| ScoredSentence { tokens: vec![4], lm_logprob: 0.0, posteriors: p.clone() })
            .collect();
        let mut shuffled = items.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(valid_ratio(&items, 0.6).unwrap(), valid_ratio(&shuffled, 0.6).unwrap());
    }

    #[test]
    fn exact_posterior_is_normalized(rows in rows(), label in 0usize..2, n in 1usize..4) {
        let (_, lm, discs) = models(&rows, 3);
        let alphabet: Vec<TokenId> = lm.word_ids().take(4).collect();
        let dist = exact_posterior(&lm, &discs, &[label], n, &alphabet, false).unwrap();
        prop_assert!((dist.total() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn text_formats_round_trip(rows in rows(), order in 2usize..5) {
        let (corpus, lm, discs) = models(&rows, order);
        prop_assert_eq!(&NGramModel::from_text(&lm.to_text()).unwrap(), &lm);
        prop_assert_eq!(&Discriminator::from_text(&discs[0].to_text()).unwrap(), &discs[0]);
        prop_assert_eq!(&Vocabulary::from_text(&corpus.vocab.to_text()).unwrap(), &corpus.vocab);
        prop_assert_eq!(&ConstraintSchema::parse(&corpus.schema.to_text()).unwrap(), &corpus.schema);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exhaustive_beam_dominates(rows in rows(), order in 2usize..4, m in 1usize..6) {
        let (_, lm, _) = models(&rows, order);
        let words = lm.word_ids().count();
        let max_len = 3;
        let exhaustive = beam_search_model(&lm, words.pow(max_len as u32), max_len).unwrap();
        let narrow = beam_search_model(&lm, m, max_len).unwrap();
        prop_assert!(exhaustive.logprob >= narrow.logprob - 1e-12);
    }
}

#[test]
fn separable_corpus_is_classified_perfectly() {
    let data = [
        (1, "great fun great"),
        (1, "fun fun"),
        (1, "great"),
        (0, "dull bad"),
        (0, "bad bad dull"),
        (0, "dull"),
    ];
    let corpus = common::build(common::sentiment_schema(), &data, 1);
    let disc = train_discriminator(&corpus, 0, 1.0).unwrap();
    assert_eq!(disc.accuracy(&corpus), 1.0);
}
