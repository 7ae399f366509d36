//! Shared fixture for the benchmarks: models trained on the bundled sample
//! corpus.

use std::path::Path;

use gibbsgen_core::{load_corpus, ConstraintSchema, ModelBundle, TrainOptions};

pub fn sample_bundle() -> ModelBundle {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let schema = ConstraintSchema::load(data.join("schema.txt")).expect("sample schema");
    let corpus = load_corpus(data.join("reviews.tsv"), schema, 2).expect("sample corpus");
    let options = TrainOptions {
        holdout: 0.0,
        ..TrainOptions::default()
    };
    ModelBundle::train(&corpus, &options).expect("training").0
}
