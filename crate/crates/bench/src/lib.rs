//! Fixtures shared by the pipeline benchmarks.

use mfsel_core::corpus::build_synthetic_corpus;
use mfsel_core::frontend::extract_corpus;
use mfsel_core::{Corpus, FeatureSequence, FrontendConfig};

/// Synthetic corpus and its default MFCCs.
pub fn fixture(per_class: usize, seed: u64) -> (Corpus, Vec<FeatureSequence>) {
    let corpus = build_synthetic_corpus(per_class, 16_000, seed).expect("synthetic corpus");
    let features = extract_corpus(&corpus, &FrontendConfig::default()).expect("features");
    (corpus, features)
}

/// Sequences grouped by class index.
pub fn by_class(corpus: &Corpus, features: &[FeatureSequence]) -> Vec<Vec<FeatureSequence>> {
    let mut out = vec![Vec::new(); corpus.classes().len()];
    for (seq, c) in features.iter().zip(corpus.class_indices()) {
        out[c].push(seq.clone());
    }
    out
}
