use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mfsel_bench::{by_class, fixture};
use mfsel_core::eval::{run_iteration, stratified_split, FeatureCorpus};
use mfsel_core::fratio::{f_ratio_of, CoefficientSubset, LabeledFeatureSet};
use mfsel_core::frontend::Extractor;
use mfsel_core::hmm::{forward_log_likelihood, train};
use mfsel_core::{FrontendConfig, TrainingConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn frontend(c: &mut Criterion) {
    let (corpus, _) = fixture(2, 1);
    let clip = &corpus.clips()[0];
    let extractor = Extractor::new(&FrontendConfig::default(), clip.sample_rate).unwrap();
    c.bench_function("mfcc_0.4s_clip", |b| {
        b.iter(|| extractor.extract(black_box(clip)).unwrap())
    });
}

fn fratio(c: &mut Criterion) {
    let (corpus, features) = fixture(25, 2);
    let data = LabeledFeatureSet::from_sequences(&features, corpus.classes()).unwrap();
    c.bench_function("f_ratio_125_clips", |b| {
        b.iter(|| f_ratio_of(black_box(&data)).unwrap())
    });
}

fn hmm(c: &mut Criterion) {
    let (corpus, features) = fixture(25, 3);
    let groups = by_class(&corpus, &features);
    let cfg = TrainingConfig::default();
    let model = train(&groups[0], &cfg).unwrap();
    c.bench_function("forward_25_frames", |b| {
        b.iter(|| forward_log_likelihood(&model, black_box(&features[30])).unwrap())
    });
    c.bench_function("train_one_class", |b| {
        b.iter(|| train(black_box(&groups[0]), &cfg).unwrap())
    });
}

fn protocol(c: &mut Criterion) {
    let (corpus, features) = fixture(25, 4);
    let data = FeatureCorpus::new(&features, corpus.classes()).unwrap();
    let split =
        stratified_split(&data.class_of, 5, 0.8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let subset = CoefficientSubset::full(12);
    let cfg = TrainingConfig::default();
    let mut group = c.benchmark_group("protocol");
    group.sample_size(10);
    group.bench_function("one_iteration_k12", |b| {
        b.iter(|| run_iteration(&data, &split, &subset, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, frontend, fratio, hmm, protocol);
criterion_main!(benches);
