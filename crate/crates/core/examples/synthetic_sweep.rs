//! Runs the hold-out sweep on the synthetic five-vowel corpus and prints the
//! accuracy table and the averaged F-ratio ranking.

use std::time::Instant;

use mfsel_core::corpus::{build_synthetic_corpus_with, SynthOptions};
use mfsel_core::eval::{fratio_csv, sweep, EvalConfig, FeatureCorpus};
use mfsel_core::frontend::extract_corpus;
use mfsel_core::{FrontendConfig, TrainingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let iterations: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(50);
    let defaults = SynthOptions::default();
    let aspiration: f64 = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(defaults.aspiration);
    let snr_db: f64 = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(defaults.snr_db);

    let start = Instant::now();
    let corpus = build_synthetic_corpus_with(&SynthOptions {
        seed,
        aspiration,
        snr_db,
        ..defaults
    })?;
    let features = extract_corpus(&corpus, &FrontendConfig::default())?;
    let data = FeatureCorpus::new(&features, corpus.classes())?;
    let eval = EvalConfig {
        n_iterations: iterations,
        seed,
        ..EvalConfig::default()
    };
    let report = sweep(&data, &eval, &TrainingConfig::default())?;

    print!("{}", report.summary_csv());
    print!("{}", fratio_csv(&report.mean_fratio()?));
    eprintln!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
