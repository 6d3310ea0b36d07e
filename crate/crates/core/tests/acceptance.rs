//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use mfsel_core::corpus::{build_synthetic_corpus, SynthOptions};
use mfsel_core::eval::{fratio_csv, sweep, EvalConfig, FeatureCorpus};
use mfsel_core::fratio::{f_ratio_of, LabeledFeatureSet};
use mfsel_core::frontend::{extract_corpus, hz_to_mel, mel_to_hz, mfcc, power_spectrum, Frame};
use mfsel_core::hmm::{forward_log_likelihood, train_observed};
use mfsel_core::{FeatureSequence, FrontendConfig, TrainingConfig, Window};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn run(id: &str, title: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let passed = outcome.passed && in_time;
    println!(
        "[{}] {id} {title}: {} ({:.2?} of {:.0?}{})",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed,
        budget,
        if in_time { "" } else { ", over budget" }
    );
    passed
}

fn random_frame(rng: &mut ChaCha8Rng, n: usize) -> Frame {
    Frame {
        samples: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

fn ac1_dft_oracle() -> Outcome {
    let cfg = FrontendConfig {
        window: Window::Rectangular,
        fft_pad: false,
        ..FrontendConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for n in [4, 16, 480] {
        for _ in 0..50 {
            let frame = random_frame(&mut rng, n);
            let fast = power_spectrum(&frame, &cfg, 16_000);
            let slow = direct_power_spectrum(&frame.samples, n);
            let scale = slow.iter().cloned().fold(0.0, f64::max);
            for (a, b) in fast.bins.iter().zip(&slow) {
                worst = worst.max((a - b).abs() / b.abs().max(1e-12 * scale));
            }
        }
    }
    check(
        worst <= 1e-6,
        format!("max relative error {worst:.2e} (tol 1e-6)"),
    )
}

fn ac2_parseval() -> Outcome {
    let cfg = FrontendConfig {
        window: Window::Rectangular,
        fft_pad: false,
        ..FrontendConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let n = [16, 480, 481, 33][i % 4];
        let frame = random_frame(&mut rng, n);
        let energy: f64 = frame.samples.iter().map(|x| x * x).sum();
        let total = power_spectrum(&frame, &cfg, 16_000).two_sided_total();
        worst = worst.max(rel_err(total, energy));
    }
    check(
        worst <= 1e-6,
        format!("max relative error {worst:.2e} (tol 1e-6)"),
    )
}

fn ac3_mel_round_trip() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let f = 10f64.powf(i as f64 / 999.0 * 8000f64.log10());
        let back = mel_to_hz(hz_to_mel(f).unwrap()).unwrap();
        worst = worst.max(rel_err(back, f));
    }
    let at_700 = (hz_to_mel(700.0).unwrap() - 2595.0 * 2f64.log10()).abs();
    check(
        worst <= 1e-9 && at_700 <= 1e-12,
        format!("max round-trip relative error {worst:.2e} (tol 1e-9), |mel(700) - 2595 log10 2| = {at_700:.1e} (tol 1e-12)"),
    )
}

fn ac4_gain_invariance() -> Outcome {
    let cfg = FrontendConfig::default();
    let corpus = build_synthetic_corpus(4, 16_000, 104).unwrap();
    let mut worst: f64 = 0.0;
    let mut floored = false;
    for clip in corpus.clips() {
        let base = mfcc(clip, &cfg).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let scaled = mfcc(&clip.scaled(c), &cfg).unwrap();
            for (a, b) in base
                .frames
                .iter()
                .flatten()
                .zip(scaled.frames.iter().flatten())
            {
                worst = worst.max((a - b).abs());
            }
        }
        // precondition of the property: no energy hits the log floor
        let ex = mfsel_core::frontend::Extractor::new(&cfg, clip.sample_rate).unwrap();
        floored |= ex
            .filterbank_energies(&clip.scaled(0.5))
            .unwrap()
            .iter()
            .flatten()
            .any(|&s| s <= cfg.log_floor);
    }
    check(
        worst <= 1e-8 && !floored && corpus.len() == 20,
        format!("{} clips, max |dC| {worst:.2e} (tol 1e-8)", corpus.len()),
    )
}

fn ac5_fratio_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mut labels: Vec<usize> = (0..100).map(|i| i % 5).collect();
        labels.shuffle(&mut rng);
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|&c| {
                (0..12)
                    .map(|d| {
                        rng.gen_range(-1.0..1.0) * (1.0 + d as f64) + c as f64 * 0.3 * d as f64
                    })
                    .collect()
            })
            .collect();
        let expected = brute_f_ratio(&rows, &labels, 5);
        let classes = (0..5).map(|c| c.to_string()).collect();
        let got = f_ratio_of(&LabeledFeatureSet::new(rows, labels, classes).unwrap()).unwrap();
        for (a, b) in got.f.iter().zip(&expected) {
            worst = worst.max(rel_err(*a, *b));
        }
    }
    let hand = LabeledFeatureSet::new(
        vec![vec![0.0], vec![2.0], vec![4.0], vec![6.0]],
        vec![0, 0, 1, 1],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let f_hand = f_ratio_of(&hand).unwrap().f[0];
    check(
        worst <= 1e-9 && (f_hand - 4.0).abs() <= 1e-12,
        format!("max relative error {worst:.2e} (tol 1e-9), hand case F = {f_hand}"),
    )
}

fn ac6_affine_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut labels: Vec<usize> = (0..100).map(|i| i % 5).collect();
    labels.shuffle(&mut rng);
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&c| {
            (0..12)
                .map(|d| rng.gen_range(-1.0..1.0) + (c * d) as f64 * 0.1)
                .collect()
        })
        .collect();
    let classes: Vec<String> = (0..5).map(|c| c.to_string()).collect();
    let base =
        f_ratio_of(&LabeledFeatureSet::new(rows.clone(), labels.clone(), classes.clone()).unwrap())
            .unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in [(2.0, 0.0), (1.0, 5.0), (-3.0, 7.0)] {
        for d in 0..12 {
            let moved: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r[d] = a * r[d] + b;
                    r
                })
                .collect();
            let f = f_ratio_of(
                &LabeledFeatureSet::new(moved, labels.clone(), classes.clone()).unwrap(),
            )
            .unwrap();
            worst = worst.max(rel_err(f.f[d], base.f[d]));
        }
    }
    check(
        worst <= 1e-9,
        format!("max relative change {worst:.2e} (tol 1e-9)"),
    )
}

fn ac7_forward_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut worst: f64 = 0.0;
    for i in 0..25 {
        let q = 1 + i % 3;
        let m = 1 + (i / 3) % 2;
        let t = rng.gen_range(1..=6);
        let model = random_model(&mut rng, q, m, 2);
        let frames = random_frames(&mut rng, t, 2);
        let seq = FeatureSequence::new("r", None, frames.clone()).unwrap();
        let fast = forward_log_likelihood(&model, &seq).unwrap();
        worst = worst.max(rel_err(fast, brute_force_log_likelihood(&model, &frames)));
    }
    check(
        worst <= 1e-9,
        format!("25 models, max relative error {worst:.2e} (tol 1e-9)"),
    )
}

fn ac8_em_monotone() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst_drop: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut floor_ok = true;
    let mut iterations = 0;
    for run in 0..10 {
        let seqs = segmented_sequences(&mut rng, 20, 3, 3);
        let cfg = TrainingConfig {
            n_states: 3,
            n_mix: 2,
            seed: run,
            rel_tol: 1e-12,
            ..TrainingConfig::default()
        };
        let (_, trace) = train_observed(&seqs, &cfg, |_, model, _| {
            iterations += 1;
            let mut sums = vec![model.pi.iter().sum::<f64>()];
            sums.extend(model.trans.iter().map(|r| r.iter().sum::<f64>()));
            sums.extend(
                model
                    .emissions
                    .iter()
                    .map(|e| e.weights.iter().sum::<f64>()),
            );
            for s in sums {
                worst_sum = worst_sum.max((s - 1.0).abs());
            }
            floor_ok &= model
                .emissions
                .iter()
                .flat_map(|e| &e.components)
                .flat_map(|c| c.variance())
                .all(|&v| v >= cfg.variance_floor);
        })
        .unwrap();
        for w in trace.log_likelihoods.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    check(
        worst_drop <= 1e-8 && worst_sum <= 1e-9 && floor_ok,
        format!(
            "{iterations} iterations, largest log-likelihood drop {worst_drop:.2e} (tol 1e-8), max |sum - 1| {worst_sum:.2e} (tol 1e-9)"
        ),
    )
}

struct SweepCsvs {
    summary: String,
    detail: String,
    confusion: String,
    fratio: String,
}

fn synthetic_sweep() -> (mfsel_core::SweepReport, SweepCsvs) {
    let opts = SynthOptions {
        seed: 2024,
        ..SynthOptions::default()
    };
    let corpus = mfsel_core::corpus::build_synthetic_corpus_with(&opts).unwrap();
    let features = extract_corpus(&corpus, &FrontendConfig::default()).unwrap();
    let data = FeatureCorpus::new(&features, corpus.classes()).unwrap();
    let eval = EvalConfig {
        train_fraction: 0.8,
        n_iterations: 50,
        subset_sizes: (3..=12).collect(),
        seed: 2024,
        ..EvalConfig::default()
    };
    let report = sweep(&data, &eval, &TrainingConfig::default()).unwrap();
    let csvs = SweepCsvs {
        summary: report.summary_csv(),
        detail: report.detail_csv(),
        confusion: report.confusion_csv(),
        fratio: fratio_csv(&report.mean_fratio().unwrap()),
    };
    (report, csvs)
}

fn ac9_protocol_shape(first: &mut Option<SweepCsvs>) -> Outcome {
    let (report, csvs) = synthetic_sweep();
    let acc = |k: usize| report.result_for(k).map_or(f64::NAN, |r| r.mean_accuracy);
    let at12 = acc(12);
    let at3 = acc(3);
    let (best_k, best) = (6..=12)
        .map(|k| (k, acc(k)))
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    let best_any = (3..=12).map(acc).fold(f64::NEG_INFINITY, f64::max);
    let a = at12 >= 90.0;
    let b = best >= at12 - 5.0;
    let c = at3 < best_any;
    let table: Vec<String> = (3..=12).map(|k| format!("{k}:{:.2}", acc(k))).collect();
    println!("      accuracy by k: {}", table.join(" "));
    *first = Some(csvs);
    check(
        a && b && c && report.n_iterations == 50,
        format!(
            "(a) k=12 {at12:.2}% >= 90: {a}; (b) best k in 6..12 = {best_k} at {best:.2}% within 5 pts of k=12: {b}; (c) k=3 {at3:.2}% < best {best_any:.2}%: {c}"
        ),
    )
}

fn ac10_determinism(first: &Option<SweepCsvs>) -> Outcome {
    let Some(first) = first else {
        return check(false, "criterion 9 produced no reports");
    };
    let (_, second) = synthetic_sweep();
    let same = first.summary == second.summary
        && first.detail == second.detail
        && first.confusion == second.confusion
        && first.fratio == second.fratio;
    check(
        same,
        format!(
            "summary/detail/confusion/fratio CSVs byte-identical: {same} ({} bytes)",
            first.summary.len() + first.detail.len() + first.confusion.len() + first.fratio.len()
        ),
    )
}

fn main() {
    let secs = Duration::from_secs;
    let mut results = vec![
        run("AC1", "DFT vs direct O(N^2) sum", secs(5), ac1_dft_oracle),
        run("AC2", "Parseval", secs(1), ac2_parseval),
        run("AC3", "mel round trip", secs(1), ac3_mel_round_trip),
        run("AC4", "MFCC gain invariance", secs(10), ac4_gain_invariance),
        run("AC5", "F-ratio vs brute force", secs(1), ac5_fratio_oracle),
        run(
            "AC6",
            "F-ratio affine invariance",
            secs(1),
            ac6_affine_invariance,
        ),
        run(
            "AC7",
            "forward vs path enumeration",
            secs(10),
            ac7_forward_oracle,
        ),
        run(
            "AC8",
            "EM monotonicity and stochasticity",
            secs(60),
            ac8_em_monotone,
        ),
    ];
    let mut first = None;
    results.push(run(
        "AC9",
        "synthetic hold-out sweep shape",
        secs(600),
        || ac9_protocol_shape(&mut first),
    ));
    results.push(run("AC10", "sweep determinism", secs(600), || {
        ac10_determinism(&first)
    }));

    let failed = results.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
