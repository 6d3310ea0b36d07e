mod common;

use mfsel_core::fratio::{f_ratio_of, select_top_k, FRatioReport, LabeledFeatureSet};
use mfsel_core::frontend::{dct_matrix, power_spectrum, Frame};
use mfsel_core::hmm::{forward_log_likelihood, gmm_log_pdf, train, train_observed};
use mfsel_core::{FeatureSequence, FrontendConfig, TrainingConfig, Window};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn rect_nopad() -> FrontendConfig {
    FrontendConfig {
        window: Window::Rectangular,
        fft_pad: false,
        ..FrontendConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_matches_direct_sum(samples in prop::collection::vec(-1.0f64..1.0, 2..64), pad in any::<bool>()) {
        let cfg = FrontendConfig { fft_pad: pad, ..rect_nopad() };
        let ps = power_spectrum(&Frame { samples: samples.clone() }, &cfg, 8000);
        let nfft = if pad { samples.len().next_power_of_two() } else { samples.len() };
        let direct = direct_power_spectrum(&samples, nfft);
        let scale = direct.iter().cloned().fold(1e-300, f64::max);
        prop_assert_eq!(ps.bins.len(), direct.len());
        for (a, b) in ps.bins.iter().zip(&direct) {
            prop_assert!(*a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn parseval_without_padding(samples in prop::collection::vec(-1.0f64..1.0, 1..128)) {
        let ps = power_spectrum(&Frame { samples: samples.clone() }, &rect_nopad(), 8000);
        let energy: f64 = samples.iter().map(|x| x * x).sum();
        prop_assert!(rel_err(ps.two_sided_total(), energy) <= 1e-9 || energy < 1e-300);
    }

    #[test]
    fn fratio_affine_invariant(
        seed in any::<u64>(),
        a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
        b in -100.0f64..100.0,
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let rows: Vec<Vec<f64>> = labels.iter().map(|&c| vec![rng.gen_range(-1.0..1.0) + c as f64, rng.gen_range(-1.0..1.0)]).collect();
        let classes: Vec<String> = (0..4).map(|c| c.to_string()).collect();
        let base = f_ratio_of(&LabeledFeatureSet::new(rows.clone(), labels.clone(), classes.clone()).unwrap()).unwrap();
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| vec![a * r[0] + b, r[1]]).collect();
        let after = f_ratio_of(&LabeledFeatureSet::new(moved, labels, classes).unwrap()).unwrap();
        prop_assert!(rel_err(after.f[0], base.f[0]) <= 1e-9);
        prop_assert_eq!(after.f[1], base.f[1]);
    }

    #[test]
    fn fratio_matches_brute_force(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // unbalanced classes exercise the unweighted class average
        let labels: Vec<usize> = (0..60).map(|i| if i % 7 == 0 { 2 } else { i % 2 }).collect();
        let rows: Vec<Vec<f64>> = labels.iter().map(|&c| (0..5).map(|d| rng.gen_range(-1.0..1.0) * (d + 1) as f64 + c as f64).collect()).collect();
        let expected = brute_f_ratio(&rows, &labels, 3);
        let classes: Vec<String> = (0..3).map(|c| c.to_string()).collect();
        let got = f_ratio_of(&LabeledFeatureSet::new(rows, labels, classes).unwrap()).unwrap();
        for (a, b) in got.f.iter().zip(&expected) {
            prop_assert!(rel_err(*a, *b) <= 1e-9);
        }
    }

    #[test]
    fn top_k_prefixes(values in prop::collection::vec(0.0f64..10.0, 1..13)) {
        let report = FRatioReport::from_values(values.clone()).unwrap();
        let d = values.len();
        let mut sorted = report.ranking.clone();
        sorted.sort();
        prop_assert_eq!(sorted, (1..=d).collect::<Vec<_>>());
        for k1 in 1..=d {
            let small = select_top_k(&report, k1).unwrap();
            for k2 in k1..=d {
                let big = select_top_k(&report, k2).unwrap();
                prop_assert_eq!(&big.indices[..k1], &small.indices[..]);
            }
        }
        for w in report.ranking.windows(2) {
            prop_assert!(values[w[0] - 1] >= values[w[1] - 1]);
        }
    }

    #[test]
    fn forward_dominates_best_path(seed in any::<u64>(), q in 1usize..4, m in 1usize..3, t in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, q, m, 2);
        let frames = random_frames(&mut rng, t, 2);
        let seq = FeatureSequence::new("p", None, frames.clone()).unwrap();
        let ll = forward_log_likelihood(&model, &seq).unwrap();
        prop_assert!(rel_err(ll, brute_force_log_likelihood(&model, &frames)) <= 1e-9);
        prop_assert!(ll >= best_path_log_prob(&model, &frames) - 1e-9);
    }

    #[test]
    fn gmm_lse_matches_linear(seed in any::<u64>(), m in 1usize..4) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, 1, m, 3);
        let em = &model.emissions[0];
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let naive: f64 = em.weights.iter().zip(&em.components).map(|(w, c)| {
            let mut p = *w;
            for ((xi, mu), v) in x.iter().zip(c.mean()).zip(c.variance()) {
                p *= (-(xi - mu).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
            }
            p
        }).sum();
        prop_assert!((gmm_log_pdf(em, &x).unwrap() - naive.ln()).abs() <= 1e-10);
    }
}

#[test]
fn dct_rows_orthogonal_for_default_shape() {
    let m = dct_matrix(12, 26);
    for i in 0..12 {
        for j in 0..12 {
            if i != j {
                let dot: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum();
                assert!(dot.abs() <= 1e-9, "rows {i},{j}: {dot}");
            }
        }
    }
}

#[test]
fn forward_brute_force_small_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for q in 1..=3 {
        for m in 1..=2 {
            for t in 1..=6 {
                let model = random_model(&mut rng, q, m, 2);
                let frames = random_frames(&mut rng, t, 2);
                let seq = FeatureSequence::new("g", None, frames.clone()).unwrap();
                let fast = forward_log_likelihood(&model, &seq).unwrap();
                let slow = brute_force_log_likelihood(&model, &frames);
                assert!(
                    rel_err(fast, slow) <= 1e-9,
                    "q={q} m={m} t={t}: {fast} vs {slow}"
                );
            }
        }
    }
}

#[test]
fn forward_handles_long_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = random_model(&mut rng, 3, 2, 2);
    let seq = FeatureSequence::new("long", None, random_frames(&mut rng, 5000, 2)).unwrap();
    let ll = forward_log_likelihood(&model, &seq).unwrap();
    assert!(ll.is_finite() && ll < -1000.0);
}

#[test]
fn training_preserves_left_to_right_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let seqs = segmented_sequences(&mut rng, 12, 3, 2);
    let cfg = TrainingConfig::default();
    let mut checked = 0;
    let (model, trace) = train_observed(&seqs, &cfg, |_, model, _| {
        checked += 1;
        for (i, row) in model.trans.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if j < i || j > i + 1 {
                    assert_eq!(*p, 0.0, "trans[{i}][{j}]");
                }
            }
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        assert_eq!(&model.pi[1..], &[0.0, 0.0]);
    })
    .unwrap();
    assert!(checked >= 1);
    assert!(trace.log_likelihoods.len() <= cfg.max_iters + 1);
    model.validate().unwrap();
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let seqs = segmented_sequences(&mut rng, 8, 3, 4);
    let cfg = TrainingConfig {
        seed: 42,
        ..TrainingConfig::default()
    };
    let a = train(&seqs, &cfg).unwrap();
    let b = train(&seqs, &cfg).unwrap();
    assert_eq!(a, b);
    let bits = |m: &mfsel_core::HmmModel| -> Vec<u64> {
        m.emissions
            .iter()
            .flat_map(|e| {
                e.components
                    .iter()
                    .flat_map(|c| c.mean().iter().chain(c.variance()))
            })
            .map(|v| v.to_bits())
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn em_stops_on_relative_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let seqs = segmented_sequences(&mut rng, 10, 2, 2);
    let loose = TrainingConfig {
        rel_tol: 0.5,
        max_iters: 50,
        ..TrainingConfig::default()
    };
    let (_, trace) = train_observed(&seqs, &loose, |_, _, _| {}).unwrap();
    assert!(trace.converged);
    assert!(trace.log_likelihoods.len() < 50);
    let capped = TrainingConfig {
        rel_tol: 1e-15,
        max_iters: 3,
        ..TrainingConfig::default()
    };
    let (_, trace) = train_observed(&seqs, &capped, |_, _, _| {}).unwrap();
    assert_eq!(trace.log_likelihoods.len(), 3);
}
