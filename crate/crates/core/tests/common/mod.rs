//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use std::f64::consts::PI;

use mfsel_core::hmm::{GaussianComponent, GmmEmission, HmmModel};
use mfsel_core::FeatureSequence;
use rand::Rng;

/// One-sided `|X[m]|^2 / n` by the O(N^2) sum `sum_n x[n] e^{-j 2 pi m n / nfft}`
/// over a zero-padded length-`nfft` frame.
pub fn direct_power_spectrum(x: &[f64], nfft: usize) -> Vec<f64> {
    let n = x.len();
    (0..=nfft / 2)
        .map(|m| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &v) in x.iter().enumerate() {
                let angle = -2.0 * PI * (m * k) as f64 / nfft as f64;
                re += v * angle.cos();
                im += v * angle.sin();
            }
            (re * re + im * im) / n as f64
        })
        .collect()
}

/// Direct double loop over the between/within variance ratio: unweighted
/// mean over classes of squared mean deviations, divided by the mean of the
/// per-class population variances.
pub fn brute_f_ratio(rows: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Vec<f64> {
    let dim = rows[0].len();
    let mut out = Vec::with_capacity(dim);
    for d in 0..dim {
        let mut grand = 0.0;
        for r in rows {
            grand += r[d];
        }
        grand /= rows.len() as f64;

        let mut between = 0.0;
        let mut within = 0.0;
        for c in 0..n_classes {
            let members: Vec<f64> = rows
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == c)
                .map(|(r, _)| r[d])
                .collect();
            let m = members.len() as f64;
            let mu = members.iter().sum::<f64>() / m;
            let s = members.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / m;
            between += (mu - grand) * (mu - grand);
            within += s;
        }
        out.push((between / n_classes as f64) / (within / n_classes as f64));
    }
    out
}

fn naive_emission_density(em: &GmmEmission, x: &[f64]) -> f64 {
    em.weights
        .iter()
        .zip(&em.components)
        .map(|(w, c)| {
            let mut p = *w;
            for ((xi, mu), var) in x.iter().zip(c.mean()).zip(c.variance()) {
                p *= (-(xi - mu) * (xi - mu) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
            }
            p
        })
        .sum()
}

/// `ln P(X)` by enumerating every state path and summing the exponentiated
/// joint log-probabilities `ln pi + sum ln a + sum ln b`.
pub fn brute_force_log_likelihood(model: &HmmModel, frames: &[Vec<f64>]) -> f64 {
    let q = model.pi.len();
    let t_len = frames.len();
    let log_b: Vec<Vec<f64>> = frames
        .iter()
        .map(|x| {
            model
                .emissions
                .iter()
                .map(|em| naive_emission_density(em, x).ln())
                .collect()
        })
        .collect();
    let mut joints = Vec::new();
    let mut path = vec![0usize; t_len];
    loop {
        let mut lp = model.pi[path[0]].ln() + log_b[0][path[0]];
        for t in 1..t_len {
            lp += model.trans[path[t - 1]][path[t]].ln() + log_b[t][path[t]];
        }
        joints.push(lp);

        let mut pos = 0;
        loop {
            if pos == t_len {
                let max = joints.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = joints.iter().map(|j| (j - max).exp()).sum();
                return max + sum.ln();
            }
            path[pos] += 1;
            if path[pos] < q {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}

/// Best single-path joint log-probability, by enumeration.
pub fn best_path_log_prob(model: &HmmModel, frames: &[Vec<f64>]) -> f64 {
    let q = model.pi.len();
    let t_len = frames.len();
    let total = q.pow(t_len as u32);
    (0..total)
        .map(|mut code| {
            let path: Vec<usize> = (0..t_len)
                .map(|_| {
                    let s = code % q;
                    code /= q;
                    s
                })
                .collect();
            let mut lp = model.pi[path[0]].ln()
                + naive_emission_density(&model.emissions[path[0]], &frames[0]).ln();
            for t in 1..t_len {
                lp += model.trans[path[t - 1]][path[t]].ln()
                    + naive_emission_density(&model.emissions[path[t]], &frames[t]).ln();
            }
            lp
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// Fully connected model with random parameters.
pub fn random_model<R: Rng>(rng: &mut R, q: usize, m: usize, d: usize) -> HmmModel {
    HmmModel {
        class_label: "random".into(),
        pi: random_simplex(rng, q),
        trans: (0..q).map(|_| random_simplex(rng, q)).collect(),
        emissions: (0..q)
            .map(|_| {
                let components = (0..m)
                    .map(|_| {
                        GaussianComponent::new(
                            (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                            (0..d).map(|_| rng.gen_range(0.3..2.0)).collect(),
                        )
                        .unwrap()
                    })
                    .collect();
                GmmEmission::new(random_simplex(rng, m), components).unwrap()
            })
            .collect(),
        dim: d,
    }
}

pub fn random_frames<R: Rng>(rng: &mut R, t: usize, d: usize) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect()
}

/// Sequences drawn from a left-to-right source: each of `segments` segments
/// has its own mean, plus uniform noise.
pub fn segmented_sequences<R: Rng>(
    rng: &mut R,
    n: usize,
    segments: usize,
    d: usize,
) -> Vec<FeatureSequence> {
    let means: Vec<Vec<f64>> = (0..segments)
        .map(|_| (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect())
        .collect();
    (0..n)
        .map(|i| {
            let t = rng.gen_range(12..30);
            let frames = (0..t)
                .map(|step| {
                    let seg = step * segments / t;
                    means[seg]
                        .iter()
                        .map(|mu| {
                            mu + rng.gen_range(-1.0..1.0)
                                + 0.3 * rng.gen_range(-1.0f64..1.0).powi(3)
                        })
                        .collect()
                })
                .collect();
            FeatureSequence::new(format!("seq{i}"), Some("c".into()), frames).unwrap()
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
