//! Continuous-density HMMs with diagonal-covariance GMM emissions.
//!
//! One left-to-right model is trained per class with Baum-Welch over all of
//! that class's training sequences; a sequence is classified by the model
//! giving it the highest forward log-likelihood.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::FeatureSequence;
use crate::math::{ln_prob, log_sum_exp};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const KMEANS_ITERS: usize = 10;
/// Mixture components whose occupancy falls below this keep their previous
/// mean and variance.
const MIN_OCCUPANCY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawComponent", into = "RawComponent")]
pub struct GaussianComponent {
    mean: Vec<f64>,
    variance: Vec<f64>,
    log_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct RawComponent {
    mean: Vec<f64>,
    variance: Vec<f64>,
}

impl From<RawComponent> for GaussianComponent {
    fn from(raw: RawComponent) -> Self {
        GaussianComponent::from_parts(raw.mean, raw.variance)
    }
}

impl From<GaussianComponent> for RawComponent {
    fn from(c: GaussianComponent) -> Self {
        RawComponent {
            mean: c.mean,
            variance: c.variance,
        }
    }
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.len() != variance.len() {
            return Err(Error::Dimension {
                expected: mean.len(),
                found: variance.len(),
            });
        }
        if variance.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Precondition(
                "variances must be positive and finite".into(),
            ));
        }
        Ok(Self::from_parts(mean, variance))
    }

    fn from_parts(mean: Vec<f64>, variance: Vec<f64>) -> Self {
        let log_norm =
            -0.5 * (mean.len() as f64 * LN_2PI + variance.iter().map(|v| v.ln()).sum::<f64>());
        GaussianComponent {
            mean,
            variance,
            log_norm,
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log density; `x` must have the component's dimension.
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let quad: f64 = x
            .iter()
            .zip(&self.mean)
            .zip(&self.variance)
            .map(|((x, m), v)| (x - m) * (x - m) / v)
            .sum();
        self.log_norm - 0.5 * quad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmEmission {
    pub weights: Vec<f64>,
    pub components: Vec<GaussianComponent>,
}

impl GmmEmission {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Result<Self> {
        let em = GmmEmission {
            weights,
            components,
        };
        em.validate()?;
        Ok(em)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.components.len() {
            return Err(Error::Precondition(format!(
                "{} weights for {} components",
                self.weights.len(),
                self.components.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Precondition(
                "mixture weights must be nonnegative".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "mixture weights sum to {total}"
            )));
        }
        let dim = self.dim();
        if let Some(c) = self.components.iter().find(|c| c.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: c.dim(),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, GaussianComponent::dim)
    }

    /// `ln w_m + ln N(x; mu_m, Sigma_m)` for every component.
    fn component_log_terms(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .iter()
                .zip(&self.components)
                .map(|(w, c)| ln_prob(*w) + c.log_pdf(x)),
        );
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let mut terms = Vec::with_capacity(self.components.len());
        self.component_log_terms(x, &mut terms);
        log_sum_exp(&terms)
    }
}

/// `ln sum_m w_m N(x; mu_m, Sigma_m)`, evaluated with log-sum-exp.
pub fn gmm_log_pdf(em: &GmmEmission, x: &[f64]) -> Result<f64> {
    if x.len() != em.dim() {
        return Err(Error::Dimension {
            expected: em.dim(),
            found: x.len(),
        });
    }
    Ok(em.log_density(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    #[serde(rename = "label")]
    pub class_label: String,
    pub pi: Vec<f64>,
    pub trans: Vec<Vec<f64>>,
    pub emissions: Vec<GmmEmission>,
    pub dim: usize,
}

impl HmmModel {
    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.pi.len();
        if q == 0 || self.trans.len() != q || self.emissions.len() != q {
            return Err(Error::Precondition(format!(
                "inconsistent state counts: pi {q}, trans {}, emissions {}",
                self.trans.len(),
                self.emissions.len()
            )));
        }
        let stochastic = |row: &[f64]| {
            row.iter().all(|p| *p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        };
        if !stochastic(&self.pi) {
            return Err(Error::Precondition(
                "initial distribution does not sum to 1".into(),
            ));
        }
        for (i, row) in self.trans.iter().enumerate() {
            if row.len() != q || !stochastic(row) {
                return Err(Error::Precondition(format!(
                    "transition row {i} is not stochastic"
                )));
            }
        }
        for em in &self.emissions {
            em.validate()?;
            if em.dim() != self.dim {
                return Err(Error::Dimension {
                    expected: self.dim,
                    found: em.dim(),
                });
            }
        }
        Ok(())
    }

    fn log_params(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let log_pi = self.pi.iter().map(|&p| ln_prob(p)).collect();
        let log_trans = self
            .trans
            .iter()
            .map(|row| row.iter().map(|&p| ln_prob(p)).collect())
            .collect();
        (log_pi, log_trans)
    }
}

fn check_sequence(model: &HmmModel, seq: &FeatureSequence) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::Precondition(format!(
            "sequence {} is empty",
            seq.clip_id
        )));
    }
    if seq.dim() != model.dim {
        return Err(Error::Dimension {
            expected: model.dim,
            found: seq.dim(),
        });
    }
    Ok(())
}

/// Marginal `ln P(X)` by the forward recursion in log space.
pub fn forward_log_likelihood(model: &HmmModel, seq: &FeatureSequence) -> Result<f64> {
    check_sequence(model, seq)?;
    let (log_pi, log_trans) = model.log_params();
    let q = model.n_states();
    let mut alpha: Vec<f64> = (0..q)
        .map(|s| log_pi[s] + model.emissions[s].log_density(&seq.frames[0]))
        .collect();
    let mut next = vec![0.0; q];
    let mut terms = vec![0.0; q];
    for x in &seq.frames[1..] {
        for (j, slot) in next.iter_mut().enumerate() {
            for i in 0..q {
                terms[i] = alpha[i] + log_trans[i][j];
            }
            *slot = log_sum_exp(&terms) + model.emissions[j].log_density(x);
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    Ok(log_sum_exp(&alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub n_states: usize,
    pub n_mix: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub variance_floor: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            n_states: 3,
            n_mix: 2,
            max_iters: 20,
            rel_tol: 1e-4,
            variance_floor: 1e-4,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_states < 1 {
            return Err(Error::Config("training.n_states must be at least 1".into()));
        }
        if self.n_mix < 1 {
            return Err(Error::Config("training.n_mix must be at least 1".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::Config(
                "training.max_iters must be at least 1".into(),
            ));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config("training.rel_tol must be positive".into()));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::Config(
                "training.variance_floor must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-iteration record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    /// Total log-likelihood of the training data under the parameters at the
    /// start of each iteration.
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

pub fn train(sequences: &[FeatureSequence], cfg: &TrainingConfig) -> Result<HmmModel> {
    train_observed(sequences, cfg, |_, _, _| {}).map(|(model, _)| model)
}

/// Trains like [`train`] and calls `observe(iteration, model, ll)` after every
/// re-estimation, where `ll` is the log-likelihood the iteration started from.
pub fn train_observed<F>(
    sequences: &[FeatureSequence],
    cfg: &TrainingConfig,
    mut observe: F,
) -> Result<(HmmModel, TrainingTrace)>
where
    F: FnMut(usize, &HmmModel, f64),
{
    cfg.validate()?;
    let label = check_training_data(sequences, cfg)?;
    let mut model = initialize(sequences, cfg, label)?;
    let mut trace = TrainingTrace {
        log_likelihoods: Vec::new(),
        converged: false,
    };

    for iter in 0..cfg.max_iters {
        let acc = accumulate(&model, sequences)?;
        if let Some(&prev) = trace.log_likelihoods.last() {
            let improvement = (acc.log_likelihood - prev) / prev.abs().max(f64::MIN_POSITIVE);
            if improvement < cfg.rel_tol {
                trace.log_likelihoods.push(acc.log_likelihood);
                trace.converged = true;
                break;
            }
        }
        trace.log_likelihoods.push(acc.log_likelihood);
        reestimate(&mut model, &acc, sequences, cfg.variance_floor);
        observe(iter, &model, acc.log_likelihood);
    }
    Ok((model, trace))
}

fn check_training_data<'a>(
    sequences: &'a [FeatureSequence],
    cfg: &TrainingConfig,
) -> Result<&'a str> {
    let first = sequences
        .first()
        .ok_or_else(|| Error::Precondition("no training sequences".into()))?;
    let dim = first.dim();
    let label = first.label.as_deref().unwrap_or("");
    for seq in sequences {
        if seq.len() < cfg.n_states {
            return Err(Error::Precondition(format!(
                "sequence {} has {} frames, fewer than {} states",
                seq.clip_id,
                seq.len(),
                cfg.n_states
            )));
        }
        if seq.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: seq.dim(),
            });
        }
        if seq.label.as_deref().unwrap_or("") != label {
            return Err(Error::Precondition(format!(
                "training sequences mix labels {label:?} and {:?}",
                seq.label
            )));
        }
        if seq.frames.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateData(format!(
                "sequence {} holds non-finite features",
                seq.clip_id
            )));
        }
    }
    if cfg.n_mix > 1 {
        let reference = &first.frames[0];
        let all_same = sequences
            .iter()
            .flat_map(|s| &s.frames)
            .all(|f| f == reference);
        if all_same {
            return Err(Error::DegenerateData(format!(
                "all observations are identical; cannot seed {} mixture components",
                cfg.n_mix
            )));
        }
    }
    Ok(label)
}

fn initialize(
    sequences: &[FeatureSequence],
    cfg: &TrainingConfig,
    label: &str,
) -> Result<HmmModel> {
    let q = cfg.n_states;
    let dim = sequences[0].dim();
    let mut pools: Vec<Vec<&[f64]>> = vec![Vec::new(); q];
    for seq in sequences {
        let t = seq.len();
        for (s, pool) in pools.iter_mut().enumerate() {
            let (start, end) = (s * t / q, (s + 1) * t / q);
            pool.extend(seq.frames[start..end].iter().map(Vec::as_slice));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut emissions = Vec::with_capacity(q);
    let mut trans = vec![vec![0.0; q]; q];
    for (s, pool) in pools.iter().enumerate() {
        emissions.push(seed_mixture(pool, cfg.n_mix, cfg.variance_floor, &mut rng));
        if s + 1 < q {
            let mean_len = pool.len() as f64 / sequences.len() as f64;
            let stay = (1.0 - 1.0 / mean_len).clamp(0.5, 0.95);
            trans[s][s] = stay;
            trans[s][s + 1] = 1.0 - stay;
        } else {
            trans[s][s] = 1.0;
        }
    }
    let mut pi = vec![0.0; q];
    pi[0] = 1.0;
    Ok(HmmModel {
        class_label: label.to_string(),
        pi,
        trans,
        emissions,
        dim,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations; each cluster becomes one
/// mixture component with its member count as weight.
fn seed_mixture(pool: &[&[f64]], n_mix: usize, floor: f64, rng: &mut ChaCha8Rng) -> GmmEmission {
    let dim = pool[0].len();
    let mut centers: Vec<Vec<f64>> = vec![pool[rng.gen_range(0..pool.len())].to_vec()];
    while centers.len() < n_mix {
        let d2: Vec<f64> = pool
            .iter()
            .map(|x| {
                centers
                    .iter()
                    .map(|c| sq_dist(x, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            d2.iter()
                .position(|&d| {
                    target -= d;
                    target < 0.0
                })
                .unwrap_or(pool.len() - 1)
        } else {
            rng.gen_range(0..pool.len())
        };
        centers.push(pool[pick].to_vec());
    }

    let mut assign = vec![0usize; pool.len()];
    for _ in 0..KMEANS_ITERS {
        let mut changed = false;
        for (a, x) in assign.iter_mut().zip(pool) {
            let best = (0..n_mix)
                .min_by(|&i, &j| sq_dist(x, &centers[i]).total_cmp(&sq_dist(x, &centers[j])))
                .unwrap_or(0);
            changed |= *a != best;
            *a = best;
        }
        let mut sums = vec![vec![0.0; dim]; n_mix];
        let mut counts = vec![0usize; n_mix];
        for (&a, x) in assign.iter().zip(pool) {
            counts[a] += 1;
            sums[a].iter_mut().zip(*x).for_each(|(s, v)| *s += v);
        }
        for m in 0..n_mix {
            if counts[m] > 0 {
                centers[m] = sums[m].iter().map(|s| s / counts[m] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }

    let mut clusters: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..n_mix)
        .map(|m| {
            let members: Vec<&[f64]> = pool
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a == m)
                .map(|(x, _)| *x)
                .collect();
            let count = members.len() as f64;
            if members.is_empty() {
                return (0.0, centers[m].clone(), vec![floor; dim]);
            }
            let mean: Vec<f64> = (0..dim)
                .map(|d| members.iter().map(|x| x[d]).sum::<f64>() / count)
                .collect();
            let var = (0..dim)
                .map(|d| {
                    let v = members
                        .iter()
                        .map(|x| (x[d] - mean[d]).powi(2))
                        .sum::<f64>()
                        / count;
                    v.max(floor)
                })
                .collect();
            (count, mean, var)
        })
        .collect();

    // An empty cluster takes half of the largest one, nudged apart along
    // its standard deviation.
    while let Some(empty) = clusters.iter().position(|c| c.0 == 0.0) {
        let largest = (0..n_mix)
            .max_by(|&i, &j| clusters[i].0.total_cmp(&clusters[j].0))
            .unwrap_or(0);
        let half = clusters[largest].0 / 2.0;
        clusters[largest].0 = half;
        let (mean, var) = (clusters[largest].1.clone(), clusters[largest].2.clone());
        let nudge: Vec<f64> = var.iter().map(|v| 0.2 * v.sqrt()).collect();
        clusters[largest].1 = mean.iter().zip(&nudge).map(|(m, n)| m - n).collect();
        clusters[empty] = (
            half,
            mean.iter().zip(&nudge).map(|(m, n)| m + n).collect(),
            var,
        );
    }

    let total: f64 = clusters.iter().map(|c| c.0).sum();
    let weights = clusters.iter().map(|c| c.0 / total).collect();
    let components = clusters
        .into_iter()
        .map(|(_, mean, var)| GaussianComponent::from_parts(mean, var))
        .collect();
    GmmEmission {
        weights,
        components,
    }
}

/// Sufficient statistics of one E-step.
struct Accumulators {
    log_likelihood: f64,
    pi: Vec<f64>,
    trans: Vec<Vec<f64>>,
    /// Per sequence: posterior of (state, component) per frame, flattened as
    /// `[t][state * n_mix + m]`.
    posteriors: Vec<Vec<Vec<f64>>>,
}

fn accumulate(model: &HmmModel, sequences: &[FeatureSequence]) -> Result<Accumulators> {
    let q = model.n_states();
    let n_mix = model.emissions[0].components.len();
    let (log_pi, log_trans) = model.log_params();

    // (log-likelihood, initial, transition and emission statistics) per sequence
    type SeqStats = (f64, Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>);
    let per_seq: Vec<SeqStats> = sequences
        .par_iter()
        .map(|seq| {
            let t_len = seq.len();
            // component terms and per-state emission log densities
            let mut comp = vec![vec![0.0; q * n_mix]; t_len];
            let mut log_b = vec![vec![0.0; q]; t_len];
            let mut scratch = Vec::with_capacity(n_mix);
            for (t, x) in seq.frames.iter().enumerate() {
                for s in 0..q {
                    model.emissions[s].component_log_terms(x, &mut scratch);
                    log_b[t][s] = log_sum_exp(&scratch);
                    comp[t][s * n_mix..(s + 1) * n_mix].copy_from_slice(&scratch);
                }
            }

            let mut terms = vec![0.0; q];
            let mut alpha = vec![vec![0.0; q]; t_len];
            for s in 0..q {
                alpha[0][s] = log_pi[s] + log_b[0][s];
            }
            for t in 1..t_len {
                for j in 0..q {
                    for i in 0..q {
                        terms[i] = alpha[t - 1][i] + log_trans[i][j];
                    }
                    alpha[t][j] = log_sum_exp(&terms) + log_b[t][j];
                }
            }
            let log_p = log_sum_exp(&alpha[t_len - 1]);

            let mut beta = vec![vec![0.0; q]; t_len];
            for t in (0..t_len - 1).rev() {
                for i in 0..q {
                    for j in 0..q {
                        terms[j] = log_trans[i][j] + log_b[t + 1][j] + beta[t + 1][j];
                    }
                    beta[t][i] = log_sum_exp(&terms);
                }
            }

            let mut trans_num = vec![vec![0.0; q]; q];
            for t in 0..t_len - 1 {
                for i in 0..q {
                    for j in 0..q {
                        let l = alpha[t][i] + log_trans[i][j] + log_b[t + 1][j] + beta[t + 1][j]
                            - log_p;
                        trans_num[i][j] += l.exp();
                    }
                }
            }

            let mut post = vec![vec![0.0; q * n_mix]; t_len];
            for t in 0..t_len {
                for s in 0..q {
                    let gamma = alpha[t][s] + beta[t][s] - log_p;
                    for m in 0..n_mix {
                        post[t][s * n_mix + m] =
                            (gamma + comp[t][s * n_mix + m] - log_b[t][s]).exp();
                    }
                }
            }
            let pi_post = (0..q)
                .map(|s| (alpha[0][s] + beta[0][s] - log_p).exp())
                .collect();
            (log_p, pi_post, trans_num, post)
        })
        .collect();

    let mut acc = Accumulators {
        log_likelihood: 0.0,
        pi: vec![0.0; q],
        trans: vec![vec![0.0; q]; q],
        posteriors: Vec::with_capacity(sequences.len()),
    };
    for (seq, (log_p, pi_post, trans_num, post)) in sequences.iter().zip(per_seq) {
        if !log_p.is_finite() {
            return Err(Error::DegenerateData(format!(
                "sequence {} has zero likelihood under the current model",
                seq.clip_id
            )));
        }
        acc.log_likelihood += log_p;
        acc.pi.iter_mut().zip(&pi_post).for_each(|(a, p)| *a += p);
        for (row, num) in acc.trans.iter_mut().zip(&trans_num) {
            row.iter_mut().zip(num).for_each(|(a, n)| *a += n);
        }
        acc.posteriors.push(post);
    }
    Ok(acc)
}

fn normalize_into(target: &mut [f64], counts: &[f64]) {
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        target
            .iter_mut()
            .zip(counts)
            .for_each(|(t, c)| *t = c / total);
    }
}

fn reestimate(model: &mut HmmModel, acc: &Accumulators, sequences: &[FeatureSequence], floor: f64) {
    let q = model.n_states();
    let n_mix = model.emissions[0].components.len();
    let dim = model.dim;

    normalize_into(&mut model.pi, &acc.pi);
    for (row, counts) in model.trans.iter_mut().zip(&acc.trans) {
        normalize_into(row, counts);
    }

    let mut occ = vec![0.0; q * n_mix];
    let mut sum_x = vec![vec![0.0; dim]; q * n_mix];
    for (seq, post) in sequences.iter().zip(&acc.posteriors) {
        for (x, g) in seq.frames.iter().zip(post) {
            for (sm, &w) in g.iter().enumerate() {
                occ[sm] += w;
                sum_x[sm].iter_mut().zip(x).for_each(|(s, v)| *s += w * v);
            }
        }
    }
    let means: Vec<Vec<f64>> = sum_x
        .iter()
        .zip(&occ)
        .map(|(s, &o)| s.iter().map(|v| v / o).collect())
        .collect();
    let mut sum_sq = vec![vec![0.0; dim]; q * n_mix];
    for (seq, post) in sequences.iter().zip(&acc.posteriors) {
        for (x, g) in seq.frames.iter().zip(post) {
            for (sm, &w) in g.iter().enumerate() {
                sum_sq[sm]
                    .iter_mut()
                    .zip(x.iter().zip(&means[sm]))
                    .for_each(|(s, (v, m))| *s += w * (v - m) * (v - m));
            }
        }
    }

    for (s, em) in model.emissions.iter_mut().enumerate() {
        let state_occ = &occ[s * n_mix..(s + 1) * n_mix];
        normalize_into(&mut em.weights, state_occ);
        for m in 0..n_mix {
            let sm = s * n_mix + m;
            if occ[sm] < MIN_OCCUPANCY {
                continue;
            }
            let var = sum_sq[sm]
                .iter()
                .map(|v| (v / occ[sm]).max(floor))
                .collect();
            em.components[m] = GaussianComponent::from_parts(means[sm].clone(), var);
        }
    }
}

/// Trains one model per class in parallel. `by_class[c]` holds the training
/// sequences of class `c`; every model gets the same configuration except
/// for a per-class seed offset.
pub fn train_per_class(
    by_class: &[Vec<FeatureSequence>],
    cfg: &TrainingConfig,
) -> Result<Vec<HmmModel>> {
    by_class
        .par_iter()
        .enumerate()
        .map(|(c, seqs)| {
            let cfg = TrainingConfig {
                seed: cfg.seed.wrapping_add(c as u64),
                ..cfg.clone()
            };
            train(seqs, &cfg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// Index of the winning model.
    pub predicted: usize,
    pub log_likelihoods: Vec<f64>,
}

/// Scores `seq` under every model; the highest log-likelihood wins, the
/// earliest model on ties.
pub fn classify(models: &[HmmModel], seq: &FeatureSequence) -> Result<Classification> {
    if models.is_empty() {
        return Err(Error::Precondition("no models to classify against".into()));
    }
    let log_likelihoods = models
        .iter()
        .map(|m| forward_log_likelihood(m, seq))
        .collect::<Result<Vec<_>>>()?;
    Ok(Classification {
        predicted: argmax(&log_likelihoods),
        log_likelihoods,
    })
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A set of per-class models as persisted to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub config: TrainingConfig,
    /// Selected coefficients (1-based), when the models were trained on a
    /// projected feature space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<usize>>,
    pub classes: Vec<HmmModel>,
}

impl ModelSet {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: ModelSet = serde_json::from_str(text)?;
        for model in &set.classes {
            model.validate()?;
        }
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.classes
            .iter()
            .map(|m| m.class_label.as_str())
            .collect()
    }
}

/// Standard normal log density at its mean, `-ln(2 pi) / 2`.
pub fn standard_normal_log_peak() -> f64 {
    -0.5 * (2.0 * PI).ln()
}
