//! Repeated stratified hold-out evaluation and the subset-size sweep.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fratio::{
    f_ratio_of, project, select_top_k, CoefficientSubset, FRatioReport, LabeledFeatureSet,
};
use crate::frontend::FeatureSequence;
use crate::hmm::{classify, train_per_class, TrainingConfig};
use crate::math::{mean, sample_std};

/// Which clips the per-iteration F-ratio ranking is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FRatioScope {
    /// Training partition of each split only.
    Train,
    /// Every clip, test clips included, computed once.
    All,
}

impl std::str::FromStr for FRatioScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(FRatioScope::Train),
            "all" => Ok(FRatioScope::All),
            other => Err(Error::Config(format!(
                "unknown F-ratio scope `{other}` (expected train or all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub train_fraction: f64,
    pub n_iterations: usize,
    pub subset_sizes: Vec<usize>,
    pub seed: u64,
    pub fratio_scope: FRatioScope,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train_fraction: 0.8,
            n_iterations: 50,
            subset_sizes: (3..=12).collect(),
            seed: 0,
            fratio_scope: FRatioScope::Train,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(
                "evaluation.train_fraction must lie strictly between 0 and 1".into(),
            ));
        }
        if self.n_iterations < 1 {
            return Err(Error::Config(
                "evaluation.n_iterations must be at least 1".into(),
            ));
        }
        if self.subset_sizes.is_empty() {
            return Err(Error::Config("evaluation.subset_sizes is empty".into()));
        }
        if let Some(k) = self.subset_sizes.iter().find(|&&k| k == 0) {
            return Err(Error::Config(format!(
                "evaluation.subset_sizes contains {k}"
            )));
        }
        Ok(())
    }

    /// Random stream for iteration `index`, derived from the master seed.
    pub fn iteration_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// Clip indices on each side of a hold-out split, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class, `round(train_fraction * count)` clips go to training, clamped
/// so both sides get at least one.
pub fn stratified_split<R: Rng + ?Sized>(
    class_of: &[usize],
    n_classes: usize,
    train_fraction: f64,
    rng: &mut R,
) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Precondition(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..n_classes {
        let mut members: Vec<usize> = class_of
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < 2 {
            return Err(Error::DegenerateClass(format!(
                "class {class} has {} clip(s); a hold-out split needs 2",
                members.len()
            )));
        }
        members.shuffle(rng);
        let n_train =
            ((train_fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Rows are actual classes, columns predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn record(&mut self, actual: usize, predicted: usize) {
        self.counts[actual][predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Percentage of correct decisions.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        100.0 * self.correct() as f64 / total as f64
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            row.iter_mut().zip(other_row).for_each(|(a, b)| *a += b);
        }
    }
}

/// A labeled feature corpus: sequences plus the class index of each.
#[derive(Debug, Clone)]
pub struct FeatureCorpus<'a> {
    pub sequences: &'a [FeatureSequence],
    pub class_of: Vec<usize>,
    pub classes: Vec<String>,
}

impl<'a> FeatureCorpus<'a> {
    pub fn new(sequences: &'a [FeatureSequence], classes: &[String]) -> Result<Self> {
        let class_of = sequences
            .iter()
            .map(|s| {
                let label = s.label.as_deref().ok_or_else(|| {
                    Error::Precondition(format!("sequence {} has no label", s.clip_id))
                })?;
                classes.iter().position(|c| c == label).ok_or_else(|| {
                    Error::Precondition(format!("sequence {} has unknown label {label}", s.clip_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let dim = sequences.first().map_or(0, FeatureSequence::dim);
        if let Some(s) = sequences.iter().find(|s| s.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: s.dim(),
            });
        }
        Ok(FeatureCorpus {
            sequences,
            class_of,
            classes: classes.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.sequences.first().map_or(0, FeatureSequence::dim)
    }

    /// F-ratio over the pooled frames of the given clips.
    pub fn f_ratio(&self, clips: &[usize]) -> Result<FRatioReport> {
        let data = LabeledFeatureSet::from_sequences(
            clips.iter().map(|&i| &self.sequences[i]),
            &self.classes,
        )?;
        f_ratio_of(&data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Trains one model per class on the split's training clips projected onto
/// `subset`, then classifies every test clip.
///
/// Coordinates are taken in ascending coefficient order: the diagonal models
/// do not depend on coordinate order, and this makes the full subset an exact
/// no-op.
pub fn run_iteration(
    corpus: &FeatureCorpus<'_>,
    split: &Split,
    subset: &CoefficientSubset,
    train_cfg: &TrainingConfig,
) -> Result<IterationOutcome> {
    let subset = subset.sorted();
    let n_classes = corpus.classes.len();
    let mut by_class: Vec<Vec<FeatureSequence>> = vec![Vec::new(); n_classes];
    for &i in &split.train {
        by_class[corpus.class_of[i]].push(project(&corpus.sequences[i], &subset)?);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::DegenerateClass(format!(
            "class {} has no training clips",
            corpus.classes[c]
        )));
    }
    let models = train_per_class(&by_class, train_cfg)?;

    let mut confusion = ConfusionMatrix::new(n_classes);
    for &i in &split.test {
        let seq = project(&corpus.sequences[i], &subset)?;
        let decision = classify(&models, &seq)?;
        confusion.record(corpus.class_of[i], decision.predicted);
    }
    Ok(IterationOutcome {
        accuracy: confusion.accuracy(),
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub k: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub accuracies: Vec<f64>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub training_seed: u64,
    pub split: Split,
    pub fratio: FRatioReport,
    /// Selected subset per entry of `subset_sizes`, in ranking order.
    pub subsets: Vec<CoefficientSubset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub classes: Vec<String>,
    pub dim: usize,
    pub n_iterations: usize,
    pub results: Vec<SubsetResult>,
    pub iterations: Vec<IterationRecord>,
}

impl SweepReport {
    pub fn result_for(&self, k: usize) -> Option<&SubsetResult> {
        self.results.iter().find(|r| r.k == k)
    }

    /// `k,mean_accuracy,std_accuracy,n_iterations`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("k,mean_accuracy,std_accuracy,n_iterations\n");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{}",
                r.k, r.mean_accuracy, r.std_accuracy, self.n_iterations
            );
        }
        out
    }

    /// One row per (iteration, k) with the subset used.
    pub fn detail_csv(&self) -> String {
        let mut out = String::from("iteration,k,accuracy,subset\n");
        for (j, r) in self.results.iter().enumerate() {
            for (it, acc) in self.iterations.iter().zip(&r.accuracies) {
                let subset: Vec<String> =
                    it.subsets[j].indices.iter().map(usize::to_string).collect();
                let _ = writeln!(out, "{},{},{:.6},{}", it.index, r.k, acc, subset.join(" "));
            }
        }
        out
    }

    /// Aggregate confusion counts per k, long format.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("k,actual,predicted,count\n");
        for r in &self.results {
            for (a, row) in r.confusion.counts.iter().enumerate() {
                for (p, count) in row.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        r.k, self.classes[a], self.classes[p], count
                    );
                }
            }
        }
        out
    }

    /// F-ratio averaged over iterations, in the `coefficient,f_ratio,rank`
    /// layout.
    pub fn mean_fratio(&self) -> Result<FRatioReport> {
        let n = self.iterations.len() as f64;
        let f = (0..self.dim)
            .map(|d| self.iterations.iter().map(|it| it.fratio.f[d]).sum::<f64>() / n)
            .collect();
        FRatioReport::from_values(f)
    }
}

/// `coefficient,f_ratio,rank` with 1-based coefficients and ranks.
pub fn fratio_csv(report: &FRatioReport) -> String {
    let mut out = String::from("coefficient,f_ratio,rank\n");
    for (d, f) in report.f.iter().enumerate() {
        let rank = report.rank_of(d + 1).unwrap_or(0);
        let _ = writeln!(out, "{},{:.9e},{}", d + 1, f, rank);
    }
    out
}

/// How each iteration chooses its coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Selection {
    TopK,
    /// Every coefficient, no ranking involved.
    None,
}

/// Runs `n_iterations` fresh splits; in each, ranks coefficients by F-ratio
/// and evaluates the top-k subset for every configured k.
///
/// Iterations run on the current rayon pool; results are gathered in
/// iteration order so the report does not depend on scheduling.
pub fn sweep(
    corpus: &FeatureCorpus<'_>,
    eval_cfg: &EvalConfig,
    train_cfg: &TrainingConfig,
) -> Result<SweepReport> {
    run_protocol(corpus, eval_cfg, train_cfg, Selection::TopK)
}

/// The hold-out protocol with all coefficients and no selection step.
pub fn evaluate(
    corpus: &FeatureCorpus<'_>,
    eval_cfg: &EvalConfig,
    train_cfg: &TrainingConfig,
) -> Result<SweepReport> {
    let cfg = EvalConfig {
        subset_sizes: vec![corpus.dim()],
        ..eval_cfg.clone()
    };
    run_protocol(corpus, &cfg, train_cfg, Selection::None)
}

fn run_protocol(
    corpus: &FeatureCorpus<'_>,
    eval_cfg: &EvalConfig,
    train_cfg: &TrainingConfig,
    selection: Selection,
) -> Result<SweepReport> {
    eval_cfg.validate()?;
    train_cfg.validate()?;
    let dim = corpus.dim();
    if let Some(&k) = eval_cfg.subset_sizes.iter().find(|&&k| k > dim) {
        return Err(Error::Config(format!(
            "subset size {k} exceeds feature dimension {dim}"
        )));
    }
    let n_classes = corpus.classes.len();
    let global_fratio = match eval_cfg.fratio_scope {
        FRatioScope::All => Some(corpus.f_ratio(&(0..corpus.sequences.len()).collect::<Vec<_>>())?),
        FRatioScope::Train => None,
    };

    let per_iteration: Vec<(IterationRecord, Vec<IterationOutcome>)> = (0..eval_cfg.n_iterations)
        .into_par_iter()
        .map(|index| {
            let mut rng = eval_cfg.iteration_rng(index);
            let split = stratified_split(
                &corpus.class_of,
                n_classes,
                eval_cfg.train_fraction,
                &mut rng,
            )?;
            let training_seed: u64 = rng.gen();
            let fratio = match &global_fratio {
                Some(f) => f.clone(),
                None => corpus.f_ratio(&split.train)?,
            };
            let cfg = TrainingConfig {
                seed: training_seed,
                ..train_cfg.clone()
            };
            let mut subsets = Vec::with_capacity(eval_cfg.subset_sizes.len());
            let mut outcomes = Vec::with_capacity(eval_cfg.subset_sizes.len());
            for &k in &eval_cfg.subset_sizes {
                let subset = match selection {
                    Selection::TopK => select_top_k(&fratio, k)?,
                    Selection::None => CoefficientSubset::full(dim),
                };
                outcomes.push(run_iteration(corpus, &split, &subset, &cfg)?);
                subsets.push(subset);
            }
            Ok((
                IterationRecord {
                    index,
                    training_seed,
                    split,
                    fratio,
                    subsets,
                },
                outcomes,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let results = eval_cfg
        .subset_sizes
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let accuracies: Vec<f64> = per_iteration.iter().map(|(_, o)| o[j].accuracy).collect();
            let mut confusion = ConfusionMatrix::new(n_classes);
            for (_, o) in &per_iteration {
                confusion.merge(&o[j].confusion);
            }
            SubsetResult {
                k,
                mean_accuracy: mean(&accuracies),
                std_accuracy: sample_std(&accuracies),
                accuracies,
                confusion,
            }
        })
        .collect();

    Ok(SweepReport {
        classes: corpus.classes.clone(),
        dim,
        n_iterations: eval_cfg.n_iterations,
        results,
        iterations: per_iteration.into_iter().map(|(r, _)| r).collect(),
    })
}
