//! Per-coefficient Fisher ratio: spread of the class means divided by the
//! average within-class variance. Used to rank MFCC coefficients and keep
//! the top k.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::FeatureSequence;

/// Frame-level observations pooled across clips, each tagged with a class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatureSet {
    pub observations: Vec<Vec<f64>>,
    /// Class index per row, into `classes`.
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
}

impl LabeledFeatureSet {
    pub fn new(
        observations: Vec<Vec<f64>>,
        labels: Vec<usize>,
        classes: Vec<String>,
    ) -> Result<Self> {
        if observations.len() != labels.len() {
            return Err(Error::Precondition(format!(
                "{} observations but {} labels",
                observations.len(),
                labels.len()
            )));
        }
        let dim = observations.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::EmptyInput("no feature observations".into()));
        }
        if let Some(row) = observations.iter().find(|r| r.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: row.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::Precondition(format!(
                "label index {bad} outside {} classes",
                classes.len()
            )));
        }
        Ok(LabeledFeatureSet {
            observations,
            labels,
            classes,
        })
    }

    /// Pools every frame of every sequence. Each sequence must carry a label
    /// found in `classes`.
    pub fn from_sequences<'a>(
        sequences: impl IntoIterator<Item = &'a FeatureSequence>,
        classes: &[String],
    ) -> Result<Self> {
        let mut observations = Vec::new();
        let mut labels = Vec::new();
        for seq in sequences {
            let label = seq.label.as_deref().ok_or_else(|| {
                Error::Precondition(format!("sequence {} has no label", seq.clip_id))
            })?;
            let class = classes.iter().position(|c| c == label).ok_or_else(|| {
                Error::Precondition(format!(
                    "sequence {} has unknown label {label}",
                    seq.clip_id
                ))
            })?;
            for frame in &seq.frames {
                observations.push(frame.clone());
                labels.push(class);
            }
        }
        Self::new(observations, labels, classes.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.observations.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub means: Vec<Vec<f64>>,
    /// Population (divide by M_i) variance per class and coefficient.
    pub variances: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    /// Mean over all pooled rows.
    pub overall_mean: Vec<f64>,
}

pub fn class_statistics(data: &LabeledFeatureSet) -> Result<ClassStats> {
    let n_classes = data.classes.len();
    let dim = data.dim();
    let mut counts = vec![0usize; n_classes];
    let mut sums = vec![vec![0.0; dim]; n_classes];
    let mut total = vec![0.0; dim];
    for (row, &class) in data.observations.iter().zip(&data.labels) {
        counts[class] += 1;
        for (d, &x) in row.iter().enumerate() {
            sums[class][d] += x;
            total[d] += x;
        }
    }
    if let Some(class) = counts.iter().position(|&c| c < 2) {
        return Err(Error::DegenerateClass(format!(
            "class {} has {} observation(s), at least 2 are needed",
            data.classes[class], counts[class]
        )));
    }

    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &m)| s.iter().map(|v| v / m as f64).collect())
        .collect();
    let rows = data.observations.len() as f64;
    let overall_mean = total.iter().map(|v| v / rows).collect();

    let mut variances = vec![vec![0.0; dim]; n_classes];
    for (row, &class) in data.observations.iter().zip(&data.labels) {
        for (d, &x) in row.iter().enumerate() {
            variances[class][d] += (x - means[class][d]).powi(2);
        }
    }
    for (var, &m) in variances.iter_mut().zip(&counts) {
        var.iter_mut().for_each(|v| *v /= m as f64);
    }

    Ok(ClassStats {
        means,
        variances,
        counts,
        overall_mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FRatioReport {
    /// F value per coefficient, in coefficient order.
    pub f: Vec<f64>,
    /// 1-based coefficient indices by descending F, ties by ascending index.
    pub ranking: Vec<usize>,
}

impl FRatioReport {
    /// Builds a report from precomputed F values.
    pub fn from_values(f: Vec<f64>) -> Result<Self> {
        if let Some(d) = f.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Precondition(format!(
                "F value {} for coefficient {} is not finite and nonnegative",
                f[d],
                d + 1
            )));
        }
        let mut ranking: Vec<usize> = (1..=f.len()).collect();
        ranking.sort_by(|&a, &b| f[b - 1].total_cmp(&f[a - 1]).then(a.cmp(&b)));
        Ok(FRatioReport { f, ranking })
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    /// 1-based rank of coefficient `coefficient` (1-based).
    pub fn rank_of(&self, coefficient: usize) -> Option<usize> {
        self.ranking
            .iter()
            .position(|&c| c == coefficient)
            .map(|p| p + 1)
    }
}

pub fn f_ratio(stats: &ClassStats) -> Result<FRatioReport> {
    let n = stats.means.len() as f64;
    let dim = stats.overall_mean.len();
    let f = (0..dim)
        .map(|d| {
            let between = stats
                .means
                .iter()
                .map(|mu| (mu[d] - stats.overall_mean[d]).powi(2))
                .sum::<f64>()
                / n;
            let within = stats.variances.iter().map(|s| s[d]).sum::<f64>() / n;
            if within > 0.0 {
                Ok(between / within)
            } else {
                Err(Error::ConcentratedFeature { coefficient: d + 1 })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    FRatioReport::from_values(f)
}

/// `class_statistics` followed by `f_ratio`.
pub fn f_ratio_of(data: &LabeledFeatureSet) -> Result<FRatioReport> {
    f_ratio(&class_statistics(data)?)
}

/// Selected coefficients, 1-based, in the order they were chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientSubset {
    pub indices: Vec<usize>,
}

impl CoefficientSubset {
    pub fn new(indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Precondition("empty coefficient subset".into()));
        }
        for (i, &c) in indices.iter().enumerate() {
            if c == 0 || c > dim {
                return Err(Error::Precondition(format!(
                    "coefficient index {c} outside 1..={dim}"
                )));
            }
            if indices[..i].contains(&c) {
                return Err(Error::Precondition(format!(
                    "coefficient {c} selected twice"
                )));
            }
        }
        Ok(CoefficientSubset { indices })
    }

    /// All of `1..=dim` in natural order.
    pub fn full(dim: usize) -> Self {
        CoefficientSubset {
            indices: (1..=dim).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    /// Same coefficients in ascending index order.
    pub fn sorted(&self) -> Self {
        let mut indices = self.indices.clone();
        indices.sort_unstable();
        CoefficientSubset { indices }
    }
}

impl std::fmt::Display for CoefficientSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|i| format!("c{i}")).collect();
        f.write_str(&parts.join(" "))
    }
}

pub fn select_top_k(report: &FRatioReport, k: usize) -> Result<CoefficientSubset> {
    if k == 0 || k > report.dim() {
        return Err(Error::Precondition(format!(
            "k = {k} outside 1..={}",
            report.dim()
        )));
    }
    Ok(CoefficientSubset {
        indices: report.ranking[..k].to_vec(),
    })
}

/// Keeps only the subset's coordinates of every frame, in subset order.
pub fn project(seq: &FeatureSequence, subset: &CoefficientSubset) -> Result<FeatureSequence> {
    let dim = seq.dim();
    if let Some(&bad) = subset.indices.iter().find(|&&c| c == 0 || c > dim) {
        return Err(Error::Precondition(format!(
            "coefficient index {bad} outside 1..={dim}"
        )));
    }
    let frames = seq
        .frames
        .iter()
        .map(|frame| subset.indices.iter().map(|&c| frame[c - 1]).collect())
        .collect();
    Ok(FeatureSequence {
        clip_id: seq.clip_id.clone(),
        label: seq.label.clone(),
        frames,
    })
}
