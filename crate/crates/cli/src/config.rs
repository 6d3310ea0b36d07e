use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mfsel_core::corpus::{SynthOptions, DEFAULT_ASPIRATION, DEFAULT_SNR_DB};
use mfsel_core::{EvalConfig, FrontendConfig, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// Where clips come from. At most one of `data` and `manifest` may be set;
/// with neither, the synthetic corpus is generated in memory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub data: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub synthetic: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub per_class: usize,
    pub sample_rate: u32,
    pub duration: f64,
    pub aspiration: f64,
    /// `null` disables the background noise.
    pub snr_db: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let d = SynthOptions::default();
        SynthConfig {
            per_class: d.n_per_class,
            sample_rate: d.sample_rate,
            duration: d.duration,
            aspiration: DEFAULT_ASPIRATION,
            snr_db: Some(DEFAULT_SNR_DB),
        }
    }
}

impl SynthConfig {
    pub fn options(&self, seed: u64) -> SynthOptions {
        SynthOptions {
            n_per_class: self.per_class,
            sample_rate: self.sample_rate,
            duration: self.duration,
            seed,
            aspiration: self.aspiration,
            snr_db: self.snr_db.unwrap_or(f64::INFINITY),
        }
    }
}

/// Everything a run depends on. Serialized verbatim as `run.json`, which can
/// be passed back through `--config` to repeat the run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Subcommand that produced this file; ignored when loading.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Coefficients named by `fratio` and used by `train`; `null` keeps all
    /// of them for `train` and 8 for the `fratio` summary.
    pub top_k: Option<usize>,
    pub source: SourceConfig,
    pub frontend: FrontendConfig,
    pub training: TrainingConfig,
    pub evaluation: EvalConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }

    /// Copies the master seed into every stage that draws random numbers.
    pub fn propagate_seed(&mut self) {
        self.training.seed = self.seed;
        self.evaluation.seed = self.seed;
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.frontend.validate()?;
        self.training.validate()?;
        self.evaluation.validate()?;
        if self.source.data.is_some() && self.source.manifest.is_some() {
            bail!(UsageError(
                "`source.data` and `source.manifest` are mutually exclusive".into()
            ));
        }
        if self.source.synthetic.per_class < 2 {
            bail!(UsageError(format!(
                "invalid `source.synthetic.per_class`: need at least 2, got {}",
                self.source.synthetic.per_class
            )));
        }
        if self.top_k == Some(0) {
            bail!(UsageError("invalid `top_k`: must be at least 1".into()));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> anyhow::Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| UsageError("no output directory; pass --out".into()).into())
    }
}

/// Subset sizes given on the command line.
#[derive(Debug, Clone)]
pub struct KList(pub Vec<usize>);

/// Parses `3..12`, `3..=12` (both inclusive), `12` or `3,5,8`.
pub fn parse_k_list(text: &str) -> Result<KList, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{s}` is not a coefficient count"))
    };
    let ks = if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
        if lo > hi {
            return Err(format!("empty range `{text}`"));
        }
        (lo..=hi).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if ks.is_empty() {
        return Err("no subset sizes given".into());
    }
    Ok(KList(ks))
}
