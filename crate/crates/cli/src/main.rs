//! `mfsel`: synthesize or load vowel clips, extract MFCCs, rank coefficients
//! by F-ratio and evaluate GMM-HMM classifiers on the selected subsets.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfsel_core::{ErrorKind, FRatioScope, Window};

use config::PipelineConfig;

/// Bad invocation or configuration; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "mfsel",
    version,
    about = "MFCC coefficient selection for vowel recognition"
)]
struct Cli {
    /// Master seed for synthesis, splits and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON pipeline config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic vowel corpus as WAV files plus manifest.csv.
    Synth(SynthArgs),
    /// Write per-frame MFCCs to features.csv.
    Extract(CommonArgs),
    /// Rank coefficients by F-ratio over the whole corpus.
    Fratio {
        #[command(flatten)]
        common: CommonArgs,
        /// Size of the subset named in the summary.
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Train one model per class on the whole corpus and save models.json.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        training: TrainingArgs,
        /// Restrict the models to the k highest-ranked coefficients.
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Hold-out evaluation with every coefficient.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        training: TrainingArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Hold-out evaluation of top-k F-ratio subsets.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        training: TrainingArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Subset sizes: `3..12`, `3,6,9` or `12`.
        #[arg(long, value_parser = config::parse_k_list)]
        k: Option<config::KList>,
        /// Where the ranking comes from in each iteration.
        #[arg(long, value_parser = ["train", "all"])]
        fratio_scope: Option<String>,
    },
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthFlags,
}

#[derive(Args, Debug, Default)]
struct SynthFlags {
    /// Clips per vowel class.
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    sample_rate: Option<u32>,
    /// Clip length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Background noise level; `inf` disables it.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    aspiration: Option<f64>,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Corpus directory laid out as `<label>/<clip>.wav`.
    #[arg(long, conflicts_with = "manifest")]
    data: Option<PathBuf>,
    /// CSV with `path,label` columns.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthFlags,
    #[command(flatten)]
    frontend: FrontendArgs,
}

#[derive(Args, Debug)]
struct FrontendArgs {
    #[arg(long)]
    frame_ms: Option<f64>,
    #[arg(long)]
    hop_ms: Option<f64>,
    #[arg(long)]
    n_filters: Option<usize>,
    #[arg(long)]
    n_ceps: Option<usize>,
    #[arg(long, value_parser = parse_window)]
    window: Option<Window>,
}

#[derive(Args, Debug)]
struct TrainingArgs {
    /// HMM states per model.
    #[arg(long)]
    states: Option<usize>,
    /// Gaussian components per state.
    #[arg(long)]
    mix: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    variance_floor: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

fn parse_window(s: &str) -> Result<Window, String> {
    s.parse::<Window>().map_err(|e| e.to_string())
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

impl SynthFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let s = &mut cfg.source.synthetic;
        set!(s.per_class, self.per_class);
        set!(s.sample_rate, self.sample_rate);
        set!(s.duration, self.duration);
        set!(s.aspiration, self.aspiration);
        if let Some(snr) = self.snr_db {
            s.snr_db = snr.is_finite().then_some(snr);
        }
    }
}

impl CommonArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
        if self.data.is_some() {
            cfg.source.data = self.data.clone();
            cfg.source.manifest = None;
        }
        if self.manifest.is_some() {
            cfg.source.manifest = self.manifest.clone();
            cfg.source.data = None;
        }
        self.synth.apply(cfg);
        let f = &self.frontend;
        set!(cfg.frontend.frame_ms, f.frame_ms);
        set!(cfg.frontend.hop_ms, f.hop_ms);
        set!(cfg.frontend.n_filters, f.n_filters);
        set!(cfg.frontend.n_ceps, f.n_ceps);
        set!(cfg.frontend.window, f.window);
    }
}

impl TrainingArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let t = &mut cfg.training;
        set!(t.n_states, self.states);
        set!(t.n_mix, self.mix);
        set!(t.max_iters, self.max_iters);
        set!(t.rel_tol, self.rel_tol);
        set!(t.variance_floor, self.variance_floor);
    }
}

impl EvalArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set!(cfg.evaluation.n_iterations, self.iterations);
        set!(cfg.evaluation.train_fraction, self.train_fraction);
    }
}

fn resolve(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    set!(cfg.seed, cli.seed);
    let name = match &cli.command {
        Command::Synth(a) => {
            if a.out.is_some() {
                cfg.output = a.out.clone();
            }
            a.synth.apply(&mut cfg);
            "synth"
        }
        Command::Extract(c) => {
            c.apply(&mut cfg);
            "extract"
        }
        Command::Fratio { common, top_k } => {
            common.apply(&mut cfg);
            cfg.top_k = top_k.or(cfg.top_k);
            "fratio"
        }
        Command::Train {
            common,
            training,
            top_k,
        } => {
            common.apply(&mut cfg);
            training.apply(&mut cfg);
            cfg.top_k = top_k.or(cfg.top_k);
            "train"
        }
        Command::Evaluate {
            common,
            training,
            eval,
        } => {
            common.apply(&mut cfg);
            training.apply(&mut cfg);
            eval.apply(&mut cfg);
            "evaluate"
        }
        Command::Sweep {
            common,
            training,
            eval,
            k,
            fratio_scope,
        } => {
            common.apply(&mut cfg);
            training.apply(&mut cfg);
            eval.apply(&mut cfg);
            if let Some(k) = k {
                cfg.evaluation.subset_sizes = k.0.clone();
            }
            if let Some(scope) = fratio_scope {
                cfg.evaluation.fratio_scope = scope.parse::<FRatioScope>()?;
            }
            "sweep"
        }
    };
    cfg.command = Some(name.to_string());
    cfg.propagate_seed();
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = resolve(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()?;
    pool.install(|| match cli.command {
        Command::Synth(_) => commands::synth(&cfg),
        Command::Extract(_) => commands::extract(&cfg),
        Command::Fratio { .. } => commands::fratio(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Evaluate { .. } => commands::evaluate(&cfg),
        Command::Sweep { .. } => commands::sweep(&cfg),
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<mfsel_core::Error>() {
            return match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if cli.jobs == Some(0) {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
