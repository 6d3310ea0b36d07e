use std::path::Path;

use anyhow::Context;
use mfsel_core::corpus::{self, build_synthetic_corpus_with, Corpus};
use mfsel_core::eval::{self, fratio_csv, FeatureCorpus};
use mfsel_core::fratio::{f_ratio_of, project, select_top_k, CoefficientSubset, LabeledFeatureSet};
use mfsel_core::frontend::extract_corpus;
use mfsel_core::hmm::train_per_class;
use mfsel_core::{Error, FRatioReport, FeatureSequence, ModelSet, SweepReport};

use crate::config::PipelineConfig;

const DEFAULT_SUMMARY_K: usize = 8;

fn prepare_output(cfg: &PipelineConfig) -> anyhow::Result<&Path> {
    let dir = cfg.output_dir()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let json = serde_json::to_string_pretty(cfg)?;
    write(&dir.join("run.json"), json + "\n")?;
    Ok(dir)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
        .with_context(|| format!("writing {}", path.display()))
}

fn load_corpus(cfg: &PipelineConfig) -> anyhow::Result<Corpus> {
    let entries = match (&cfg.source.data, &cfg.source.manifest) {
        (Some(dir), _) => corpus::scan_directory(dir)?,
        (None, Some(manifest)) => corpus::read_manifest(manifest)?,
        (None, None) => {
            return Ok(build_synthetic_corpus_with(
                &cfg.source.synthetic.options(cfg.seed),
            )?)
        }
    };
    let report = corpus::load_entries(&entries);
    if !report.failures.is_empty() {
        for (path, err) in &report.failures {
            eprintln!("{}: {err}", path.display());
        }
        return Err(Error::Format(format!(
            "{} of {} clips could not be loaded",
            report.failures.len(),
            entries.len()
        ))
        .into());
    }
    Ok(Corpus::new(report.clips)?)
}

fn load_features(cfg: &PipelineConfig) -> anyhow::Result<(Corpus, Vec<FeatureSequence>)> {
    let corpus = load_corpus(cfg)?;
    let features = extract_corpus(&corpus, &cfg.frontend)?;
    Ok((corpus, features))
}

fn whole_corpus_fratio(
    corpus: &Corpus,
    features: &[FeatureSequence],
) -> anyhow::Result<FRatioReport> {
    let data = LabeledFeatureSet::from_sequences(features, corpus.classes())?;
    Ok(f_ratio_of(&data)?)
}

pub fn synth(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let out = prepare_output(cfg)?;
    let corpus = build_synthetic_corpus_with(&cfg.source.synthetic.options(cfg.seed))?;
    let mut manifest = csv::Writer::from_writer(Vec::new());
    manifest.write_record(["path", "label"])?;
    for clip in corpus.clips() {
        let label = clip.label.as_deref().unwrap_or("unlabeled");
        let dir = out.join(label);
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let name = format!("{}.wav", clip.id);
        corpus::write_wav16(clip, dir.join(&name))?;
        manifest.write_record([format!("{label}/{name}"), label.to_string()])?;
    }
    write(&out.join("manifest.csv"), manifest.into_inner()?)?;
    println!("wrote {} clips to {}", corpus.len(), out.display());
    Ok(())
}

pub fn extract(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let out = prepare_output(cfg)?;
    let (_, features) = load_features(cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["clip_id".to_string(), "label".into(), "frame_idx".into()];
    header.extend((1..=cfg.frontend.n_ceps).map(|i| format!("c{i}")));
    w.write_record(&header)?;
    let mut rows = 0;
    for seq in &features {
        for (t, frame) in seq.frames.iter().enumerate() {
            let mut record = vec![
                seq.clip_id.clone(),
                seq.label.clone().unwrap_or_default(),
                t.to_string(),
            ];
            record.extend(frame.iter().map(|c| format!("{c:.9e}")));
            w.write_record(&record)?;
            rows += 1;
        }
    }
    write(&out.join("features.csv"), w.into_inner()?)?;
    println!("wrote {rows} frames from {} clips", features.len());
    Ok(())
}

pub fn fratio(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let out = prepare_output(cfg)?;
    let (corpus, features) = load_features(cfg)?;
    let report = whole_corpus_fratio(&corpus, &features)?;
    let k = cfg.top_k.unwrap_or(DEFAULT_SUMMARY_K).min(report.dim());
    let subset = select_top_k(&report, k)?;
    let mut summary = format!("top-{k} coefficients by F-ratio: {subset}\n");
    for (rank, &c) in report.ranking.iter().enumerate() {
        summary += &format!("{:>3}. c{:<3} {:.6e}\n", rank + 1, c, report.f[c - 1]);
    }
    write(&out.join("fratio.csv"), fratio_csv(&report))?;
    write(&out.join("fratio_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

pub fn train(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let out = prepare_output(cfg)?;
    let (corpus, features) = load_features(cfg)?;
    let dim = features[0].dim();
    let subset = match cfg.top_k {
        Some(k) => select_top_k(&whole_corpus_fratio(&corpus, &features)?, k)?.sorted(),
        None => CoefficientSubset::full(dim),
    };
    let mut by_class = vec![Vec::new(); corpus.classes().len()];
    for (seq, class) in features.iter().zip(corpus.class_indices()) {
        by_class[class].push(project(seq, &subset)?);
    }
    let models = train_per_class(&by_class, &cfg.training)?;
    let set = ModelSet {
        config: cfg.training.clone(),
        subset: cfg.top_k.map(|_| subset.indices.clone()),
        classes: models,
    };
    set.save(out.join("models.json"))?;
    println!("trained {} models on {subset}", set.classes.len());
    Ok(())
}

fn write_report(out: &Path, report: &SweepReport, with_fratio: bool) -> anyhow::Result<()> {
    write(&out.join("summary.csv"), report.summary_csv())?;
    write(&out.join("detail.csv"), report.detail_csv())?;
    write(&out.join("confusion.csv"), report.confusion_csv())?;
    if with_fratio {
        write(&out.join("fratio.csv"), fratio_csv(&report.mean_fratio()?))?;
    }
    print!("{}", report.summary_csv());
    Ok(())
}

pub fn evaluate(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let out = prepare_output(cfg)?;
    let (corpus, features) = load_features(cfg)?;
    let data = FeatureCorpus::new(&features, corpus.classes())?;
    let report = eval::evaluate(&data, &cfg.evaluation, &cfg.training)?;
    write_report(out, &report, false)
}

pub fn sweep(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let out = prepare_output(cfg)?;
    let (corpus, features) = load_features(cfg)?;
    let data = FeatureCorpus::new(&features, corpus.classes())?;
    let report = eval::sweep(&data, &cfg.evaluation, &cfg.training)?;
    write_report(out, &report, true)
}
