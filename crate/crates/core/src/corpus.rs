//! Labeled audio clips: WAV ingestion and a synthetic formant-vowel corpus.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_DURATION: f64 = 0.4;
pub const DEFAULT_PER_CLASS: usize = 25;

/// Peak amplitude synthesized clips are scaled to.
const SYNTH_PEAK: f64 = 0.9;
/// Relative period-to-period pitch jitter of the glottal impulse train.
const PERIOD_JITTER: f64 = 0.02;
/// Default amplitude of the white aspiration noise mixed into the source,
/// relative to a unit glottal impulse.
pub const DEFAULT_ASPIRATION: f64 = 0.05;
/// Default signal-to-noise ratio of the white background noise added after
/// the formant filters. Without it every class is separable from any three
/// coefficients and accuracy saturates at 100% for all subset sizes.
pub const DEFAULT_SNR_DB: f64 = -10.0;
const FORMANT_PERTURBATION: f64 = 0.05;
const PITCH_PERTURBATION: f64 = 0.10;
const BASE_PITCH_HZ: f64 = 210.0;
const FORMANT_BANDWIDTHS: [f64; 3] = [60.0, 90.0, 120.0];

/// (label, F1, F2, F3) templates for the five vowel classes.
pub const VOWEL_TEMPLATES: [(&str, [f64; 3]); 5] = [
    ("a", [730.0, 1090.0, 2440.0]),
    ("i", [270.0, 2290.0, 3010.0]),
    ("u", [300.0, 870.0, 2240.0]),
    ("e", [530.0, 1840.0, 2480.0]),
    ("o", [570.0, 840.0, 2410.0]),
];

/// A mono clip with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub id: String,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub label: Option<String>,
}

impl AudioClip {
    pub fn new(
        id: impl Into<String>,
        samples: Vec<f64>,
        sample_rate: u32,
        label: Option<String>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("clip has no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Precondition("sample rate must be positive".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::Precondition(format!("sample {bad} outside [-1, 1]")));
        }
        Ok(AudioClip {
            id: id.into(),
            samples,
            sample_rate,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Returns a copy with every sample multiplied by `gain`. The result may
    /// leave `[-1, 1]`; it is meant for analysis, not for writing to disk.
    pub fn scaled(&self, gain: f64) -> AudioClip {
        AudioClip {
            id: self.id.clone(),
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
            label: self.label.clone(),
        }
    }
}

/// Labeled clips plus the ordered list of their distinct classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    clips: Vec<AudioClip>,
    classes: Vec<String>,
}

impl Corpus {
    /// Builds a corpus, ordering classes by first appearance. Every clip must
    /// be labeled and every class needs at least two clips.
    pub fn new(clips: Vec<AudioClip>) -> Result<Self> {
        let mut classes: Vec<String> = Vec::new();
        for clip in &clips {
            let label = clip
                .label
                .as_ref()
                .ok_or_else(|| Error::Precondition(format!("clip {} has no label", clip.id)))?;
            if !classes.contains(label) {
                classes.push(label.clone());
            }
        }
        Self::with_classes(clips, classes)
    }

    pub fn with_classes(clips: Vec<AudioClip>, classes: Vec<String>) -> Result<Self> {
        if clips.is_empty() {
            return Err(Error::EmptyInput("corpus has no clips".into()));
        }
        let mut counts = vec![0usize; classes.len()];
        for clip in &clips {
            let label = clip
                .label
                .as_ref()
                .ok_or_else(|| Error::Precondition(format!("clip {} has no label", clip.id)))?;
            let idx = classes.iter().position(|c| c == label).ok_or_else(|| {
                Error::Precondition(format!("clip {} has unknown label {label}", clip.id))
            })?;
            counts[idx] += 1;
        }
        if let Some((class, n)) = classes.iter().zip(&counts).find(|(_, &n)| n < 2) {
            return Err(Error::DegenerateClass(format!(
                "class {class} has {n} clip(s), at least 2 are needed"
            )));
        }
        Ok(Corpus { clips, classes })
    }

    pub fn clips(&self) -> &[AudioClip] {
        &self.clips
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// Class index of every clip, aligned with `clips()`.
    pub fn class_indices(&self) -> Vec<usize> {
        self.clips
            .iter()
            .map(|c| {
                let label = c.label.as_deref().unwrap_or_default();
                self.classes.iter().position(|k| k == label).unwrap_or(0)
            })
            .collect()
    }

    pub fn count_of(&self, class: &str) -> usize {
        self.clips
            .iter()
            .filter(|c| c.label.as_deref() == Some(class))
            .count()
    }
}

/// Reads a PCM WAV file, normalizing by the format's full-scale value and
/// averaging channels to mono.
pub fn load_wav(path: impl AsRef<Path>, label: Option<String>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(BufReader::new(file)).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Format(format!("{}: zero channels", path.display())));
    }

    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: {}-bit float",
                    path.display(),
                    spec.bits_per_sample
                )));
            }
            reader
                .into_samples::<f32>()
                .map(|s| s.map(|v| f64::from(v).clamp(-1.0, 1.0)))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        hound::SampleFormat::Int => {
            if !matches!(spec.bits_per_sample, 8 | 16 | 24 | 32) {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: {}-bit integer PCM",
                    path.display(),
                    spec.bits_per_sample
                )));
            }
            let full_scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / full_scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
    };

    if interleaved.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{}: data chunk holds no samples",
            path.display()
        )));
    }
    let samples: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{}: fewer samples than channels",
            path.display()
        )));
    }

    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    AudioClip::new(id, samples, spec.sample_rate, label)
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    let where_ = path.display();
    match err {
        hound::Error::Unsupported => {
            Error::UnsupportedFormat(format!("{where_}: not integer or float PCM"))
        }
        hound::Error::FormatError(msg) => Error::Format(format!("{where_}: {msg}")),
        hound::Error::IoError(e) => {
            Error::Format(format!("{where_}: truncated or unreadable: {e}"))
        }
        other => Error::Format(format!("{where_}: {other}")),
    }
}

/// Writes a clip as 16-bit PCM mono.
pub fn write_wav16(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(to_err)?;
    for &s in &clip.samples {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(q).map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}

/// A `(path, label)` pair naming one clip on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipEntry {
    pub path: PathBuf,
    pub label: String,
}

/// Lists `<root>/<label>/<file>.wav`, sorted by label then file name.
pub fn scan_directory(root: impl AsRef<Path>) -> Result<Vec<ClipEntry>> {
    let root = root.as_ref();
    let mut by_label: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    let dirs = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for dir in dirs {
        let dir = dir.map_err(|e| Error::io(root, e))?.path();
        if !dir.is_dir() {
            continue;
        }
        let label = match dir.file_name() {
            Some(name) => name.to_string_lossy().into_owned(),
            None => continue,
        };
        let files = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for file in files {
            let file = file.map_err(|e| Error::io(&dir, e))?.path();
            let is_wav = file
                .extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("wav"));
            if file.is_file() && is_wav {
                by_label.entry(label.clone()).or_default().push(file);
            }
        }
    }
    let mut entries = Vec::new();
    for (label, mut files) in by_label {
        files.sort();
        entries.extend(files.into_iter().map(|path| ClipEntry {
            path,
            label: label.clone(),
        }));
    }
    if entries.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no <label>/<file>.wav entries under {}",
            root.display()
        )));
    }
    Ok(entries)
}

/// Reads a `path,label` manifest. Relative paths resolve against the
/// manifest's own directory.
pub fn read_manifest(manifest: impl AsRef<Path>) -> Result<Vec<ClipEntry>> {
    let manifest = manifest.as_ref();
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::Reader::from_path(manifest).map_err(|e| csv_error(manifest, e))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_error(manifest, e))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| {
                Error::Format(format!("{}: missing `{name}` column", manifest.display()))
            })
    };
    let (path_col, label_col) = (col("path")?, col("label")?);

    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(manifest, e))?;
        let rel = record.get(path_col).unwrap_or_default().trim();
        let label = record.get(label_col).unwrap_or_default().trim();
        if rel.is_empty() || label.is_empty() {
            return Err(Error::Format(format!(
                "{}: empty path or label on line {}",
                manifest.display(),
                record.position().map_or(0, |p| p.line())
            )));
        }
        let path = Path::new(rel);
        let path = if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        };
        entries.push(ClipEntry {
            path,
            label: label.to_string(),
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{}: manifest lists no clips",
            manifest.display()
        )));
    }
    Ok(entries)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

/// Outcome of loading a list of entries: clips that loaded plus a per-file
/// failure list.
#[derive(Debug, Default)]
pub struct LoadReport {
    pub clips: Vec<AudioClip>,
    pub failures: Vec<(PathBuf, Error)>,
}

pub fn load_entries(entries: &[ClipEntry]) -> LoadReport {
    let mut report = LoadReport::default();
    for entry in entries {
        match load_wav(&entry.path, Some(entry.label.clone())) {
            Ok(mut clip) => {
                clip.id = format!("{}/{}", entry.label, clip.id);
                report.clips.push(clip)
            }
            Err(e) => report.failures.push((entry.path.clone(), e)),
        }
    }
    report
}

/// Parameters of one synthetic vowel token.
#[derive(Debug, Clone, PartialEq)]
pub struct VowelSpec {
    pub label: String,
    /// `(center Hz, bandwidth Hz)` per formant.
    pub formants: Vec<(f64, f64)>,
    pub fundamental: f64,
    pub duration: f64,
    pub jitter_seed: u64,
    /// Aspiration noise amplitude relative to a unit glottal pulse.
    pub aspiration: f64,
    /// Background noise level in dB below the voiced signal's RMS;
    /// `f64::INFINITY` adds none.
    pub snr_db: f64,
}

impl VowelSpec {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if sample_rate == 0 {
            return Err(Error::Precondition("sample rate must be positive".into()));
        }
        if self.formants.len() < 2 {
            return Err(Error::Precondition(
                "at least two formants are required".into(),
            ));
        }
        for &(f, bw) in &self.formants {
            if !(f > 0.0 && f < nyquist) {
                return Err(Error::Precondition(format!(
                    "formant {f} Hz not in (0, {nyquist}) Hz"
                )));
            }
            if !(bw > 0.0 && bw < nyquist) {
                return Err(Error::Precondition(format!(
                    "bandwidth {bw} Hz out of range"
                )));
            }
        }
        if !(self.fundamental > 0.0 && self.fundamental < nyquist) {
            return Err(Error::Precondition(format!(
                "fundamental {} Hz not in (0, {nyquist}) Hz",
                self.fundamental
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Precondition("duration must be positive".into()));
        }
        if !(self.aspiration >= 0.0 && self.aspiration.is_finite()) {
            return Err(Error::Precondition("aspiration must be nonnegative".into()));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Precondition("snr_db is NaN".into()));
        }
        if (self.duration * f64::from(sample_rate)).round() < 1.0 {
            return Err(Error::Precondition(
                "duration shorter than one sample".into(),
            ));
        }
        Ok(())
    }
}

/// Two-pole resonator with unit gain at DC.
struct Resonator {
    a: f64,
    b: f64,
    c: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(center: f64, bandwidth: f64, sample_rate: f64) -> Self {
        let r = (-PI * bandwidth / sample_rate).exp();
        let b = 2.0 * r * (2.0 * PI * center / sample_rate).cos();
        let c = -r * r;
        Resonator {
            a: 1.0 - b - c,
            b,
            c,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.a * x + self.b * self.y1 + self.c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Renders a vowel: a jittered impulse train plus faint aspiration noise,
/// passed through one resonator per formant in cascade, then scaled to a
/// fixed peak.
pub fn synthesize_vowel(spec: &VowelSpec, sample_rate: u32) -> Result<AudioClip> {
    spec.validate(sample_rate)?;
    let sr = f64::from(sample_rate);
    let n = (spec.duration * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.jitter_seed);

    let mut resonators: Vec<Resonator> = spec
        .formants
        .iter()
        .map(|&(f, bw)| Resonator::new(f, bw, sr))
        .collect();

    let base_period = sr / spec.fundamental;
    let mut next_pulse = rng.gen_range(0.0..base_period);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = spec.aspiration * rng.gen_range(-1.0..1.0);
        if (i as f64) >= next_pulse {
            x += 1.0;
            next_pulse += base_period * (1.0 + PERIOD_JITTER * rng.gen_range(-1.0..1.0));
        }
        let y = resonators.iter_mut().fold(x, |acc, r| r.step(acc));
        out.push(y);
    }

    if spec.snr_db.is_finite() {
        let rms = (out.iter().map(|s| s * s).sum::<f64>() / n as f64).sqrt();
        // uniform noise on [-a, a] has RMS a / sqrt(3)
        let amplitude = rms * 10f64.powf(-spec.snr_db / 20.0) * 3f64.sqrt();
        for s in out.iter_mut() {
            *s += amplitude * rng.gen_range(-1.0..1.0);
        }
    }

    let peak = out.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        let gain = SYNTH_PEAK / peak;
        out.iter_mut().for_each(|s| *s *= gain);
    }
    AudioClip::new(
        format!("{}_{:016x}", spec.label, spec.jitter_seed),
        out,
        sample_rate,
        Some(spec.label.clone()),
    )
}

/// Options for [`build_synthetic_corpus_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub n_per_class: usize,
    pub sample_rate: u32,
    pub duration: f64,
    pub seed: u64,
    pub aspiration: f64,
    pub snr_db: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            n_per_class: DEFAULT_PER_CLASS,
            sample_rate: DEFAULT_SAMPLE_RATE,
            duration: DEFAULT_DURATION,
            seed: 0,
            aspiration: DEFAULT_ASPIRATION,
            snr_db: DEFAULT_SNR_DB,
        }
    }
}

/// Five-vowel corpus with `n_per_class` tokens per class at the default
/// clip duration.
pub fn build_synthetic_corpus(n_per_class: usize, sample_rate: u32, seed: u64) -> Result<Corpus> {
    build_synthetic_corpus_with(&SynthOptions {
        n_per_class,
        sample_rate,
        duration: DEFAULT_DURATION,
        seed,
        aspiration: DEFAULT_ASPIRATION,
        snr_db: DEFAULT_SNR_DB,
    })
}

pub fn build_synthetic_corpus_with(opts: &SynthOptions) -> Result<Corpus> {
    if opts.n_per_class < 2 {
        return Err(Error::Precondition(format!(
            "n_per_class must be at least 2, got {}",
            opts.n_per_class
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut clips = Vec::with_capacity(VOWEL_TEMPLATES.len() * opts.n_per_class);
    for (label, formants) in VOWEL_TEMPLATES {
        for j in 0..opts.n_per_class {
            let spec = VowelSpec {
                label: label.to_string(),
                formants: formants
                    .iter()
                    .zip(FORMANT_BANDWIDTHS)
                    .map(|(&f, bw)| {
                        let scale =
                            1.0 + rng.gen_range(-FORMANT_PERTURBATION..=FORMANT_PERTURBATION);
                        (f * scale, bw)
                    })
                    .collect(),
                fundamental: BASE_PITCH_HZ
                    * (1.0 + rng.gen_range(-PITCH_PERTURBATION..=PITCH_PERTURBATION)),
                duration: opts.duration,
                jitter_seed: rng.gen(),
                aspiration: opts.aspiration,
                snr_db: opts.snr_db,
            };
            let mut clip = synthesize_vowel(&spec, opts.sample_rate)?;
            clip.id = format!("{label}_{j:03}");
            clips.push(clip);
        }
    }
    Corpus::with_classes(
        clips,
        VOWEL_TEMPLATES.iter().map(|(l, _)| l.to_string()).collect(),
    )
}
