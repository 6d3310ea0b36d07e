//! MFCC front end: framing, windowing, power spectrum, mel filterbank and
//! the cosine transform of log filterbank energies.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::corpus::{AudioClip, Corpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hamming,
    Hann,
    Rectangular,
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hamming" => Ok(Window::Hamming),
            "hann" | "hanning" => Ok(Window::Hann),
            "rectangular" | "rect" | "none" => Ok(Window::Rectangular),
            other => Err(Error::Config(format!("unknown window `{other}`"))),
        }
    }
}

impl Window {
    /// Window coefficient `n` of a length-`len` window.
    pub fn coefficient(self, n: usize, len: usize) -> f64 {
        if len < 2 {
            return 1.0;
        }
        let phase = 2.0 * PI * n as f64 / (len - 1) as f64;
        match self {
            Window::Hamming => 0.54 - 0.46 * phase.cos(),
            Window::Hann => 0.5 - 0.5 * phase.cos(),
            Window::Rectangular => 1.0,
        }
    }

    pub fn coefficients(self, len: usize) -> Vec<f64> {
        (0..len).map(|n| self.coefficient(n, len)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub n_filters: usize,
    pub n_ceps: usize,
    pub window: Window,
    pub log_floor: f64,
    pub fft_pad: bool,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            frame_ms: 30.0,
            hop_ms: 15.0,
            n_filters: 26,
            n_ceps: 12,
            window: Window::Hamming,
            log_floor: 1e-10,
            fft_pad: true,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_ms > 0.0 && self.frame_ms.is_finite()) {
            return Err(Error::Config("frontend.frame_ms must be positive".into()));
        }
        if !(self.hop_ms > 0.0 && self.hop_ms <= self.frame_ms) {
            return Err(Error::Config(
                "frontend.hop_ms must satisfy 0 < hop_ms <= frame_ms".into(),
            ));
        }
        if self.n_filters < 2 {
            return Err(Error::Config(
                "frontend.n_filters must be at least 2".into(),
            ));
        }
        if self.n_ceps < 1 || self.n_ceps > self.n_filters - 1 {
            return Err(Error::Config(format!(
                "frontend.n_ceps must lie in 1..={}",
                self.n_filters - 1
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::Config("frontend.log_floor must be positive".into()));
        }
        Ok(())
    }

    /// Frame length N in samples.
    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_ms * f64::from(sample_rate) / 1000.0).round() as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        ((self.hop_ms * f64::from(sample_rate) / 1000.0).round() as usize).max(1)
    }

    pub fn fft_len(&self, sample_rate: u32) -> usize {
        let n = self.frame_len(sample_rate);
        if self.fft_pad {
            n.next_power_of_two()
        } else {
            n
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples: Vec<f64>,
}

/// Splits a clip into frames of N samples starting every hop samples. A
/// trailing chunk shorter than N is dropped.
pub fn frame_signal(clip: &AudioClip, cfg: &FrontendConfig) -> Result<Vec<Frame>> {
    cfg.validate()?;
    let n = cfg.frame_len(clip.sample_rate);
    let hop = cfg.hop_len(clip.sample_rate);
    frame_samples(&clip.samples, n, hop)
}

fn frame_samples(samples: &[f64], n: usize, hop: usize) -> Result<Vec<Frame>> {
    if n == 0 {
        return Err(Error::Config("frame length rounds to zero samples".into()));
    }
    if samples.len() < n {
        return Err(Error::TooShort {
            len: samples.len(),
            frame: n,
        });
    }
    let count = (samples.len() - n) / hop + 1;
    Ok((0..count)
        .map(|i| Frame {
            samples: samples[i * hop..i * hop + n].to_vec(),
        })
        .collect())
}

pub fn apply_window(frame: &Frame, window: Window) -> Frame {
    let len = frame.samples.len();
    Frame {
        samples: frame
            .samples
            .iter()
            .enumerate()
            .map(|(n, x)| x * window.coefficient(n, len))
            .collect(),
    }
}

/// One-sided power spectrum `|X[m]|^2 / N` for `m = 0..=nfft/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub bins: Vec<f64>,
    pub bin_hz: f64,
    /// Transform length (after any zero padding).
    pub nfft: usize,
    /// Frame length N, the divisor applied to `|X|^2`.
    pub frame_len: usize,
}

impl PowerSpectrum {
    /// Sum of `|X[m]|^2 / N` over all `nfft` two-sided bins, reconstructed
    /// from the Hermitian symmetry of a real input.
    pub fn two_sided_total(&self) -> f64 {
        let last = self.bins.len() - 1;
        self.bins
            .iter()
            .enumerate()
            .map(|(m, p)| {
                let mirrored = m != 0 && !(self.nfft.is_multiple_of(2) && m == last);
                if mirrored {
                    2.0 * p
                } else {
                    *p
                }
            })
            .sum()
    }
}

/// Computes the power spectrum of a (windowed) frame. `sample_rate` only
/// sets `bin_hz`.
pub fn power_spectrum(frame: &Frame, cfg: &FrontendConfig, sample_rate: u32) -> PowerSpectrum {
    let n = frame.samples.len();
    let nfft = if cfg.fft_pad {
        n.next_power_of_two()
    } else {
        n
    };
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    spectrum_with(&*fft, &frame.samples, nfft, sample_rate)
}

fn spectrum_with(
    fft: &dyn Fft<f64>,
    samples: &[f64],
    nfft: usize,
    sample_rate: u32,
) -> PowerSpectrum {
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    fft.process(&mut buf);
    let bins = buf[..nfft / 2 + 1]
        .iter()
        .map(|c| c.norm_sqr() / n as f64)
        .collect();
    PowerSpectrum {
        bins,
        bin_hz: f64::from(sample_rate) / nfft as f64,
        nfft,
        frame_len: n,
    }
}

pub fn hz_to_mel(f: f64) -> Result<f64> {
    if !(f >= 0.0) {
        return Err(Error::Domain(format!("frequency {f} Hz is negative")));
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

pub fn mel_to_hz(m: f64) -> Result<f64> {
    if !(m >= 0.0) {
        return Err(Error::Domain(format!("mel value {m} is negative")));
    }
    Ok(700.0 * (10f64.powf(m / 2595.0) - 1.0))
}

/// Triangular filters equally spaced on the mel scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterBank {
    /// One dense weight row per filter over the one-sided spectrum bins.
    pub filters: Vec<Vec<f64>>,
    pub edge_hz: (f64, f64),
    /// The K+2 equally spaced mel edge points before snapping.
    pub edge_mel: Vec<f64>,
    /// Edge points snapped to spectrum bins; filter k spans
    /// `edge_bins[k]..=edge_bins[k + 2]` and peaks at `edge_bins[k + 1]`.
    pub edge_bins: Vec<usize>,
}

impl MelFilterBank {
    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// `(first, last)` bins with nonzero weight for filter `k`.
    pub fn support(&self, k: usize) -> (usize, usize) {
        let row = &self.filters[k];
        let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
        let last = row.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        (first, last)
    }

    pub fn peak_bin(&self, k: usize) -> usize {
        self.edge_bins[k + 1]
    }

    /// Filterbank energies `S_k = sum_m filter_k[m] * P[m]`.
    pub fn energies(&self, spectrum: &PowerSpectrum) -> Vec<f64> {
        self.filters
            .iter()
            .map(|row| row.iter().zip(&spectrum.bins).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Builds K filters spanning 0 Hz to Nyquist.
pub fn build_filterbank(
    cfg: &FrontendConfig,
    sample_rate: u32,
    nfft: usize,
) -> Result<MelFilterBank> {
    build_filterbank_between(
        cfg.n_filters,
        sample_rate,
        nfft,
        0.0,
        f64::from(sample_rate) / 2.0,
    )
}

pub fn build_filterbank_between(
    n_filters: usize,
    sample_rate: u32,
    nfft: usize,
    low_hz: f64,
    high_hz: f64,
) -> Result<MelFilterBank> {
    if n_filters < 2 {
        return Err(Error::Config("filterbank needs at least 2 filters".into()));
    }
    let nyquist = f64::from(sample_rate) / 2.0;
    if !(low_hz >= 0.0 && low_hz < high_hz && high_hz <= nyquist) {
        return Err(Error::Config(format!(
            "filterbank edges ({low_hz}, {high_hz}) Hz invalid for Nyquist {nyquist} Hz"
        )));
    }
    let n_bins = nfft / 2 + 1;
    let mel_lo = hz_to_mel(low_hz)?;
    let mel_hi = hz_to_mel(high_hz)?;
    let step = (mel_hi - mel_lo) / (n_filters + 1) as f64;
    let edge_mel: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_lo + step * i as f64)
        .collect();
    let bin_hz = f64::from(sample_rate) / nfft as f64;
    let mut edge_bins = Vec::with_capacity(edge_mel.len());
    for &m in &edge_mel {
        let hz = mel_to_hz(m)?;
        let bin = ((hz / bin_hz).round() as usize).min(n_bins - 1);
        edge_bins.push(bin);
    }
    if edge_bins.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "{n_filters} mel filters do not fit in {n_bins} spectrum bins (edges collide after snapping)"
        )));
    }

    let filters = (0..n_filters)
        .map(|k| {
            let (lo, mid, hi) = (edge_bins[k], edge_bins[k + 1], edge_bins[k + 2]);
            let mut row = vec![0.0; n_bins];
            for (m, w) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *w = if m <= mid {
                    (m - lo) as f64 / (mid - lo) as f64
                } else {
                    (hi - m) as f64 / (hi - mid) as f64
                };
            }
            row
        })
        .collect();

    Ok(MelFilterBank {
        filters,
        edge_hz: (low_hz, high_hz),
        edge_mel,
        edge_bins,
    })
}

/// The L x K cosine matrix: row i-1 holds `cos(i*pi/K * (k - 1/2))` for
/// `k = 1..=K`.
pub fn dct_matrix(n_ceps: usize, n_filters: usize) -> Vec<Vec<f64>> {
    (1..=n_ceps)
        .map(|i| {
            (1..=n_filters)
                .map(|k| (i as f64 * PI / n_filters as f64 * (k as f64 - 0.5)).cos())
                .collect()
        })
        .collect()
}

/// MFCC vectors of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub clip_id: String,
    pub label: Option<String>,
    pub frames: Vec<Vec<f64>>,
}

impl FeatureSequence {
    pub fn new(
        clip_id: impl Into<String>,
        label: Option<String>,
        frames: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::EmptyInput("feature sequence has no frames".into()));
        };
        let dim = first.len();
        if let Some(bad) = frames.iter().find(|f| f.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(FeatureSequence {
            clip_id: clip_id.into(),
            label,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }
}

/// Reusable extraction state for one (config, sample rate) pair.
pub struct Extractor {
    cfg: FrontendConfig,
    sample_rate: u32,
    frame_len: usize,
    hop_len: usize,
    nfft: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    filterbank: MelFilterBank,
    dct: Vec<Vec<f64>>,
}

impl Extractor {
    pub fn new(cfg: &FrontendConfig, sample_rate: u32) -> Result<Self> {
        cfg.validate()?;
        let frame_len = cfg.frame_len(sample_rate);
        if frame_len < 2 {
            return Err(Error::Config(format!(
                "frame of {} ms at {sample_rate} Hz is under two samples",
                cfg.frame_ms
            )));
        }
        let nfft = cfg.fft_len(sample_rate);
        Ok(Extractor {
            cfg: cfg.clone(),
            sample_rate,
            frame_len,
            hop_len: cfg.hop_len(sample_rate),
            nfft,
            window: cfg.window.coefficients(frame_len),
            fft: FftPlanner::new().plan_fft_forward(nfft),
            filterbank: build_filterbank(cfg, sample_rate, nfft)?,
            dct: dct_matrix(cfg.n_ceps, cfg.n_filters),
        })
    }

    pub fn filterbank(&self) -> &MelFilterBank {
        &self.filterbank
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    /// Filterbank energies of every frame.
    pub fn filterbank_energies(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        self.check_rate(clip)?;
        let frames = frame_samples(&clip.samples, self.frame_len, self.hop_len)?;
        Ok(frames
            .iter()
            .map(|frame| {
                let windowed: Vec<f64> = frame
                    .samples
                    .iter()
                    .zip(&self.window)
                    .map(|(x, w)| x * w)
                    .collect();
                let spectrum = spectrum_with(&*self.fft, &windowed, self.nfft, self.sample_rate);
                self.filterbank.energies(&spectrum)
            })
            .collect())
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureSequence> {
        let floor = self.cfg.log_floor;
        let frames = self
            .filterbank_energies(clip)?
            .into_iter()
            .map(|energies| {
                let logs: Vec<f64> = energies.iter().map(|s| s.max(floor).ln()).collect();
                self.dct
                    .iter()
                    .map(|row| row.iter().zip(&logs).map(|(c, l)| c * l).sum())
                    .collect()
            })
            .collect();
        FeatureSequence::new(clip.id.clone(), clip.label.clone(), frames)
    }

    fn check_rate(&self, clip: &AudioClip) -> Result<()> {
        if clip.sample_rate != self.sample_rate {
            return Err(Error::Precondition(format!(
                "extractor built for {} Hz, clip {} is {} Hz",
                self.sample_rate, clip.id, clip.sample_rate
            )));
        }
        Ok(())
    }
}

pub fn mfcc(clip: &AudioClip, cfg: &FrontendConfig) -> Result<FeatureSequence> {
    Extractor::new(cfg, clip.sample_rate)?.extract(clip)
}

/// Extracts every clip of a corpus in parallel; output order follows the
/// corpus.
pub fn extract_corpus(corpus: &Corpus, cfg: &FrontendConfig) -> Result<Vec<FeatureSequence>> {
    extract_clips(corpus.clips(), cfg)
}

pub fn extract_clips(clips: &[AudioClip], cfg: &FrontendConfig) -> Result<Vec<FeatureSequence>> {
    let mut extractors = BTreeMap::new();
    for clip in clips {
        if let std::collections::btree_map::Entry::Vacant(slot) = extractors.entry(clip.sample_rate)
        {
            slot.insert(Extractor::new(cfg, clip.sample_rate)?);
        }
    }
    clips
        .par_iter()
        .map(|clip| extractors[&clip.sample_rate].extract(clip))
        .collect()
}
