//! Acoustic baselines: log-mel spectrogram and MFCC from WAV audio.
//!
//! Frames are Hann-windowed (periodic), zero-padded to `n_fft`, and turned
//! into power spectra. A triangular HTK-scale filterbank with unit-area
//! filters maps them to mel bands, followed by a natural log with a floor.
//! MFCCs are the orthonormal DCT-II of each log-mel frame.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureSequence, FrameSpec};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("{path}: unsupported WAV encoding ({detail})")]
    UnsupportedCodec { path: PathBuf, detail: String },
    #[error("{path}: {detail}")]
    Wav { path: PathBuf, detail: String },
    #[error("waveform is empty")]
    EmptyWaveform,
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("waveform has {samples} samples, shorter than one {window}-sample window")]
    TooShort { samples: usize, window: usize },
    #[error("invalid DSP config: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = DspError> = std::result::Result<T, E>;

/// Mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(DspError::EmptyWaveform);
        }
        if sample_rate_hz == 0 {
            return Err(DspError::InvalidSampleRate);
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Samples in `[start_s, end_s)`, rounded to the nearest sample.
    pub fn clip(&self, start_s: f64, end_s: f64) -> Result<Waveform> {
        let sr = self.sample_rate_hz as f64;
        let lo = ((start_s * sr).round().max(0.0) as usize).min(self.samples.len());
        let hi = ((end_s * sr).round().max(0.0) as usize).min(self.samples.len());
        Waveform::new(self.samples[lo..hi.max(lo)].to_vec(), self.sample_rate_hz)
    }
}

/// Reads 16-bit PCM or 32-bit float WAV, averaging channels to mono.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let wav_err = |e: hound::Error| match e {
        hound::Error::Unsupported => DspError::UnsupportedCodec {
            path: path.to_owned(),
            detail: "format tag not PCM or IEEE float".into(),
        },
        other => DspError::Wav {
            path: path.to_owned(),
            detail: other.to_string(),
        },
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (format, bits) => {
            return Err(DspError::UnsupportedCodec {
                path: path.to_owned(),
                detail: format!("{bits}-bit {format:?}"),
            })
        }
    };
    if !interleaved.len().is_multiple_of(channels) {
        return Err(DspError::Wav {
            path: path.to_owned(),
            detail: "truncated sample frame".into(),
        });
    }
    let mono = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    Waveform::new(mono, spec.sample_rate)
}

/// Writes a mono 16-bit PCM WAV (used to build fixtures).
pub fn write_wav_pcm16(path: &Path, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let err = |e: hound::Error| DspError::Wav {
        path: path.to_owned(),
        detail: e.to_string(),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(err)?;
    for &s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(err)?;
    }
    writer.finalize().map_err(err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DspConfig {
    pub window_s: f64,
    pub hop_s: f64,
    /// Defaults to the next power of two at or above the window length.
    pub n_fft: Option<usize>,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin_hz: f64,
    /// Defaults to the Nyquist frequency.
    pub fmax_hz: Option<f64>,
    pub log_floor: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            window_s: 0.025,
            hop_s: 0.010,
            n_fft: None,
            n_mels: 40,
            n_mfcc: 13,
            fmin_hz: 20.0,
            fmax_hz: None,
            log_floor: 1e-10,
        }
    }
}

/// Sample-domain parameters resolved against a sample rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameLayout {
    pub window: usize,
    pub hop: usize,
    pub n_fft: usize,
    pub sample_rate_hz: u32,
}

impl FrameLayout {
    /// `1 + floor((n - window) / hop)`, or 0 when shorter than a window.
    pub fn frame_count(&self, n_samples: usize) -> usize {
        if n_samples < self.window {
            0
        } else {
            1 + (n_samples - self.window) / self.hop
        }
    }

    pub fn frame_spec(&self) -> FrameSpec {
        let sr = self.sample_rate_hz as f64;
        FrameSpec {
            stride_s: self.hop as f64 / sr,
            offset_s: self.window as f64 / sr / 2.0,
        }
    }
}

impl DspConfig {
    pub fn layout(&self, sample_rate_hz: u32) -> Result<FrameLayout> {
        let bad = |m: &str| Err(DspError::InvalidConfig(m.to_owned()));
        if !(self.hop_s > 0.0 && self.hop_s <= self.window_s) {
            return bad("need 0 < hop_s <= window_s");
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad("need 0 < n_mfcc <= n_mels");
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad("log_floor must be positive");
        }
        let sr = sample_rate_hz as f64;
        let window = (self.window_s * sr).round() as usize;
        let hop = (self.hop_s * sr).round() as usize;
        if window == 0 || hop == 0 {
            return bad("window and hop must span at least one sample");
        }
        let n_fft = self.n_fft.unwrap_or_else(|| window.next_power_of_two());
        if n_fft < window {
            return bad("n_fft must be at least the window length");
        }
        let fmax = self.fmax(sample_rate_hz);
        if !(0.0 <= self.fmin_hz && self.fmin_hz < fmax && fmax <= sr / 2.0) {
            return bad("need 0 <= fmin_hz < fmax_hz <= sample_rate / 2");
        }
        Ok(FrameLayout {
            window,
            hop,
            n_fft,
            sample_rate_hz,
        })
    }

    fn fmax(&self, sample_rate_hz: u32) -> f64 {
        self.fmax_hz.unwrap_or(sample_rate_hz as f64 / 2.0)
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank over the `n_fft / 2 + 1` spectrum bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `n_mels + 2` edge frequencies in Hz; filter `m` peaks at `edges[m + 1]`.
    edges: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate_hz: u32, fmin_hz: f64, fmax_hz: f64) -> Self {
        let (lo, hi) = (hz_to_mel(fmin_hz), hz_to_mel(fmax_hz));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|k| mel_to_hz(lo + (hi - lo) * k as f64 / (n_mels + 1) as f64))
            .collect();
        let n_bins = n_fft / 2 + 1;
        let bin_hz = sample_rate_hz as f64 / n_fft as f64;
        let weights = (0..n_mels)
            .map(|m| {
                let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
                // unit area under the continuous triangle
                let height = 2.0 / (right - left);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        let rise = (f - left) / (center - left);
                        let fall = (right - f) / (right - center);
                        rise.min(fall).max(0.0) * height
                    })
                    .collect()
            })
            .collect();
        Self { edges, weights }
    }

    pub fn center_frequencies(&self) -> &[f64] {
        &self.edges[1..self.edges.len() - 1]
    }

    pub fn apply(&self, power: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let power = power.to_vec();
        self.weights
            .iter()
            .map(move |w| w.iter().zip(&power).map(|(a, b)| a * b).sum())
    }
}

struct Analyzer {
    layout: FrameLayout,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    filterbank: MelFilterbank,
    log_floor: f64,
}

impl Analyzer {
    fn new(w: &Waveform, cfg: &DspConfig) -> Result<Self> {
        let layout = cfg.layout(w.sample_rate_hz)?;
        if w.samples.len() < layout.window {
            return Err(DspError::TooShort {
                samples: w.samples.len(),
                window: layout.window,
            });
        }
        let window = (0..layout.window)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / layout.window as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(layout.n_fft);
        let filterbank = MelFilterbank::new(
            cfg.n_mels,
            layout.n_fft,
            w.sample_rate_hz,
            cfg.fmin_hz,
            cfg.fmax(w.sample_rate_hz),
        );
        Ok(Self {
            layout,
            window,
            fft,
            filterbank,
            log_floor: cfg.log_floor,
        })
    }

    fn log_mel(&self, samples: &[f64]) -> Vec<Vec<f64>> {
        let l = self.layout;
        let mut buf = vec![Complex::new(0.0, 0.0); l.n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        (0..l.frame_count(samples.len()))
            .map(|t| {
                let frame = &samples[t * l.hop..t * l.hop + l.window];
                for (slot, (s, w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
                    *slot = Complex::new(s * w, 0.0);
                }
                for slot in &mut buf[l.window..] {
                    *slot = Complex::new(0.0, 0.0);
                }
                self.fft.process_with_scratch(&mut buf, &mut scratch);
                let power: Vec<f64> = buf[..l.n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
                self.filterbank
                    .apply(&power)
                    .map(|e| e.max(self.log_floor).ln())
                    .collect()
            })
            .collect()
    }
}

pub fn mel_spectrogram(w: &Waveform, cfg: &DspConfig) -> Result<FeatureSequence> {
    let analyzer = Analyzer::new(w, cfg)?;
    let rows = analyzer.log_mel(&w.samples);
    Ok(FeatureSequence::from_rows(&rows, analyzer.layout.frame_spec()).expect("finite log-mel"))
}

/// Orthonormal DCT-II, keeping the first `n_out` coefficients.
pub fn dct_ii(input: &[f64], n_out: usize) -> Vec<f64> {
    let n = input.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * input
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                    .sum::<f64>()
        })
        .collect()
}

pub fn mfcc(w: &Waveform, cfg: &DspConfig) -> Result<FeatureSequence> {
    let analyzer = Analyzer::new(w, cfg)?;
    let rows: Vec<Vec<f64>> = analyzer
        .log_mel(&w.samples)
        .iter()
        .map(|frame| dct_ii(frame, cfg.n_mfcc))
        .collect();
    Ok(FeatureSequence::from_rows(&rows, analyzer.layout.frame_spec()).expect("finite MFCC"))
}

/// Which baseline representation to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Mel,
    Mfcc,
}

impl Baseline {
    pub fn compute(self, w: &Waveform, cfg: &DspConfig) -> Result<FeatureSequence> {
        match self {
            Baseline::Mel => mel_spectrogram(w, cfg),
            Baseline::Mfcc => mfcc(w, cfg),
        }
    }
}
