//! Audio feature extraction: resampling, STFT, mel/MFCC, chroma, spectral
//! contrast and tonnetz, aggregated into a 193-value per-clip vector.

mod chroma;
mod contrast;
mod features;
pub mod fft;
mod mel;
mod mfcc;
mod resample;
mod stft;
mod tonnetz;
pub mod wav;

pub use chroma::{chromagram, pitch_class_of};
pub use contrast::spectral_contrast;
pub use features::{extract_features, FeatureVector, FrameFeatures, FEATURE_DIM, FEATURE_SAMPLE_RATE};
pub use mel::{hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, FilterBank, FilterScale};
pub use mfcc::{dct2_matrix, mfcc};
pub use resample::{resample, resample_with, ResampleMethod};
pub use stft::{pre_emphasize, stft, Spectrogram, Window};
pub use tonnetz::{tonnetz, tonnetz_basis};

/// Floor added wherever a logarithm meets a power that may be zero.
pub const LOG_EPSILON: f64 = 1e-10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DspError {
    #[error("empty input")]
    EmptyInput,
    #[error("clip too short: {got} samples, need at least {need}")]
    ClipTooShort { got: usize, need: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("fmax {fmax} Hz is above Nyquist ({nyquist} Hz)")]
    AboveNyquist { fmax: f64, nyquist: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("band empty at this n_fft/sr: band {band} spans {lo}..{hi} Hz")]
    EmptyBand { band: usize, lo: f64, hi: f64 },
    #[error("unsupported audio: {0}")]
    Unsupported(String),
    #[error("sample {index} out of range: {value}")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for DspError {
    fn from(e: std::io::Error) -> Self {
        DspError::Io(e.to_string())
    }
}

/// Mono PCM audio normalized to `[-1.0, 1.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, DspError> {
        if sample_rate == 0 {
            return Err(DspError::InvalidParameter("sample rate must be positive".into()));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
        {
            return Err(DspError::SampleOutOfRange { index, value });
        }
        Ok(Self { samples, sample_rate })
    }

    /// Output of an internal filter stage; finite but not range checked.
    pub(crate) fn filtered(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(samples.iter().all(|v| v.is_finite()));
        Self { samples, sample_rate }
    }

    /// Builds a clip from signed 16-bit PCM, scaling by 1/32768.
    pub fn from_pcm16(pcm: &[i16], sample_rate: u32) -> Result<Self, DspError> {
        let samples = pcm.iter().map(|&s| f64::from(s) / 32768.0).collect();
        Self::new(samples, sample_rate)
    }

    /// Quantizes back to 16-bit PCM (round to nearest, saturating).
    pub fn to_pcm16(&self) -> Vec<i16> {
        self.samples
            .iter()
            .map(|&s| (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
            .collect()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> u16 {
        1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}
