use std::ops::Range;

use ndarray::{Array2, Axis};

use super::{
    chromagram, mel_filterbank, mel_spectrogram, mfcc, pre_emphasize, resample, spectral_contrast,
    stft, tonnetz, AudioClip, DspError, Window,
};

pub const FEATURE_DIM: usize = 193;
pub const FEATURE_SAMPLE_RATE: u32 = 22050;

const N_FFT: usize = 2048;
const HOP: usize = 512;
const PRE_EMPHASIS: f64 = 0.97;
const N_MFCC: usize = 40;
const N_MELS: usize = 128;
const CONTRAST_BANDS: usize = 6;
const CONTRAST_FMIN: f64 = 200.0;
const CONTRAST_ALPHA: f64 = 0.02;

const MFCC: Range<usize> = 0..40;
const CHROMA: Range<usize> = 40..52;
const MEL: Range<usize> = 52..180;
const CONTRAST: Range<usize> = 180..187;
const TONNETZ: Range<usize> = 187..193;

/// Per-clip feature aggregate, laid out as
/// `[mfcc 40 | chroma 12 | mel 128 | contrast 7 | tonnetz 6]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, DspError> {
        if values.len() != FEATURE_DIM {
            return Err(DspError::DimensionMismatch(format!(
                "feature vector has {} values, expected {FEATURE_DIM}",
                values.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DspError::InvalidParameter(format!(
                "feature {index} is not finite ({value})"
            )));
        }
        Ok(Self(values))
    }

    pub fn from_f32(values: &[f32]) -> Result<Self, DspError> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&v| v as f32).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn mfcc(&self) -> &[f64] {
        &self.0[MFCC]
    }

    pub fn chroma(&self) -> &[f64] {
        &self.0[CHROMA]
    }

    pub fn mel(&self) -> &[f64] {
        &self.0[MEL]
    }

    pub fn contrast(&self) -> &[f64] {
        &self.0[CONTRAST]
    }

    pub fn tonnetz(&self) -> &[f64] {
        &self.0[TONNETZ]
    }
}

/// Intermediate per-frame features, kept for inspection and plotting.
#[derive(Debug, Clone)]
pub struct FrameFeatures {
    pub mfcc: Array2<f64>,
    pub chroma: Array2<f64>,
    pub mel: Array2<f64>,
    pub contrast: Array2<f64>,
    pub tonnetz: Array2<f64>,
}

impl FrameFeatures {
    pub fn compute(clip: &AudioClip) -> Result<Self, DspError> {
        if clip.is_empty() {
            return Err(DspError::EmptyInput);
        }
        let clip = resample(clip, FEATURE_SAMPLE_RATE)?;
        if clip.len() < N_FFT {
            return Err(DspError::ClipTooShort { got: clip.len(), need: N_FFT });
        }
        let emphasized = pre_emphasize(&clip, PRE_EMPHASIS)?;
        let spec = stft(&emphasized, N_FFT, HOP, Window::Hann)?;
        let sr = FEATURE_SAMPLE_RATE;
        let fb = mel_filterbank(N_MELS, N_FFT, sr, 0.0, f64::from(sr) / 2.0)?;
        let mel = mel_spectrogram(&spec, &fb)?;
        let mfcc = mfcc(&mel, N_MFCC)?;
        let chroma = chromagram(&spec, sr);
        let contrast = spectral_contrast(&spec, sr, CONTRAST_BANDS, CONTRAST_FMIN, CONTRAST_ALPHA)?;
        let tonnetz = tonnetz(&chroma);
        Ok(Self { mfcc, chroma, mel, contrast, tonnetz })
    }

    /// Time-mean of every block, concatenated in vector layout order.
    pub fn aggregate(&self) -> Result<FeatureVector, DspError> {
        let mut values = Vec::with_capacity(FEATURE_DIM);
        for block in [&self.mfcc, &self.chroma, &self.mel, &self.contrast, &self.tonnetz] {
            let mean = block
                .mean_axis(Axis(0))
                .ok_or(DspError::EmptyInput)?;
            values.extend(mean.iter());
        }
        FeatureVector::new(values)
    }
}

/// Resample to 22050 Hz, pre-emphasize, STFT, run all five extractors and
/// average each over time.
pub fn extract_features(clip: &AudioClip) -> Result<FeatureVector, DspError> {
    FrameFeatures::compute(clip)?.aggregate()
}
