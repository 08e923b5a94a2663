use ndarray::Array2;

use super::{DspError, Spectrogram};

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterScale {
    Mel,
    Octave,
}

/// Non-negative filter weights over the bins of an `n_fft` spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    weights: Array2<f64>,
    scale: FilterScale,
    n_fft: usize,
    sample_rate: u32,
    /// Half-open range of nonzero bins for each row.
    support: Vec<(usize, usize)>,
}

impl FilterBank {
    pub fn new(
        weights: Array2<f64>,
        scale: FilterScale,
        n_fft: usize,
        sample_rate: u32,
    ) -> Result<Self, DspError> {
        if weights.ncols() != n_fft / 2 + 1 {
            return Err(DspError::DimensionMismatch(format!(
                "{} weight columns for n_fft {n_fft}",
                weights.ncols()
            )));
        }
        let mut support = Vec::with_capacity(weights.nrows());
        for (m, row) in weights.rows().into_iter().enumerate() {
            if row.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                return Err(DspError::InvalidParameter(format!(
                    "filter {m} has a negative or non-finite weight"
                )));
            }
            let first = row.iter().position(|&w| w > 0.0).ok_or_else(|| {
                DspError::InvalidParameter(format!(
                    "filter {m} covers no FFT bin; use fewer filters or a larger n_fft"
                ))
            })?;
            let last = row.iter().rposition(|&w| w > 0.0).unwrap_or(first);
            support.push((first, last + 1));
        }
        Ok(Self { weights, scale, n_fft, sample_rate, support })
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn n_filters(&self) -> usize {
        self.weights.nrows()
    }

    pub fn scale(&self) -> FilterScale {
        self.scale
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
}

/// Triangular filters equally spaced on the mel scale, each scaled to unit
/// area (`2 / (f_right - f_left)`).
pub fn mel_filterbank(
    n_mels: usize,
    n_fft: usize,
    sr: u32,
    fmin: f64,
    fmax: f64,
) -> Result<FilterBank, DspError> {
    let nyquist = f64::from(sr) / 2.0;
    if fmax > nyquist {
        return Err(DspError::AboveNyquist { fmax, nyquist });
    }
    if n_mels == 0 || !(fmin >= 0.0) || fmin >= fmax {
        return Err(DspError::InvalidParameter(format!(
            "need n_mels >= 1 and 0 <= fmin < fmax (got {n_mels}, {fmin}, {fmax})"
        )));
    }
    let n_bins = n_fft / 2 + 1;
    let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = f64::from(sr) / n_fft as f64;
    let mut weights = Array2::zeros((n_mels, n_bins));
    for m in 0..n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (right - left);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let rise = (f - left) / (center - left);
            let fall = (right - f) / (right - center);
            let w = rise.min(fall);
            if w > 0.0 {
                weights[[m, k]] = w * norm;
            }
        }
    }
    FilterBank::new(weights, FilterScale::Mel, n_fft, sr)
}

/// Applies `fb` to the power spectrum of every frame.
pub fn mel_spectrogram(spec: &Spectrogram, fb: &FilterBank) -> Result<Array2<f64>, DspError> {
    if fb.n_fft != spec.n_fft || fb.sample_rate != spec.sample_rate || fb.weights.ncols() != spec.n_bins() {
        return Err(DspError::DimensionMismatch(format!(
            "filter bank built for n_fft {} at {} Hz, spectrogram is n_fft {} at {} Hz",
            fb.n_fft, fb.sample_rate, spec.n_fft, spec.sample_rate
        )));
    }
    let mut out = Array2::zeros((spec.n_frames(), fb.n_filters()));
    for (f, mags) in spec.magnitudes.rows().into_iter().enumerate() {
        for (m, &(start, end)) in fb.support.iter().enumerate() {
            let mut acc = 0.0;
            for k in start..end {
                acc += fb.weights[[m, k]] * mags[k] * mags[k];
            }
            out[[f, m]] = acc;
        }
    }
    Ok(out)
}
