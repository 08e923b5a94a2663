use std::f64::consts::PI;

use ndarray::Array2;

use super::fft::Fft;
use super::{AudioClip, DspError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Periodic Hann window, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Magnitude STFT, one row per frame and `n_fft / 2 + 1` bins per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    pub n_fft: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.magnitudes.ncols()
    }

    pub fn power(&self) -> Array2<f64> {
        self.magnitudes.mapv(|m| m * m)
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * f64::from(self.sample_rate) / self.n_fft as f64
    }
}

/// First-order high-pass: `y[0] = x[0]`, `y[n] = x[n] - coeff * x[n-1]`.
///
/// The output is exact, so it may exceed full scale by up to `1 + coeff`.
pub fn pre_emphasize(clip: &AudioClip, coeff: f64) -> Result<AudioClip, DspError> {
    if clip.is_empty() {
        return Err(DspError::EmptyInput);
    }
    if !(0.0..1.0).contains(&coeff) {
        return Err(DspError::InvalidParameter(format!(
            "pre-emphasis coefficient {coeff} outside [0, 1)"
        )));
    }
    let x = clip.samples();
    let mut y = Vec::with_capacity(x.len());
    y.push(x[0]);
    y.extend(x.windows(2).map(|w| w[1] - coeff * w[0]));
    Ok(AudioClip::filtered(y, clip.sample_rate()))
}

fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Centered STFT with reflect padding of `n_fft / 2` on each side.
pub fn stft(clip: &AudioClip, n_fft: usize, hop: usize, window: Window) -> Result<Spectrogram, DspError> {
    if clip.is_empty() {
        return Err(DspError::EmptyInput);
    }
    if hop == 0 || hop > n_fft {
        return Err(DspError::InvalidParameter(format!(
            "hop {hop} must be in 1..={n_fft}"
        )));
    }
    let fft = Fft::new(n_fft)?;
    let win = window.coefficients(n_fft);
    let x = clip.samples();
    let pad = (n_fft / 2) as isize;
    let n_frames = 1 + x.len() / hop;
    let n_bins = n_fft / 2 + 1;
    let mut magnitudes = Array2::zeros((n_frames, n_bins));
    let mut frame = vec![0.0; n_fft];
    for f in 0..n_frames {
        let start = (f * hop) as isize - pad;
        for (t, slot) in frame.iter_mut().enumerate() {
            *slot = x[reflect_index(start + t as isize, x.len())] * win[t];
        }
        let spectrum = fft.real_forward(&frame);
        for (k, out) in magnitudes.row_mut(f).iter_mut().enumerate() {
            *out = spectrum[k].norm();
        }
    }
    Ok(Spectrogram { magnitudes, n_fft, hop, sample_rate: clip.sample_rate() })
}
