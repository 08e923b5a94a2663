use ndarray::Array2;

use super::Spectrogram;

/// Pitch class (C = 0 ... B = 11) of the equal-tempered semitone nearest
/// to `freq`, with A4 = 440 Hz.
pub fn pitch_class_of(freq: f64) -> usize {
    let midi = 69.0 + 12.0 * (freq / 440.0).log2();
    (midi.round() as i64).rem_euclid(12) as usize
}

/// Folds each bin's power onto the pitch class of its nearest semitone and
/// normalizes every frame by its maximum. The DC bin carries no pitch and
/// is skipped.
pub fn chromagram(spec: &Spectrogram, sr: u32) -> Array2<f64> {
    let bin_hz = f64::from(sr) / spec.n_fft as f64;
    let classes: Vec<usize> = (0..spec.n_bins())
        .map(|k| if k == 0 { usize::MAX } else { pitch_class_of(k as f64 * bin_hz) })
        .collect();
    let mut out = Array2::zeros((spec.n_frames(), 12));
    for (f, mags) in spec.magnitudes.rows().into_iter().enumerate() {
        let mut acc = [0.0f64; 12];
        for (&pc, &m) in classes.iter().zip(mags.iter()).skip(1) {
            acc[pc] += m * m;
        }
        let max = acc.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            for (pc, v) in acc.iter().enumerate() {
                out[[f, pc]] = v / max;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_pitches() {
        assert_eq!(pitch_class_of(440.0), 9);
        assert_eq!(pitch_class_of(880.0), 9);
        assert_eq!(pitch_class_of(261.63), 0);
        assert_eq!(pitch_class_of(27.5), 9);
        assert_eq!(pitch_class_of(466.16), 10);
    }

    #[test]
    fn zero_spectrum_stays_zero() {
        let spec = Spectrogram {
            magnitudes: Array2::zeros((4, 1025)),
            n_fft: 2048,
            hop: 512,
            sample_rate: 22050,
        };
        assert!(chromagram(&spec, 22050).iter().all(|&v| v == 0.0));
    }
}
