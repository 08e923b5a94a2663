mod common;

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use common::*;
use usc_core::device::{synth_clip, CAR_HORN_HZ, SYNTH_PEAK};
use usc_core::dsp::fft::Fft;
use usc_core::dsp::{
    extract_features, hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, mfcc, pre_emphasize, resample,
    spectral_contrast, stft, tonnetz, tonnetz_basis, AudioClip, Spectrogram, Window,
};
use usc_core::NUM_CLASSES;

#[test]
fn fft_matches_naive_dft() {
    for (i, n) in [1usize, 2, 4, 8, 64, 256, 1024].into_iter().enumerate() {
        let err = fft_vs_dft_error(n, i as u64);
        assert!(err <= 1e-9, "n = {n}: relative error {err}");
    }
}

#[test]
fn fft_rejects_non_power_of_two() {
    assert!(Fft::new(0).is_err());
    assert!(Fft::new(1000).is_err());
}

#[test]
fn parseval_holds() {
    for n in [16, 512, 2048] {
        let err = parseval_error(n, n as u64);
        assert!(err <= 1e-9, "n = {n}: {err}");
    }
}

#[test]
fn real_forward_is_half_of_complex_fft() {
    let x: Vec<f64> = random_signal(256, 5).iter().map(|c| c.re).collect();
    let full = naive_dft(&x.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
    let half = Fft::new(256).unwrap().real_forward(&x);
    assert!(half.len() >= 129);
    for k in 0..=128 {
        assert!((half[k] - full[k]).norm() < 1e-9, "bin {k}");
    }
}

#[test]
fn dct_is_orthonormal() {
    for n in [1, 2, 13, 128] {
        assert!(dct_orthonormality_error(n) <= 1e-9, "n = {n}");
    }
}

#[test]
fn mfcc_matches_direct_dct_sum() {
    let mel = ndarray::Array2::from_shape_fn((2, 128), |(f, m)| ((f + 1) * (m + 3)) as f64 * 1e-3);
    let c = mfcc(&mel, 40).unwrap();
    for f in 0..2 {
        let logs: Vec<f64> = mel.row(f).iter().map(|v| (v + 1e-10).ln()).collect();
        let reference = naive_dct(&logs);
        for k in 0..40 {
            assert!((c[[f, k]] - reference[k]).abs() < 1e-9, "frame {f} coefficient {k}");
        }
    }
}

#[test]
fn mfcc_of_constant_frame_is_analytic() {
    for v in [0.0, 1e-3, 1.0, 250.0] {
        assert!(mfcc_constant_frame_error(v) <= 1e-9, "value {v}");
    }
}

#[test]
fn mel_scale_formula() {
    assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-9);
    assert_eq!(hz_to_mel(0.0), 0.0);
    for f in [20.0, 440.0, 11025.0] {
        assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
    }
}

#[test]
fn mel_filters_match_triangle_definition() {
    let (n_mels, n_fft, sr) = (128, 2048, 22050u32);
    let fb = mel_filterbank(n_mels, n_fft, sr, 0.0, 11025.0).unwrap();
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(11025.0);
    let points: Vec<f64> = (0..n_mels + 2).map(|i| hz(top * i as f64 / (n_mels + 1) as f64)).collect();
    let bin_hz = f64::from(sr) / n_fft as f64;
    for m in 0..n_mels {
        let (l, c, r) = (points[m], points[m + 1], points[m + 2]);
        let mut area = 0.0;
        for k in 0..=n_fft / 2 {
            let f = k as f64 * bin_hz;
            let tri = if f > l && f <= c {
                (f - l) / (c - l)
            } else if f > c && f < r {
                (r - f) / (r - c)
            } else {
                0.0
            };
            let expected = tri * 2.0 / (r - l);
            assert!((fb.weights()[[m, k]] - expected).abs() < 1e-12, "filter {m} bin {k}");
            area += fb.weights()[[m, k]] * bin_hz;
        }
        // Unit area once a filter spans many bins.
        if r - l > 30.0 * bin_hz {
            assert!((area - 1.0).abs() < 0.02, "filter {m} area {area}");
        }
    }
}

#[test]
fn mel_spectrogram_is_weighted_power_sum() {
    let clip = sine(1000.0, 22050, 8192, 0.3);
    let spec = stft(&clip, 2048, 512, Window::Hann).unwrap();
    let fb = mel_filterbank(40, 2048, 22050, 0.0, 11025.0).unwrap();
    let mel = mel_spectrogram(&spec, &fb).unwrap();
    for f in [0, 5, spec.n_frames() - 1] {
        for m in 0..40 {
            let direct: f64 = (0..spec.n_bins()).map(|k| fb.weights()[[m, k]] * spec.magnitudes[[f, k]].powi(2)).sum();
            assert!((mel[[f, m]] - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        }
    }
}

#[test]
fn mel_rejects_mismatched_inputs() {
    assert!(mel_filterbank(128, 2048, 22050, 0.0, 12000.0).is_err());
    let spec = stft(&sine(440.0, 16000, 4096, 0.5), 1024, 256, Window::Hann).unwrap();
    let fb = mel_filterbank(40, 2048, 16000, 0.0, 8000.0).unwrap();
    assert!(mel_spectrogram(&spec, &fb).is_err());
}

fn peak_frequency(clip: &AudioClip, max_hz: f64) -> f64 {
    let x = clip.samples();
    let n = x.len();
    let sr = f64::from(clip.sample_rate());
    let bins = (max_hz / sr * n as f64) as usize;
    (1..bins)
        .map(|k| {
            let s: Complex64 = x
                .iter()
                .enumerate()
                .map(|(t, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * t % n) as f64 / n as f64))
                .sum();
            (k, s.norm())
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k as f64 * sr / n as f64)
        .unwrap()
}

#[test]
fn resampled_tone_keeps_its_pitch() {
    let clip = sine(440.0, 16000, 16000, 0.5);
    let out = resample(&clip, 22050).unwrap();
    assert_eq!(out.len(), 22050);
    let peak = peak_frequency(&out, 1000.0);
    assert!((peak - 440.0).abs() <= 1.0, "peak at {peak} Hz");
}

#[test]
fn pre_emphasis_gain_matches_transfer_function() {
    let sr = 22050u32;
    let (lo_hz, hi_hz) = (10.0 * sr as f64 / 2048.0, 400.0 * sr as f64 / 2048.0);
    let n = 22050;
    let s = (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            0.3 * (2.0 * PI * lo_hz * t).sin() + 0.3 * (2.0 * PI * hi_hz * t).sin()
        })
        .collect();
    let clip = AudioClip::new(s, sr).unwrap();
    let before = stft(&clip, 2048, 512, Window::Hann).unwrap();
    let after = stft(&pre_emphasize(&clip, 0.97).unwrap(), 2048, 512, Window::Hann).unwrap();
    let gain = |f: f64| (Complex64::new(1.0, 0.0) - 0.97 * Complex64::from_polar(1.0, -2.0 * PI * f / sr as f64)).norm_sqr();
    let frame = 10;
    let ratio = |s: &Spectrogram| s.magnitudes[[frame, 400]].powi(2) / s.magnitudes[[frame, 10]].powi(2);
    let measured = ratio(&after) / ratio(&before);
    let expected = gain(hi_hz) / gain(lo_hz);
    assert!(measured > 1.0);
    assert!((measured / expected - 1.0).abs() < 0.05, "{measured} vs {expected}");
}

fn spec_from_power_row(row: &[f64]) -> Spectrogram {
    let n_bins = row.len();
    Spectrogram {
        magnitudes: ndarray::Array2::from_shape_vec((1, n_bins), row.iter().map(|p| p.sqrt()).collect()).unwrap(),
        n_fft: (n_bins - 1) * 2,
        hop: 512,
        sample_rate: 22050,
    }
}

#[test]
fn contrast_of_two_level_bands() {
    // Every band holds mostly `valley` power with exactly k bins at `peak`,
    // where k is the quantile count of that band.
    let n_fft = 2048;
    let sr = 22050.0;
    let bin_hz = sr / n_fft as f64;
    let edges = [0.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0, sr / 2.0];
    let (peak, valley) = (4.0, 0.01);
    let mut row = vec![valley; n_fft / 2 + 1];
    for b in 0..7 {
        let bins: Vec<usize> = (0..row.len())
            .filter(|&k| {
                let f = k as f64 * bin_hz;
                f >= edges[b] && (f < edges[b + 1] || (b == 6 && f <= edges[b + 1]))
            })
            .collect();
        let k = ((0.02 * bins.len() as f64).round() as usize).max(1);
        for &i in bins.iter().take(k) {
            row[i] = peak;
        }
    }
    let c = spectral_contrast(&spec_from_power_row(&row), 22050, 6, 200.0, 0.02).unwrap();
    let expected = (peak + 1e-10f64).ln() - (valley + 1e-10f64).ln();
    for b in 0..7 {
        assert!((c[[0, b]] - expected).abs() < 1e-9, "band {b}: {}", c[[0, b]]);
    }
    let flat = spectral_contrast(&spec_from_power_row(&vec![1.0; n_fft / 2 + 1]), 22050, 6, 200.0, 0.02).unwrap();
    assert!(flat.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn tonnetz_oracles() {
    assert!(tonnetz_uniform_error() <= 1e-9);
    let basis = tonnetz_basis();
    // A single pitch class lands on its basis column.
    for pc in 0..12 {
        let mut chroma = ndarray::Array2::zeros((1, 12));
        chroma[[0, pc]] = 0.8;
        let t = tonnetz(&chroma);
        for d in 0..6 {
            assert!((t[[0, d]] - basis[[d, pc]]).abs() < 1e-12);
        }
    }
    // Fifths circle: C and G are 7 pi / 6 apart.
    let (c, g) = (basis.column(0), basis.column(7));
    let angle = |v: ndarray::ArrayView1<f64>| v[0].atan2(v[1]);
    let diff = (angle(g) - angle(c)).rem_euclid(2.0 * PI);
    assert!((diff - (7.0 * 7.0 * PI / 6.0).rem_euclid(2.0 * PI)).abs() < 1e-12);
}

#[test]
fn chroma_peaks_at_a_for_440_and_880() {
    assert_eq!(chroma_argmax(440.0), 9);
    assert_eq!(chroma_argmax(880.0), 9);
    assert_eq!(chroma_argmax(261.63 * 2.0), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Octave equivalence for tones close to equal temperament and high
    /// enough that bin spacing stays below a quarter semitone.
    #[test]
    fn chroma_is_octave_equivalent(midi in 67i32..84, detune in -0.25f64..0.25) {
        let f = 440.0 * 2f64.powf((f64::from(midi) + detune - 69.0) / 12.0);
        prop_assert_eq!(chroma_argmax(f), chroma_argmax(2.0 * f));
        prop_assert_eq!(chroma_argmax(f), midi.rem_euclid(12) as usize);
    }
}

#[test]
fn car_horn_peaks_at_its_recipe_frequency() {
    let clip = synth_clip(1, 1.0, 16000, 3).unwrap();
    let peak = peak_frequency(&clip, 2000.0);
    assert!((peak - CAR_HORN_HZ).abs() <= 1.0, "peak at {peak} Hz");
}

#[test]
fn synth_clips_are_bounded_and_deterministic() {
    for class in 0..NUM_CLASSES {
        let a = synth_clip(class, 2.0, 16000, 11).unwrap();
        assert!(a.samples().iter().all(|s| s.abs() <= SYNTH_PEAK), "class {class}");
        assert_eq!(a, synth_clip(class, 2.0, 16000, 11).unwrap());
        assert_eq!(a.len(), 32000);
    }
    assert!(synth_clip(NUM_CLASSES, 1.0, 16000, 0).is_err());
}

#[test]
fn classes_have_distinct_features() {
    let feats: Vec<Vec<f64>> = (0..NUM_CLASSES)
        .map(|c| extract_features(&synth_clip(c, 2.0, 16000, 5).unwrap()).unwrap().into_values())
        .collect();
    for i in 0..NUM_CLASSES {
        for j in i + 1..NUM_CLASSES {
            let d: f64 = feats[i].iter().zip(&feats[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(d > 0.0, "classes {i} and {j} coincide");
        }
    }
}
