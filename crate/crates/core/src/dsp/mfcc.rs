use std::f64::consts::PI;

use ndarray::Array2;

use super::{DspError, LOG_EPSILON};

/// Orthonormal DCT-II matrix, rows are basis vectors.
pub fn dct2_matrix(n: usize) -> Array2<f64> {
    let n_f = n as f64;
    Array2::from_shape_fn((n, n), |(k, i)| {
        let scale = if k == 0 { (1.0 / n_f).sqrt() } else { (2.0 / n_f).sqrt() };
        scale * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n_f)).cos()
    })
}

/// Cepstral coefficients: orthonormal DCT-II of `ln(mel + eps)` per frame,
/// truncated to the first `n_mfcc` coefficients.
pub fn mfcc(mel_spec: &Array2<f64>, n_mfcc: usize) -> Result<Array2<f64>, DspError> {
    let n_mels = mel_spec.ncols();
    if n_mfcc == 0 || n_mfcc > n_mels {
        return Err(DspError::DimensionMismatch(format!(
            "n_mfcc {n_mfcc} must be in 1..={n_mels}"
        )));
    }
    if mel_spec.iter().any(|&v| !(v >= 0.0)) {
        return Err(DspError::InvalidParameter("mel spectrogram has negative entries".into()));
    }
    let basis = dct2_matrix(n_mels);
    let basis = basis.slice(ndarray::s![..n_mfcc, ..]);
    let log_mel = mel_spec.mapv(|v| (v + LOG_EPSILON).ln());
    Ok(log_mel.dot(&basis.t()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_frame_has_only_dc() {
        let c = 0.25;
        let mel = Array2::from_elem((2, 128), c);
        let out = mfcc(&mel, 40).unwrap();
        let expected = 128f64.sqrt() * (c + LOG_EPSILON).ln();
        for row in out.rows() {
            assert!((row[0] - expected).abs() < 1e-9);
            assert!(row.iter().skip(1).all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let mel = Array2::from_elem((1, 8), 1.0);
        assert!(mfcc(&mel, 9).is_err());
        assert!(mfcc(&mel, 0).is_err());
        let neg = Array2::from_elem((1, 8), -1.0);
        assert!(mfcc(&neg, 4).is_err());
    }
}
