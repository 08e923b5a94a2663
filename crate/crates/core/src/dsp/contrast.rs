use ndarray::Array2;

use super::{DspError, Spectrogram, LOG_EPSILON};

/// Octave sub-band edges in Hz: `[0, fmin, 2 fmin, ..., fmin 2^n_bands]`
/// with the last edge capped at Nyquist.
fn band_edges(n_bands: usize, fmin: f64, nyquist: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    edges.extend((0..=n_bands).map(|i| (fmin * 2f64.powi(i as i32)).min(nyquist)));
    *edges.last_mut().expect("non-empty") = nyquist;
    edges
}

/// Per-frame difference between the log mean of the loudest and quietest
/// `alpha` fraction of bins in each octave band. Output width `n_bands + 1`.
pub fn spectral_contrast(
    spec: &Spectrogram,
    sr: u32,
    n_bands: usize,
    fmin: f64,
    alpha: f64,
) -> Result<Array2<f64>, DspError> {
    if n_bands == 0 || !(alpha > 0.0 && alpha <= 0.5) || !(fmin > 0.0) {
        return Err(DspError::InvalidParameter(format!(
            "need n_bands >= 1, fmin > 0 and 0 < alpha <= 0.5 (got {n_bands}, {fmin}, {alpha})"
        )));
    }
    let nyquist = f64::from(sr) / 2.0;
    let edges = band_edges(n_bands, fmin, nyquist);
    let bin_hz = f64::from(sr) / spec.n_fft as f64;
    let n_bins = spec.n_bins();
    let mut bands = Vec::with_capacity(n_bands + 1);
    for b in 0..=n_bands {
        let (lo, hi) = (edges[b], edges[b + 1]);
        let last = b == n_bands;
        let bins: Vec<usize> = (0..n_bins)
            .filter(|&k| {
                let f = k as f64 * bin_hz;
                f >= lo && (f < hi || (last && f <= hi))
            })
            .collect();
        if bins.is_empty() || lo >= hi {
            return Err(DspError::EmptyBand { band: b, lo, hi });
        }
        bands.push((bins[0], bins[bins.len() - 1] + 1));
    }

    let power = spec.power();
    let mut out = Array2::zeros((spec.n_frames(), n_bands + 1));
    let mut scratch = Vec::with_capacity(n_bins);
    for (f, row) in power.rows().into_iter().enumerate() {
        for (b, &(start, end)) in bands.iter().enumerate() {
            scratch.clear();
            scratch.extend(row.iter().skip(start).take(end - start).copied());
            scratch.sort_unstable_by(f64::total_cmp);
            let n = scratch.len();
            let k = ((alpha * n as f64).round() as usize).clamp(1, n);
            let valley = scratch[..k].iter().sum::<f64>() / k as f64;
            let peak = scratch[n - k..].iter().sum::<f64>() / k as f64;
            out[[f, b]] = (peak + LOG_EPSILON).ln() - (valley + LOG_EPSILON).ln();
        }
    }
    Ok(out)
}
