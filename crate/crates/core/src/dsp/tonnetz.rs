use std::f64::consts::PI;

use ndarray::Array2;

/// Radii of the fifths, minor-thirds and major-thirds circles.
const RADII: [f64; 3] = [1.0, 1.0, 0.5];
/// Angular step per pitch class on each circle.
const STEPS: [f64; 3] = [7.0 * PI / 6.0, 3.0 * PI / 2.0, 2.0 * PI / 3.0];

/// 6x12 tonal-centroid basis; column `l` is the embedding of pitch class `l`.
pub fn tonnetz_basis() -> Array2<f64> {
    Array2::from_shape_fn((6, 12), |(d, l)| {
        let circle = d / 2;
        let angle = l as f64 * STEPS[circle];
        let r = RADII[circle];
        if d % 2 == 0 { r * angle.sin() } else { r * angle.cos() }
    })
}

/// Projects each L1-normalized chroma frame onto the tonal-centroid basis.
/// All-zero frames map to zero.
pub fn tonnetz(chroma: &Array2<f64>) -> Array2<f64> {
    let basis = tonnetz_basis();
    let mut out = Array2::zeros((chroma.nrows(), 6));
    for (f, frame) in chroma.rows().into_iter().enumerate() {
        let l1: f64 = frame.iter().map(|v| v.abs()).sum();
        if l1 == 0.0 {
            continue;
        }
        for d in 0..6 {
            out[[f, d]] = frame.iter().enumerate().map(|(l, v)| basis[[d, l]] * v).sum::<f64>() / l1;
        }
    }
    out
}
