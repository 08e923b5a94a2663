//! Band-limited sample-rate conversion.

use std::f64::consts::PI;

use super::{AudioClip, DspError};

/// Zero crossings of the sinc kernel on each side of the output sample.
const ZERO_CROSSINGS: usize = 16;
const KAISER_BETA: f64 = 8.555;
const ROLLOFF: f64 = 0.85;
/// Above this many distinct phases the kernel is evaluated per output sample.
const MAX_TABLE_PHASES: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleMethod {
    /// Kaiser-windowed sinc with 16 zero crossings per side.
    #[default]
    Sinc,
    /// Two-point linear interpolation. Cheap, but aliases.
    Linear,
}

pub fn resample(clip: &AudioClip, target_sr: u32) -> Result<AudioClip, DspError> {
    resample_with(clip, target_sr, ResampleMethod::Sinc)
}

pub fn resample_with(
    clip: &AudioClip,
    target_sr: u32,
    method: ResampleMethod,
) -> Result<AudioClip, DspError> {
    if clip.is_empty() {
        return Err(DspError::EmptyInput);
    }
    if target_sr == 0 {
        return Err(DspError::InvalidParameter("target sample rate must be positive".into()));
    }
    let source_sr = clip.sample_rate();
    if source_sr == target_sr {
        return Ok(clip.clone());
    }
    let (src, dst) = (u64::from(source_sr), u64::from(target_sr));
    let out_len = ((clip.len() as u64 * dst + src / 2) / src) as usize;
    let out = match method {
        ResampleMethod::Linear => linear(clip.samples(), src, dst, out_len),
        ResampleMethod::Sinc => sinc(clip.samples(), src, dst, out_len),
    };
    Ok(AudioClip::filtered(out, target_sr))
}

fn linear(x: &[f64], src: u64, dst: u64, out_len: usize) -> Vec<f64> {
    (0..out_len as u64)
        .map(|j| {
            let num = j * src;
            let i = (num / dst) as usize;
            let frac = (num % dst) as f64 / dst as f64;
            let a = x.get(i).copied().unwrap_or(0.0);
            let b = x.get(i + 1).copied().unwrap_or(a);
            a + (b - a) * frac
        })
        .collect()
}

fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= (half / k) * (half / k);
        sum += term;
        k += 1.0;
    }
    sum
}

struct Kernel {
    cutoff: f64,
    half_width: f64,
    i0_beta: f64,
}

impl Kernel {
    fn new(src: u64, dst: u64) -> Self {
        let cutoff = ROLLOFF * (dst as f64 / src as f64).min(1.0);
        Self {
            cutoff,
            half_width: ZERO_CROSSINGS as f64 / cutoff,
            i0_beta: bessel_i0(KAISER_BETA),
        }
    }

    fn taps_per_side(&self) -> isize {
        self.half_width.ceil() as isize
    }

    fn eval(&self, d: f64) -> f64 {
        let r = d / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let arg = PI * self.cutoff * d;
        let sinc = if arg == 0.0 { 1.0 } else { arg.sin() / arg };
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta;
        self.cutoff * sinc * window
    }

    /// Normalized weights for input offsets `-m..=m` around `floor(t)`, where
    /// `frac = t - floor(t)`. Unit sum keeps DC gain exactly one.
    fn weights(&self, frac: f64) -> Vec<f64> {
        let m = self.taps_per_side();
        let mut w: Vec<f64> = (-m..=m).map(|o| self.eval(frac - o as f64)).collect();
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= sum);
        w
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn sinc(x: &[f64], src: u64, dst: u64, out_len: usize) -> Vec<f64> {
    let kernel = Kernel::new(src, dst);
    let m = kernel.taps_per_side();
    // Output j sits at input position j * src / dst; its fractional part
    // cycles through dst / gcd distinct values.
    let g = gcd(src, dst);
    let phases = dst / g;
    let table: Option<Vec<Vec<f64>>> = (phases <= MAX_TABLE_PHASES).then(|| {
        (0..phases)
            .map(|p| kernel.weights((p * g) as f64 / dst as f64))
            .collect()
    });
    let n = x.len() as isize;
    let mut out = Vec::with_capacity(out_len);
    let mut owned;
    for j in 0..out_len as u64 {
        let num = j * src;
        let base = (num / dst) as isize;
        let rem = num % dst;
        let weights: &[f64] = match &table {
            Some(t) => &t[(rem / g) as usize],
            None => {
                owned = kernel.weights(rem as f64 / dst as f64);
                &owned
            }
        };
        let lo = base - m;
        let mut acc = 0.0;
        if lo >= 0 && base + m < n {
            let seg = &x[lo as usize..=(base + m) as usize];
            for (s, w) in seg.iter().zip(weights) {
                acc += s * w;
            }
        } else {
            for (k, w) in weights.iter().enumerate() {
                let i = lo + k as isize;
                if (0..n).contains(&i) {
                    acc += x[i as usize] * w;
                }
            }
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i0_matches_reference_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(8.555) - 719.386_402_473_076_8).abs() / 719.39 < 1e-12);
    }

    #[test]
    fn preserves_duration() {
        let clip = AudioClip::new(vec![0.0; 160_000], 16000).unwrap();
        let out = resample(&clip, 22050).unwrap();
        assert_eq!(out.sample_rate(), 22050);
        assert!((out.len() as i64 - 220_500).abs() <= 1);
        let down = resample(&out, 16000).unwrap();
        assert!((down.len() as i64 - 160_000).abs() <= 1);
    }

    #[test]
    fn dc_is_preserved_in_the_interior() {
        for (src, dst) in [(16000, 22050), (22050, 16000), (44100, 22050), (16000, 22051)] {
            let clip = AudioClip::new(vec![0.5; 4000], src).unwrap();
            for method in [ResampleMethod::Sinc, ResampleMethod::Linear] {
                let out = resample_with(&clip, dst, method).unwrap();
                let n = out.len();
                let margin = 64;
                for &v in &out.samples()[margin..n - margin] {
                    assert!((v - 0.5).abs() < 1e-6, "{src}->{dst} {method:?}: {v}");
                }
            }
        }
    }

    #[test]
    fn errors() {
        let empty = AudioClip::new(vec![], 16000).unwrap();
        assert_eq!(resample(&empty, 22050), Err(DspError::EmptyInput));
        let clip = AudioClip::new(vec![0.1], 16000).unwrap();
        assert!(resample(&clip, 0).is_err());
    }
}
