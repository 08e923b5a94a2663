//! Deterministic class-distinct sound generator standing in for field
//! recordings of the ten urban sound classes.

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::classifier::NUM_CLASSES;
use crate::dsp::{AudioClip, DspError};

/// Peak amplitude of every generated clip never exceeds this.
pub const SYNTH_PEAK: f64 = 0.9;
/// Fundamental of the car horn recipe, held exact across seeds.
pub const CAR_HORN_HZ: f64 = 400.0;

struct Gen {
    rng: StdRng,
    sr: f64,
    n: usize,
}

impl Gen {
    fn jitter(&mut self, value: f64, fraction: f64) -> f64 {
        value * (1.0 + self.rng.random_range(-fraction..=fraction))
    }

    fn noise(&mut self) -> Vec<f64> {
        (0..self.n).map(|_| self.rng.random_range(-1.0..=1.0)).collect()
    }

    fn t(&self, i: usize) -> f64 {
        i as f64 / self.sr
    }

    /// One-pole low-pass, normalized back to unit peak.
    fn lowpass(&self, x: &[f64], cutoff: f64) -> Vec<f64> {
        let a = (-2.0 * PI * cutoff / self.sr).exp();
        let mut y = 0.0;
        let out: Vec<f64> = x
            .iter()
            .map(|&v| {
                y = (1.0 - a) * v + a * y;
                y
            })
            .collect();
        normalize(out)
    }

    fn harmonics(&self, i: usize, f0: f64, amps: &[f64], phase: f64) -> f64 {
        let t = self.t(i);
        amps.iter()
            .enumerate()
            .map(|(h, a)| a * (2.0 * PI * f0 * (h + 1) as f64 * t + phase * (h + 1) as f64).sin())
            .sum()
    }
}

fn normalize(mut x: Vec<f64>) -> Vec<f64> {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
    x
}

fn mix(a: &[f64], wa: f64, b: &[f64], wb: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
}

/// Decaying burst envelope starting at `onset` samples.
fn burst(n: usize, onset: usize, decay_samples: f64) -> impl Fn(usize) -> f64 {
    move |i| {
        if i < onset || i >= n {
            0.0
        } else {
            (-((i - onset) as f64) / decay_samples).exp()
        }
    }
}

fn air_conditioner(g: &mut Gen) -> Vec<f64> {
    let white = g.noise();
    let cutoff = g.jitter(250.0, 0.2);
    let rumble = g.lowpass(&white, cutoff);
    let hum_f = g.jitter(120.0, 0.05);
    let hum: Vec<f64> = (0..g.n).map(|i| g.harmonics(i, hum_f, &[1.0, 0.4], 0.0)).collect();
    mix(&rumble, 0.8, &normalize(hum), 0.2)
}

fn car_horn(g: &mut Gen) -> Vec<f64> {
    let amps = [1.0, g.rng.random_range(0.2..0.4), g.rng.random_range(0.1..0.25)];
    let onset = (g.rng.random_range(0.0..0.1) * g.n as f64) as usize;
    let noise = g.noise();
    (0..g.n)
        .map(|i| {
            let on = if i >= onset { 1.0 } else { 0.0 };
            on * g.harmonics(i, CAR_HORN_HZ, &amps, 0.0) + 0.05 * noise[i]
        })
        .collect()
}

fn children_playing(g: &mut Gen) -> Vec<f64> {
    let white = g.noise();
    let noise = g.lowpass(&white, 3000.0);
    let syllable = (g.sr * g.jitter(0.18, 0.2)) as usize;
    let mut out = vec![0.0; g.n];
    let mut start = 0;
    while start < g.n {
        let f0 = g.rng.random_range(450.0..900.0);
        let glide = g.rng.random_range(-0.4..0.4);
        let len = syllable.min(g.n - start);
        let mut phase = 0.0;
        for k in 0..len {
            let frac = k as f64 / syllable as f64;
            let f = f0 * (1.0 + glide * frac);
            phase += 2.0 * PI * f / g.sr;
            let env = (PI * frac).sin();
            out[start + k] += env * (phase.sin() + 0.5 * (2.0 * phase).sin() + 0.25 * (3.0 * phase).sin());
        }
        start += syllable + (g.sr * g.rng.random_range(0.02..0.15)) as usize;
    }
    mix(&normalize(out), 0.85, &noise, 0.15)
}

fn dog_bark(g: &mut Gen) -> Vec<f64> {
    let noise = g.noise();
    let mut out = vec![0.0; g.n];
    let mut onset = (g.sr * g.rng.random_range(0.0..0.3)) as usize;
    while onset < g.n {
        let f0 = g.jitter(520.0, 0.1);
        let env = burst(g.n, onset, g.sr * 0.05);
        let len = ((g.sr * 0.25) as usize).min(g.n - onset);
        for k in 0..len {
            let i = onset + k;
            let t = k as f64 / g.sr;
            let f = f0 * (1.0 - 0.6 * t);
            let tone = (2.0 * PI * f * t).sin() + 0.6 * (4.0 * PI * f * t).sin();
            out[i] += env(i) * (tone + 0.4 * noise[i]);
        }
        onset += (g.sr * g.rng.random_range(0.45..0.9)) as usize;
    }
    out
}

fn drilling(g: &mut Gen) -> Vec<f64> {
    let f0 = g.jitter(2400.0, 0.08);
    let am = g.jitter(30.0, 0.2);
    let noise = g.noise();
    (0..g.n)
        .map(|i| {
            let t = g.t(i);
            let env = 0.7 + 0.3 * (2.0 * PI * am * t).sin();
            env * g.harmonics(i, f0, &[1.0, 0.5, 0.3], 0.3) + 0.15 * noise[i]
        })
        .collect()
}

fn engine_idling(g: &mut Gen) -> Vec<f64> {
    let f0 = g.jitter(38.0, 0.15);
    let am = g.jitter(7.0, 0.2);
    let amps: Vec<f64> = (1..=12).map(|h| 1.0 / h as f64).collect();
    let white = g.noise();
    let brown = g.lowpass(&white, 80.0);
    (0..g.n)
        .map(|i| {
            let env = 0.8 + 0.2 * (2.0 * PI * am * g.t(i)).sin();
            env * g.harmonics(i, f0, &amps, 0.0) * 0.3 + 0.3 * brown[i]
        })
        .collect()
}

fn gun_shot(g: &mut Gen) -> Vec<f64> {
    let noise = g.noise();
    let shots = g.rng.random_range(1..=3);
    let mut out = vec![0.0; g.n];
    for _ in 0..shots {
        let onset = (g.rng.random_range(0.05..0.8) * g.n as f64) as usize;
        let env = burst(g.n, onset, g.sr * g.jitter(0.06, 0.3));
        for (i, o) in out.iter_mut().enumerate().skip(onset) {
            *o += env(i) * noise[i];
        }
    }
    out
}

fn jackhammer(g: &mut Gen) -> Vec<f64> {
    let rate = g.jitter(12.0, 0.05);
    let period = g.sr / rate;
    let white = g.noise();
    let noise = g.lowpass(&white, 1500.0);
    let ring = g.jitter(900.0, 0.1);
    (0..g.n)
        .map(|i| {
            let since = (i as f64) % period;
            let env = (-since / (g.sr * 0.012)).exp();
            env * (noise[i] + 0.5 * (2.0 * PI * ring * since / g.sr).sin())
        })
        .collect()
}

fn siren(g: &mut Gen) -> Vec<f64> {
    let (lo, hi) = (g.jitter(650.0, 0.1), g.jitter(1350.0, 0.1));
    let sweep = g.jitter(0.3, 0.2);
    let start = g.rng.random_range(0.0..2.0 * PI);
    let noise = g.noise();
    let mut phase = 0.0;
    (0..g.n)
        .map(|i| {
            let s = 0.5 + 0.5 * (2.0 * PI * sweep * g.t(i) + start).sin();
            phase += 2.0 * PI * (lo + (hi - lo) * s) / g.sr;
            phase.sin() + 0.3 * (2.0 * phase).sin() + 0.05 * noise[i]
        })
        .collect()
}

fn street_music(g: &mut Gen) -> Vec<f64> {
    const TRIADS: [[i32; 3]; 4] = [[0, 4, 7], [5, 9, 12], [7, 11, 14], [-3, 0, 4]];
    let root = 220.0 * 2f64.powf(g.rng.random_range(0..6) as f64 / 12.0);
    let chord_len = (g.sr * g.jitter(0.5, 0.1)) as usize;
    let noise = g.noise();
    let order: Vec<usize> = (0..16).map(|_| g.rng.random_range(0..TRIADS.len())).collect();
    (0..g.n)
        .map(|i| {
            let idx = i / chord_len;
            let chord = TRIADS[order[idx % order.len()]];
            let within = (i % chord_len) as f64 / g.sr;
            let env = (-within * 3.0).exp() * 0.7 + 0.3;
            let tone: f64 = chord
                .iter()
                .map(|&semi| {
                    let f = root * 2f64.powf(semi as f64 / 12.0);
                    g.harmonics(i, f, &[1.0, 0.4, 0.2], 0.0)
                })
                .sum();
            env * tone + 0.05 * noise[i]
        })
        .collect()
}

/// Generates `duration_s` of class `class_id` at `sr`. Same arguments, same
/// samples; the seed varies pitch, timing and level within the class recipe.
pub fn synth_clip(class_id: usize, duration_s: f64, sr: u32, seed: u64) -> Result<AudioClip, DspError> {
    if class_id >= NUM_CLASSES {
        return Err(DspError::InvalidParameter(format!("class id {class_id} >= {NUM_CLASSES}")));
    }
    if !(duration_s > 0.0) || sr == 0 {
        return Err(DspError::InvalidParameter("duration and sample rate must be positive".into()));
    }
    let n = (duration_s * f64::from(sr)).round() as usize;
    let mix_seed = seed ^ (class_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut g = Gen { rng: StdRng::seed_from_u64(mix_seed), sr: f64::from(sr), n };
    let raw = match class_id {
        0 => air_conditioner(&mut g),
        1 => car_horn(&mut g),
        2 => children_playing(&mut g),
        3 => dog_bark(&mut g),
        4 => drilling(&mut g),
        5 => engine_idling(&mut g),
        6 => gun_shot(&mut g),
        7 => jackhammer(&mut g),
        8 => siren(&mut g),
        _ => street_music(&mut g),
    };
    let gain = SYNTH_PEAK * g.rng.random_range(0.6..=1.0);
    let samples = normalize(raw).into_iter().map(|v| v * gain).collect();
    AudioClip::new(samples, sr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_class_respects_peak_and_length() {
        for c in 0..NUM_CLASSES {
            let clip = synth_clip(c, 1.0, 16000, 3).unwrap();
            assert_eq!(clip.len(), 16000);
            let peak = clip.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(peak <= SYNTH_PEAK && peak > 0.1, "class {c}: {peak}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synth_clip(6, 0.5, 16000, 11).unwrap(), synth_clip(6, 0.5, 16000, 11).unwrap());
        assert_ne!(synth_clip(6, 0.5, 16000, 11).unwrap(), synth_clip(6, 0.5, 16000, 12).unwrap());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(synth_clip(10, 1.0, 16000, 0).is_err());
        assert!(synth_clip(0, 0.0, 16000, 0).is_err());
    }
}
