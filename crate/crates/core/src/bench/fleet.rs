//! Concurrent device fleets against a running server.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Barrier;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::classifier::NUM_CLASSES;
use crate::corpus::synth_seed;
use crate::device::{
    synth_clip, ClipSource, ComputeScale, Configuration, Device, DeviceOptions, DeviceRunReport, LinkEmulator,
    LocalModel, DEFAULT_REPLY_TIMEOUT, RECORDER_SAMPLE_RATE,
};
use crate::dsp::{wav, AudioClip};

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub bandwidth_bytes_per_s: f64,
    pub base_delay_s: f64,
    /// All devices share one uplink, so transmissions queue behind each other.
    pub shared_medium: bool,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self { bandwidth_bytes_per_s: 2e6, base_delay_s: 0.002, shared_medium: true }
    }
}

impl NetworkSpec {
    pub fn link(&self) -> LinkEmulator {
        LinkEmulator::new(self.bandwidth_bytes_per_s, Duration::from_secs_f64(self.base_delay_s.max(0.0)), self.shared_medium)
    }

    pub fn bandwidth(&self) -> Option<f64> {
        (self.bandwidth_bytes_per_s > 0.0 && self.bandwidth_bytes_per_s.is_finite()).then_some(self.bandwidth_bytes_per_s)
    }
}

/// Audio fed to the fleet. Device `d` at iteration `i` plays clip
/// `(d + i) mod len` of the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipSpec {
    /// One generated clip per class.
    Synth { seed: u64 },
    Wav { paths: Vec<PathBuf> },
}

impl Default for ClipSpec {
    fn default() -> Self {
        ClipSpec::Synth { seed: 0 }
    }
}

impl ClipSpec {
    pub fn pool(&self, clip_seconds: f64) -> Result<Vec<AudioClip>, BenchError> {
        match self {
            ClipSpec::Synth { seed } => (0..NUM_CLASSES)
                .map(|c| synth_clip(c, clip_seconds, RECORDER_SAMPLE_RATE, synth_seed(*seed, c, 0)).map_err(Into::into))
                .collect(),
            ClipSpec::Wav { paths } if paths.is_empty() => Err(BenchError::Invalid("no WAV clips given".into())),
            ClipSpec::Wav { paths } => paths.iter().map(|p| wav::read_wav(p).map_err(Into::into)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetSpec {
    pub n_devices: usize,
    pub config: Configuration,
    pub clips: ClipSpec,
    pub clip_seconds: f64,
    pub iterations: usize,
    pub device_compute_scale: f64,
    pub network: NetworkSpec,
    pub pacing: bool,
}

impl FleetSpec {
    pub fn new(n_devices: usize, config: Configuration) -> Self {
        Self {
            n_devices,
            config,
            clips: ClipSpec::default(),
            clip_seconds: 10.0,
            iterations: 20,
            device_compute_scale: 6.0,
            network: NetworkSpec::default(),
            pacing: false,
        }
    }

    fn device_options(&self, device_id: u32, compute: ComputeScale, link: LinkEmulator) -> DeviceOptions {
        DeviceOptions {
            device_id,
            config: self.config,
            clip_seconds: self.clip_seconds,
            sample_rate: RECORDER_SAMPLE_RATE,
            pacing: self.pacing,
            compute,
            link,
            reply_timeout: DEFAULT_REPLY_TIMEOUT,
            zero_timestamps: false,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Invalid(m.into()));
        if self.n_devices == 0 {
            return bad("a fleet needs at least one device");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if ComputeScale::new(self.device_compute_scale).is_none() {
            return bad("device compute scale must be a finite value of at least 1");
        }
        if !(self.clip_seconds > 0.0) {
            return bad("clip length must be positive");
        }
        if !(self.network.bandwidth_bytes_per_s >= 0.0) || !(self.network.base_delay_s >= 0.0) {
            return bad("network parameters must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub config: Configuration,
    pub n_devices: usize,
    pub samples: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    /// False when any run failed; the figures then cover successful runs only.
    pub complete: bool,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

impl LatencyStats {
    pub fn from_samples(config: Configuration, n_devices: usize, latencies_ms: &[f64], complete: bool) -> Self {
        let mut sorted = latencies_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (mean_ms, p50_ms, p95_ms, max_ms) = if sorted.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                sorted.iter().sum::<f64>() / sorted.len() as f64,
                percentile(&sorted, 0.5),
                percentile(&sorted, 0.95),
                sorted[sorted.len() - 1],
            )
        };
        Self { config, n_devices, samples: sorted.len(), mean_ms, p50_ms, p95_ms, max_ms, complete }
    }
}

/// One device run within a fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetSample {
    pub device_index: usize,
    pub iteration: usize,
    pub report: DeviceRunReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetRun {
    pub spec: FleetSpec,
    pub samples: Vec<FleetSample>,
    pub stats: LatencyStats,
    pub failures: Vec<String>,
}

/// Runs `spec.n_devices` concurrent devices against the server at `server`.
/// Config A devices classify with `model`.
pub fn simulate_fleet(spec: &FleetSpec, server: SocketAddr, model: Option<LocalModel>) -> Result<FleetRun, BenchError> {
    spec.validate()?;
    if spec.config == Configuration::A && model.is_none() {
        return Err(BenchError::Invalid("configuration A needs a device model".into()));
    }
    let pool = spec.clips.pool(spec.clip_seconds)?;
    let link = spec.network.link();
    let compute = ComputeScale::new(spec.device_compute_scale).expect("validated");
    let barrier = Barrier::new(spec.n_devices);

    let results: Vec<Result<Vec<FleetSample>, String>> = thread::scope(|s| {
        let workers: Vec<_> = (0..spec.n_devices)
            .map(|d| {
                let (pool, link, barrier, model) = (&pool, link.clone(), &barrier, model.clone());
                s.spawn(move || {
                    let device = Device::connect(server, spec.device_options(d as u32 + 1, compute, link), model);
                    barrier.wait();
                    let mut device = device.map_err(|e| format!("device {}: {e}", d + 1))?;
                    Ok((0..spec.iterations)
                        .map(|i| {
                            let clip = pool[(d + i) % pool.len()].clone();
                            FleetSample { device_index: d, iteration: i, report: device.run(&ClipSource::Buffer(clip)) }
                        })
                        .collect())
                })
            })
            .collect();
        workers.into_iter().map(|w| w.join().unwrap_or_else(|_| Err("device worker panicked".into()))).collect()
    });

    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.extend(s),
            Err(e) => failures.push(e),
        }
    }
    Ok(FleetRun::assemble(spec.clone(), samples, failures))
}

impl FleetRun {
    fn assemble(spec: FleetSpec, samples: Vec<FleetSample>, mut failures: Vec<String>) -> Self {
        for s in &samples {
            if let Some(f) = &s.report.failure {
                failures.push(format!("device {} iteration {}: {:?}: {}", s.report.device_id, s.iteration, f.phase, f.error));
            }
        }
        let latencies: Vec<f64> =
            samples.iter().filter(|s| s.report.succeeded()).map(|s| s.report.reply_latency_s * 1e3).collect();
        let complete = failures.is_empty() && latencies.len() == spec.n_devices * spec.iterations;
        let stats = LatencyStats::from_samples(spec.config, spec.n_devices, &latencies, complete);
        Self { spec, samples, stats, failures }
    }
}

/// Single-device runs of several configurations against one server,
/// interleaved per iteration so that slow drift in host speed affects every
/// configuration alike. Every spec must have one device and share clips and
/// iteration count.
pub fn probe_configs(specs: &[FleetSpec], server: SocketAddr, model: Option<LocalModel>) -> Result<Vec<FleetRun>, BenchError> {
    let Some(first) = specs.first() else { return Ok(Vec::new()) };
    for s in specs {
        s.validate()?;
        if s.n_devices != 1 || s.iterations != first.iterations || s.clips != first.clips || s.clip_seconds != first.clip_seconds {
            return Err(BenchError::Invalid("probes need one device each and identical clips and iterations".into()));
        }
    }
    let pool = first.clips.pool(first.clip_seconds)?;
    let mut devices = Vec::new();
    let mut failures = vec![Vec::new(); specs.len()];
    for (k, s) in specs.iter().enumerate() {
        let compute = ComputeScale::new(s.device_compute_scale).expect("validated");
        let model = if s.config == Configuration::A { model.clone() } else { None };
        match Device::connect(server, s.device_options(k as u32 + 1, compute, s.network.link()), model) {
            Ok(d) => devices.push(Some(d)),
            Err(e) => {
                failures[k].push(format!("device {}: {e}", k + 1));
                devices.push(None);
            }
        }
    }
    let mut samples = vec![Vec::new(); specs.len()];
    for i in 0..first.iterations {
        let clip = &pool[i % pool.len()];
        for (k, dev) in devices.iter_mut().enumerate() {
            if let Some(dev) = dev {
                let report = dev.run(&ClipSource::Buffer(clip.clone()));
                samples[k].push(FleetSample { device_index: 0, iteration: i, report });
            }
        }
    }
    Ok(specs
        .iter()
        .zip(samples)
        .zip(failures)
        .map(|((spec, samples), failures)| FleetRun::assemble(spec.clone(), samples, failures))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_nearest_rank() {
        let s = LatencyStats::from_samples(Configuration::C, 1, &[5.0, 1.0, 4.0, 2.0, 3.0], true);
        assert_eq!((s.mean_ms, s.p50_ms, s.p95_ms, s.max_ms, s.samples), (3.0, 3.0, 5.0, 5.0, 5));
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = LatencyStats::from_samples(Configuration::C, 1, &hundred, true);
        assert_eq!((s.p50_ms, s.p95_ms), (50.0, 95.0));
    }

    #[test]
    fn spec_validation() {
        let ok = FleetSpec::new(4, Configuration::B);
        assert!(ok.validate().is_ok());
        assert!(FleetSpec { n_devices: 0, ..ok.clone() }.validate().is_err());
        assert!(FleetSpec { iterations: 0, ..ok.clone() }.validate().is_err());
        assert!(FleetSpec { device_compute_scale: 0.5, ..ok }.validate().is_err());
    }
}
