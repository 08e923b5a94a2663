//! Benchmark scenario files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::device::Configuration;

use super::{BenchError, ClipSpec, LatencyCriterion, NetworkSpec, PowerModel};

/// A full benchmark: every configuration at every fleet size, plus a
/// single-device probe per configuration for runtime and power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub fleet_sizes: Vec<usize>,
    pub configs: Vec<Configuration>,
    pub iterations: usize,
    pub clip_seconds: f64,
    pub device_compute_scale: f64,
    pub pacing: bool,
    pub seed: u64,
    /// WAV clips to play; generated clips when empty.
    pub clips: Vec<PathBuf>,
    pub model: Option<PathBuf>,
    pub latency_criterion: LatencyCriterion,
    pub network: NetworkSpec,
    pub power: PowerModel,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            fleet_sizes: vec![4, 8, 12],
            configs: Configuration::ALL.to_vec(),
            iterations: 20,
            clip_seconds: 10.0,
            device_compute_scale: 6.0,
            pacing: false,
            seed: 0,
            clips: Vec::new(),
            model: None,
            latency_criterion: LatencyCriterion::default(),
            network: NetworkSpec::default(),
            power: PowerModel::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, BenchError> {
        let s: Scenario = toml::from_str(text).map_err(|e| BenchError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Loads a scenario; relative clip and model paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Scenario(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Self::from_toml_str(&text).map_err(|e| BenchError::Scenario(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in s.clips.iter_mut().chain(s.model.as_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Scenario(m));
        if self.fleet_sizes.is_empty() || self.fleet_sizes.contains(&0) {
            return bad("fleet_sizes must list positive device counts".into());
        }
        if self.configs.is_empty() {
            return bad("configs must not be empty".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.device_compute_scale >= 1.0 && self.device_compute_scale.is_finite()) {
            return bad(format!("device_compute_scale must be at least 1, got {}", self.device_compute_scale));
        }
        if !(self.clip_seconds > 0.0) {
            return bad("clip_seconds must be positive".into());
        }
        self.power.validate()
    }

    pub fn clip_spec(&self) -> ClipSpec {
        if self.clips.is_empty() {
            ClipSpec::Synth { seed: self.seed }
        } else {
            ClipSpec::Wav { paths: self.clips.clone() }
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }
}
