//! Linear device power model.

use serde::{Deserialize, Serialize};

use crate::device::DeviceRunReport;

use super::BenchError;

/// Average draw in mW is `p_idle` plus `p_cpu` and `p_tx` weighted by the
/// fractions of the run spent computing and transmitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    pub p_idle_mw: f64,
    pub p_cpu_mw: f64,
    pub p_tx_mw: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self { p_idle_mw: 1300.0, p_cpu_mw: 700.0, p_tx_mw: 450.0 }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<(), BenchError> {
        let ok = [self.p_idle_mw, self.p_cpu_mw, self.p_tx_mw].iter().all(|p| p.is_finite() && *p >= 0.0);
        if ok { Ok(()) } else { Err(BenchError::Invalid(format!("power constants must be finite and non-negative: {self:?}"))) }
    }

    /// Average power over a run of `t_total` seconds.
    pub fn average_mw(&self, t_total: f64, t_compute: f64, t_tx: f64) -> Result<f64, BenchError> {
        self.validate()?;
        if !(t_total > 0.0 && t_total.is_finite()) {
            return Err(BenchError::Invalid(format!("total runtime must be positive, got {t_total}")));
        }
        if !(t_compute >= 0.0 && t_tx >= 0.0) {
            return Err(BenchError::Invalid("phase durations must be non-negative".into()));
        }
        Ok((self.p_idle_mw * t_total + self.p_cpu_mw * t_compute + self.p_tx_mw * t_tx) / t_total)
    }
}

/// Seconds `bytes` spend on a link of the given bandwidth; zero when the
/// link is unlimited.
pub fn transmit_time(bytes: u64, bandwidth_bytes_per_s: Option<f64>) -> f64 {
    bandwidth_bytes_per_s.map_or(0.0, |bw| bytes as f64 / bw)
}

/// Modelled average power of one device run.
pub fn estimate_energy(
    report: &DeviceRunReport,
    pm: &PowerModel,
    bandwidth_bytes_per_s: Option<f64>,
) -> Result<f64, BenchError> {
    if !report.succeeded() {
        return Err(BenchError::Invalid(format!("run of device {} clip {} is incomplete", report.device_id, report.clip_id)));
    }
    pm.average_mw(report.total_runtime_s, report.compute_s, transmit_time(report.bytes_sent, bandwidth_bytes_per_s))
}
