//! Rank-based configuration scoring: per metric the best of three
//! configurations gets 3 points, the next 2, the worst 1.

use serde::{Deserialize, Serialize};

use crate::device::Configuration;

use super::BenchError;

/// Score inputs of one configuration. Lower is better for every metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigMetrics {
    pub config: Configuration,
    pub power_mw: f64,
    pub runtime_s: f64,
    /// Mean latency at the smallest fleet size.
    pub latency_small_ms: f64,
    /// Mean latency at the largest fleet size.
    pub latency_large_ms: f64,
}

impl ConfigMetrics {
    pub fn latency_growth(&self) -> f64 {
        self.latency_large_ms / self.latency_small_ms
    }
}

/// How latency measurements are reduced to one rankable number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyCriterion {
    /// Mean latency at the largest fleet.
    #[default]
    LargestFleet,
    /// Largest-fleet latency divided by smallest-fleet latency.
    GrowthRatio,
}

impl LatencyCriterion {
    pub fn value(self, m: &ConfigMetrics) -> f64 {
        match self {
            LatencyCriterion::LargestFleet => m.latency_large_ms,
            LatencyCriterion::GrowthRatio => m.latency_growth(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub config: Configuration,
    pub power: u8,
    pub runtime: u8,
    pub latency: u8,
    pub tally: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub criterion: LatencyCriterion,
    pub metrics: Vec<ConfigMetrics>,
    /// One row per configuration in A, B, C order.
    pub rows: Vec<ScoreRow>,
}

impl ScoreCard {
    pub fn row(&self, config: Configuration) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.config == config)
    }

    pub fn tally(&self, config: Configuration) -> Option<u8> {
        self.row(config).map(|r| r.tally)
    }
}

/// Points for `values`, indexed like the input. Ties go to the earlier
/// configuration label.
fn rank_points(values: &[(Configuration, f64)]) -> Vec<u8> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].1.total_cmp(&values[j].1).then(values[i].0.cmp(&values[j].0)));
    let mut points = vec![0u8; values.len()];
    for (rank, &i) in order.iter().enumerate() {
        points[i] = (values.len() - rank) as u8;
    }
    points
}

pub fn score_configs(metrics: &[ConfigMetrics], criterion: LatencyCriterion) -> Result<ScoreCard, BenchError> {
    let mut sorted = metrics.to_vec();
    sorted.sort_by_key(|m| m.config);
    if sorted.iter().map(|m| m.config).collect::<Vec<_>>() != Configuration::ALL {
        return Err(BenchError::Invalid("scoring needs exactly one entry for each of A, B and C".into()));
    }
    for m in &sorted {
        let vals = [m.power_mw, m.runtime_s, m.latency_small_ms, m.latency_large_ms, criterion.value(m)];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(BenchError::Invalid(format!("non-finite metric for configuration {}", m.config)));
        }
    }
    let column = |f: &dyn Fn(&ConfigMetrics) -> f64| rank_points(&sorted.iter().map(|m| (m.config, f(m))).collect::<Vec<_>>());
    let power = column(&|m| m.power_mw);
    let runtime = column(&|m| m.runtime_s);
    let latency = column(&|m| criterion.value(m));
    let rows = sorted
        .iter()
        .enumerate()
        .map(|(i, m)| ScoreRow {
            config: m.config,
            power: power[i],
            runtime: runtime[i],
            latency: latency[i],
            tally: power[i] + runtime[i] + latency[i],
        })
        .collect();
    Ok(ScoreCard { criterion, metrics: sorted, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(config: Configuration, v: f64) -> ConfigMetrics {
        ConfigMetrics { config, power_mw: v, runtime_s: v, latency_small_ms: 1.0, latency_large_ms: v }
    }

    #[test]
    fn ties_break_by_label() {
        let card = score_configs(&Configuration::ALL.map(|c| m(c, 1.0)), LatencyCriterion::default()).unwrap();
        let tallies: Vec<u8> = card.rows.iter().map(|r| r.tally).collect();
        assert_eq!(tallies, vec![9, 6, 3]);
    }

    #[test]
    fn needs_each_config_once() {
        let two = [m(Configuration::A, 1.0), m(Configuration::B, 2.0)];
        assert!(score_configs(&two, LatencyCriterion::default()).is_err());
        let dup = [m(Configuration::A, 1.0), m(Configuration::A, 2.0), m(Configuration::C, 3.0)];
        assert!(score_configs(&dup, LatencyCriterion::default()).is_err());
        let nan = [m(Configuration::A, f64::NAN), m(Configuration::B, 2.0), m(Configuration::C, 3.0)];
        assert!(score_configs(&nan, LatencyCriterion::default()).is_err());
    }
}
