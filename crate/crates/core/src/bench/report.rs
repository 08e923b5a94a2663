//! Per-iteration CSV, markdown tables and the score card on disk.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::device::Configuration;

use super::{
    estimate_energy, score_configs, BenchError, BenchResults, ConfigMetrics, FleetRun, LatencyCriterion,
    PowerModel, ScoreCard,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    /// Single-device run measuring runtime and power.
    Probe,
    /// Concurrent fleet measuring latency.
    Fleet,
}

/// One device iteration as written to `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run: RunKind,
    pub config: Configuration,
    pub n_devices: usize,
    pub device_id: u32,
    pub iteration: usize,
    pub clip_id: u64,
    pub ok: bool,
    pub label: String,
    pub total_runtime_s: f64,
    pub recording_phase_s: f64,
    pub classification_phase_s: f64,
    pub compute_s: f64,
    pub latency_ms: f64,
    pub bytes_sent: u64,
    pub avg_power_mw: f64,
}

pub fn rows_from_run(kind: RunKind, run: &FleetRun, pm: &PowerModel) -> Vec<ResultRow> {
    let bandwidth = run.spec.network.bandwidth();
    run.samples
        .iter()
        .map(|s| {
            let r = &s.report;
            ResultRow {
                run: kind,
                config: r.config,
                n_devices: run.spec.n_devices,
                device_id: r.device_id,
                iteration: s.iteration,
                clip_id: r.clip_id,
                ok: r.succeeded(),
                label: r.class_label().unwrap_or_default().to_string(),
                total_runtime_s: r.total_runtime_s,
                recording_phase_s: r.recording_phase_s,
                classification_phase_s: r.classification_phase_s,
                compute_s: r.compute_s,
                latency_ms: r.reply_latency_s * 1e3,
                bytes_sent: r.bytes_sent,
                avg_power_mw: estimate_energy(r, pm, bandwidth).unwrap_or(f64::NAN),
            }
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { f64::NAN } else { sum / n as f64 }
}

/// Means of successful runs for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: Configuration,
    pub power_mw: f64,
    pub runtime_s: f64,
    pub recording_phase_s: f64,
    pub classification_phase_s: f64,
    /// Mean latency in ms per fleet size.
    pub latency_ms: BTreeMap<usize, f64>,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<ConfigSummary> {
    let mut configs: Vec<Configuration> = rows.iter().map(|r| r.config).collect();
    configs.sort();
    configs.dedup();
    configs
        .into_iter()
        .map(|config| {
            let probe = || rows.iter().filter(move |r| r.config == config && r.run == RunKind::Probe && r.ok);
            let mut latency_ms = BTreeMap::new();
            for r in rows.iter().filter(|r| r.config == config && r.run == RunKind::Fleet) {
                latency_ms.entry(r.n_devices).or_insert_with(Vec::new);
                if r.ok {
                    latency_ms.get_mut(&r.n_devices).expect("inserted").push(r.latency_ms);
                }
            }
            ConfigSummary {
                config,
                power_mw: mean(probe().map(|r| r.avg_power_mw)),
                runtime_s: mean(probe().map(|r| r.total_runtime_s)),
                recording_phase_s: mean(probe().map(|r| r.recording_phase_s)),
                classification_phase_s: mean(probe().map(|r| r.classification_phase_s)),
                latency_ms: latency_ms.into_iter().map(|(n, v)| (n, mean(v.into_iter()))).collect(),
            }
        })
        .collect()
}

/// Score inputs from per-iteration rows: probe means for power and runtime,
/// fleet means at the smallest and largest size for latency.
pub fn metrics_from_rows(rows: &[ResultRow]) -> Result<Vec<ConfigMetrics>, BenchError> {
    summarize(rows)
        .into_iter()
        .map(|s| {
            let (small, large) = match (s.latency_ms.first_key_value(), s.latency_ms.last_key_value()) {
                (Some((_, a)), Some((_, b))) => (*a, *b),
                _ => return Err(BenchError::Invalid(format!("no fleet rows for configuration {}", s.config))),
            };
            Ok(ConfigMetrics {
                config: s.config,
                power_mw: s.power_mw,
                runtime_s: s.runtime_s,
                latency_small_ms: small,
                latency_large_ms: large,
            })
        })
        .collect()
}

pub fn write_rows_csv(path: &Path, rows: &[ResultRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<ResultRow>, BenchError> {
    csv::Reader::from_path(path)?.deserialize().map(|r| r.map_err(Into::into)).collect()
}

/// Reads score inputs from either a per-iteration `results.csv` or a
/// summary with columns `config,power_mw,runtime_s,latency_small_ms,latency_large_ms`.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<ConfigMetrics>, BenchError> {
    let mut text = String::new();
    fs::File::open(path)?.read_to_string(&mut text)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().any(|h| h == "latency_small_ms") {
        reader.deserialize().map(|r| r.map_err(Into::into)).collect()
    } else {
        let rows: Vec<ResultRow> = reader.deserialize().collect::<Result<_, _>>()?;
        metrics_from_rows(&rows)
    }
}

pub fn write_metrics_csv(path: &Path, metrics: &[ConfigMetrics]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for m in metrics {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}

pub fn score_table(card: &ScoreCard) -> String {
    let mut out = String::from("| Configuration | Power | Runtime | Latency | Tally |\n|---|---|---|---|---|\n");
    for r in &card.rows {
        let _ = writeln!(out, "| {} | {} | {} | {} | {} |", r.config, r.power, r.runtime, r.latency, r.tally);
    }
    out
}

fn fmt_num(x: f64, digits: usize) -> String {
    if x.is_finite() { format!("{x:.digits$}") } else { "n/a".into() }
}

pub fn render_markdown(results: &BenchResults) -> String {
    let summaries = summarize(&results.rows);
    let mut md = String::from("# Benchmark report\n\n");
    let s = &results.scenario;
    let _ = writeln!(
        md,
        "Fleet sizes {:?}, {} iterations per device, {} s clips, device compute scale {}, \
         link {} B/s with {} s base delay{}.\n",
        s.fleet_sizes,
        s.iterations,
        s.clip_seconds,
        s.device_compute_scale,
        s.network.bandwidth_bytes_per_s,
        s.network.base_delay_s,
        if s.network.shared_medium { " (shared)" } else { "" }
    );

    md.push_str("## Power and runtime (single device)\n\n");
    md.push_str("| Configuration | Avg power (mW) | Runtime (s) | Recording (s) | Classification (s) |\n|---|---|---|---|---|\n");
    for c in &summaries {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            c.config,
            fmt_num(c.power_mw, 2),
            fmt_num(c.runtime_s, 4),
            fmt_num(c.recording_phase_s, 4),
            fmt_num(c.classification_phase_s, 4)
        );
    }

    md.push_str("\n## Mean latency (ms)\n\n| Configuration |");
    let sizes: Vec<usize> = {
        let mut v: Vec<usize> = summaries.iter().flat_map(|c| c.latency_ms.keys().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    for n in &sizes {
        let _ = write!(md, " {n} devices |");
    }
    md.push_str(" Growth |\n|---|");
    md.push_str(&"---|".repeat(sizes.len() + 1));
    md.push('\n');
    for c in &summaries {
        let _ = write!(md, "| {} |", c.config);
        for n in &sizes {
            let _ = write!(md, " {} |", c.latency_ms.get(n).map_or("n/a".into(), |v| fmt_num(*v, 2)));
        }
        let growth = match (c.latency_ms.first_key_value(), c.latency_ms.last_key_value()) {
            (Some((_, a)), Some((_, b))) => b / a,
            _ => f64::NAN,
        };
        let _ = writeln!(md, " {} |", fmt_num(growth, 2));
    }

    md.push_str("\n## Configuration scoring\n\n");
    match &results.scorecard {
        Some(card) => {
            let _ = writeln!(md, "Latency ranked by {:?}.\n", card.criterion);
            md.push_str(&score_table(card));
        }
        None => md.push_str("Scoring needs all three configurations.\n"),
    }
    if !results.failures.is_empty() {
        md.push_str("\n## Failed runs\n\n");
        for f in &results.failures {
            let _ = writeln!(md, "- {f}");
        }
    }
    md
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub results_csv: PathBuf,
    pub report_md: PathBuf,
    pub scorecard_json: PathBuf,
}

/// Writes `results.csv`, `report.md` and, when all three configurations
/// ran, `scorecard.json` into `dir`.
pub fn emit_report(results: &BenchResults, dir: &Path) -> Result<ReportPaths, BenchError> {
    fs::create_dir_all(dir)?;
    let paths = ReportPaths {
        results_csv: dir.join("results.csv"),
        report_md: dir.join("report.md"),
        scorecard_json: dir.join("scorecard.json"),
    };
    write_rows_csv(&paths.results_csv, &results.rows)?;
    fs::write(&paths.report_md, render_markdown(results))?;
    if let Some(card) = &results.scorecard {
        fs::write(&paths.scorecard_json, serde_json::to_string_pretty(card).expect("score card serializes") + "\n")?;
    }
    Ok(paths)
}

/// Scores rows, or returns `None` when some configuration is missing.
pub fn score_rows(rows: &[ResultRow], criterion: LatencyCriterion) -> Result<Option<ScoreCard>, BenchError> {
    let metrics = metrics_from_rows(rows)?;
    if metrics.len() != Configuration::ALL.len() {
        return Ok(None);
    }
    score_configs(&metrics, criterion).map(Some)
}
