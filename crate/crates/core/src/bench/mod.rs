//! Fleet benchmarks, the power model and configuration scoring.

mod energy;
mod fleet;
mod report;
mod scenario;
mod score;

pub use energy::{estimate_energy, transmit_time, PowerModel};
pub use fleet::{probe_configs, simulate_fleet, ClipSpec, FleetRun, FleetSample, FleetSpec, LatencyStats, NetworkSpec};
pub use report::{
    emit_report, metrics_from_rows, read_metrics_csv, read_rows_csv, render_markdown, rows_from_run, score_rows,
    score_table, summarize, write_metrics_csv, write_rows_csv, ConfigSummary, ReportPaths, ResultRow, RunKind,
};
pub use scenario::Scenario;
pub use score::{score_configs, ConfigMetrics, LatencyCriterion, ScoreCard, ScoreRow};

use std::path::Path;
use std::sync::Arc;

use crate::classifier::{load_model, MlpModel, ModelError};
use crate::device::{Configuration, LocalModel};
use crate::dsp::DspError;
use crate::server::{self, JsonlStore, MemoryStore, ProcessingEvent, ResultSink, ServerError, ServerOptions};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid benchmark input: {0}")]
    Invalid(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Server processing log of one fleet run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessingTrace {
    pub config: Configuration,
    pub n_devices: usize,
    pub events: Vec<ProcessingEvent>,
}

#[derive(Debug, Clone)]
pub struct BenchResults {
    pub scenario: Scenario,
    pub probes: Vec<FleetRun>,
    pub fleets: Vec<FleetRun>,
    pub traces: Vec<ProcessingTrace>,
    pub rows: Vec<ResultRow>,
    pub scorecard: Option<ScoreCard>,
    pub failures: Vec<String>,
}

fn fleet_spec(s: &Scenario, n_devices: usize, config: Configuration) -> FleetSpec {
    FleetSpec {
        n_devices,
        config,
        clips: s.clip_spec(),
        clip_seconds: s.clip_seconds,
        iterations: s.iterations,
        device_compute_scale: s.device_compute_scale,
        network: s.network,
        pacing: s.pacing,
    }
}

fn start_server(model: &Arc<MlpModel>, store: Option<&Path>) -> Result<server::ServerHandle, BenchError> {
    let sink: Box<dyn ResultSink> = match store {
        Some(p) => Box::new(JsonlStore::open(p)?),
        None => Box::new(MemoryStore::default()),
    };
    let options = ServerOptions { keep_processing_log: true, ..ServerOptions::default() };
    Ok(server::serve("127.0.0.1:0", Arc::clone(model), sink, options)?)
}

/// Runs the interleaved single-device probes and then every fleet of the
/// scenario, each against a fresh loopback server. Configuration A devices
/// reload `model_path` for every clip. Server results are appended to
/// `store` when given.
pub fn run_benchmark(scenario: &Scenario, model_path: &Path, store: Option<&Path>) -> Result<BenchResults, BenchError> {
    scenario.validate()?;
    let model = Arc::new(load_model(model_path)?);
    let device_model = LocalModel::File(model_path.to_path_buf());
    let mut rows = Vec::new();

    log::info!("probing configurations {:?} with one device", scenario.configs);
    let handle = start_server(&model, store)?;
    let specs: Vec<FleetSpec> = scenario.configs.iter().map(|&c| fleet_spec(scenario, 1, c)).collect();
    let probes = probe_configs(&specs, handle.local_addr(), Some(device_model.clone()));
    handle.shutdown();
    let probes = probes?;
    for run in &probes {
        rows.extend(rows_from_run(RunKind::Probe, run, &scenario.power));
    }

    let mut fleets = Vec::new();
    let mut traces = Vec::new();
    for &config in &scenario.configs {
        for &n in &scenario.fleet_sizes {
            log::info!("fleet: configuration {config}, {n} devices");
            let handle = start_server(&model, store)?;
            let local = (config == Configuration::A).then(|| device_model.clone());
            let run = simulate_fleet(&fleet_spec(scenario, n, config), handle.local_addr(), local);
            let events = handle.processing_log();
            handle.shutdown();
            let run = run?;
            rows.extend(rows_from_run(RunKind::Fleet, &run, &scenario.power));
            traces.push(ProcessingTrace { config, n_devices: n, events });
            fleets.push(run);
        }
    }
    let failures = probes.iter().chain(&fleets).flat_map(|r| r.failures.iter().cloned()).collect();
    let scorecard = score_rows(&rows, scenario.latency_criterion)?;
    Ok(BenchResults { scenario: scenario.clone(), probes, fleets, traces, rows, scorecard, failures })
}
