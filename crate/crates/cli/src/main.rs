mod layers;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use toml::{Table, Value};

use usc_core::bench::{emit_report, read_metrics_csv, run_benchmark, score_configs, score_table, LatencyCriterion};
use usc_core::classifier::{load_model, save_model, train, TrainConfig};
use usc_core::corpus::{load_dataset_dir, synthetic_dataset, SYNTH_CLIP_SECONDS, SYNTH_SAMPLE_RATE};
use usc_core::device::{synth_clip, ClipSource, ComputeScale, Device, DeviceOptions, LinkEmulator, LocalModel};
use usc_core::dsp::extract_features;
use usc_core::dsp::wav::{read_wav, write_wav};
use usc_core::server::{serve, JsonlStore, ServerOptions, DEFAULT_PORT};
use usc_core::{Configuration, MlpModel, CLASS_LABELS};

#[derive(Parser)]
#[command(name = "usc", version, about = "Urban sound classification on devices and a server")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Write 0 for absolute timestamps in outputs and frame headers.
    #[arg(long, global = true, env = "USC_DETERMINISTIC_TS")]
    deterministic_ts: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the classifier and write a model file.
    Train(TrainArgs),
    /// Print the 193-value feature vector of a WAV file as JSON.
    Extract {
        wav: PathBuf,
    },
    /// Classify a WAV file with a model.
    Classify {
        wav: PathBuf,
        #[arg(long, env = "USC_MODEL")]
        model: PathBuf,
    },
    /// Write a generated clip of one class as a WAV file.
    Synth(SynthArgs),
    /// Run the classification server.
    Serve(ServeArgs),
    /// Run one device against a server.
    Device(DeviceArgs),
    /// Run the benchmark and write results.csv, report.md and scorecard.json.
    Bench(BenchArgs),
    /// Score configurations from a results or summary CSV.
    Score(ScoreArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["data", "synthetic"])))]
struct TrainArgs {
    /// Directory with one subdirectory of WAV files per class.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Generate this many clips per class instead.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    synthetic: Option<u64>,
    #[arg(long, default_value_t = SYNTH_CLIP_SECONDS)]
    clip_seconds: f64,
    #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0, env = "USC_SEED")]
    seed: u64,
    /// Model output path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the full report, including the loss history, as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Class name or index.
    #[arg(long)]
    class: String,
    #[arg(long, default_value_t = SYNTH_CLIP_SECONDS)]
    seconds: f64,
    #[arg(long, default_value_t = SYNTH_SAMPLE_RATE)]
    sample_rate: u32,
    #[arg(long, default_value_t = 0, env = "USC_SEED")]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "USC_BIND", default_value_t = SocketAddr::from(([0, 0, 0, 0], DEFAULT_PORT)))]
    bind: SocketAddr,
    #[arg(long, env = "USC_MODEL")]
    model: PathBuf,
    /// JSON-lines file that results are appended to.
    #[arg(long, env = "USC_STORE", default_value = "results.jsonl")]
    store: PathBuf,
    /// Sync the store to disk after every record.
    #[arg(long)]
    fsync: bool,
}

#[derive(Args)]
#[command(group(ArgGroup::new("clip").args(["wav", "synth_class"])))]
struct DeviceArgs {
    #[arg(long, env = "USC_CONFIG")]
    config: Configuration,
    #[arg(long, env = "USC_SERVER", default_value_t = format!("127.0.0.1:{DEFAULT_PORT}"))]
    server: String,
    /// Local model, required for configuration A.
    #[arg(long, env = "USC_MODEL")]
    model: Option<PathBuf>,
    /// Play this WAV file instead of a generated clip.
    #[arg(long)]
    wav: Option<PathBuf>,
    /// Class of the generated clip, by name or index.
    #[arg(long, default_value = "siren")]
    synth_class: String,
    #[arg(long, default_value_t = 0, env = "USC_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    iterations: u64,
    #[arg(long, default_value_t = 1)]
    device_id: u32,
    #[arg(long, default_value_t = 10.0)]
    clip_seconds: f64,
    /// Read clips as fast as possible instead of in real time.
    #[arg(long)]
    no_pacing: bool,
    /// Stretch device-side compute by this factor.
    #[arg(long, default_value_t = 1.0)]
    compute_scale: f64,
    /// Emulated uplink bandwidth in bytes per second.
    #[arg(long)]
    bandwidth: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Criterion {
    LargestFleet,
    GrowthRatio,
}

impl Criterion {
    fn key(self) -> &'static str {
        match self {
            Criterion::LargestFleet => "largest_fleet",
            Criterion::GrowthRatio => "growth_ratio",
        }
    }
}

impl From<Criterion> for LatencyCriterion {
    fn from(c: Criterion) -> Self {
        match c {
            Criterion::LargestFleet => LatencyCriterion::LargestFleet,
            Criterion::GrowthRatio => LatencyCriterion::GrowthRatio,
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    /// TOML scenario; flags override it, and it overrides USC_* variables.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Also append every server result to this JSON-lines file.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Comma-separated fleet sizes, e.g. 4,8,12.
    #[arg(long)]
    fleet_sizes: Option<String>,
    /// Comma-separated configurations, e.g. A,B,C.
    #[arg(long)]
    configs: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    iterations: Option<u64>,
    #[arg(long)]
    clip_seconds: Option<f64>,
    #[arg(long)]
    compute_scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pacing: Option<bool>,
    #[arg(long, value_enum)]
    criterion: Option<Criterion>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

#[derive(Args)]
struct ScoreArgs {
    /// `results.csv` from a benchmark, or a summary with columns
    /// config,power_mw,runtime_s,latency_small_ms,latency_large_ms.
    csv: PathBuf,
    #[arg(long, value_enum, default_value = "largest-fleet")]
    criterion: Criterion,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn parse_class(s: &str) -> Result<usize> {
    if let Ok(i) = s.parse::<usize>() {
        if i < CLASS_LABELS.len() {
            return Ok(i);
        }
    }
    CLASS_LABELS
        .iter()
        .position(|l| *l == s)
        .with_context(|| format!("unknown class `{s}`; expected 0-9 or one of {}", CLASS_LABELS.join(", ")))
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    model: &'a Path,
    items: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
    final_loss: f64,
    train_accuracy: f64,
    test_accuracy: f64,
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let data = match (&a.data, a.synthetic) {
        (Some(dir), _) => load_dataset_dir(dir).with_context(|| format!("loading dataset {}", dir.display()))?,
        (None, Some(n)) => synthetic_dataset(n as usize, a.clip_seconds, a.seed)?,
        (None, None) => unreachable!("clap requires a source"),
    };
    log::info!("training on {} clips for {} epochs", data.len(), a.epochs);
    let config = TrainConfig { epochs: a.epochs as usize, learning_rate: a.lr, seed: a.seed };
    let (model, report) = train(&MlpModel::init(a.seed), &data, config)?;
    save_model(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = &a.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print_json(&TrainSummary {
        model: &a.out,
        items: data.len(),
        epochs: report.epochs,
        learning_rate: report.learning_rate,
        seed: report.seed,
        final_loss: report.loss_history.last().copied().unwrap_or(f64::NAN),
        train_accuracy: report.final_train_accuracy,
        test_accuracy: report.final_test_accuracy,
    })
}

fn cmd_extract(wav: &Path) -> Result<()> {
    let clip = read_wav(wav).with_context(|| format!("reading {}", wav.display()))?;
    print_json(&extract_features(&clip)?.values())
}

#[derive(Serialize)]
struct Classified {
    label: &'static str,
    class_index: usize,
    confidence: f64,
}

fn cmd_classify(wav: &Path, model: &Path) -> Result<()> {
    let model = load_model(model).with_context(|| format!("loading model {}", model.display()))?;
    let clip = read_wav(wav).with_context(|| format!("reading {}", wav.display()))?;
    let p = model.predict(&extract_features(&clip)?)?;
    print_json(&Classified { label: p.label(), class_index: p.class_index, confidence: p.confidence })
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let class = parse_class(&a.class)?;
    let clip = synth_clip(class, a.seconds, a.sample_rate, a.seed)?;
    write_wav(&a.out, &clip).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn cmd_serve(a: &ServeArgs, zero_timestamps: bool) -> Result<()> {
    let model = load_model(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let store = JsonlStore::open(&a.store)
        .with_context(|| format!("opening store {}", a.store.display()))?
        .with_fsync(a.fsync);
    let opts = ServerOptions { zero_timestamps, ..ServerOptions::default() };
    let server = serve(a.bind, Arc::new(model), Box::new(store), opts)?;
    eprintln!("listening on {}", server.local_addr());
    server.join();
    Ok(())
}

fn cmd_device(a: &DeviceArgs, zero_timestamps: bool) -> Result<()> {
    let mut opts = DeviceOptions::new(a.device_id, a.config);
    opts.clip_seconds = a.clip_seconds;
    opts.pacing = !a.no_pacing;
    opts.compute = ComputeScale::new(a.compute_scale)
        .with_context(|| format!("compute scale must be at least 1, got {}", a.compute_scale))?;
    if let Some(bw) = a.bandwidth {
        opts.link = LinkEmulator::new(bw, std::time::Duration::ZERO, false);
    }
    opts.zero_timestamps = zero_timestamps;
    let model = match (&a.model, a.config) {
        (Some(p), _) => Some(LocalModel::File(p.clone())),
        (None, Configuration::A) => bail!("configuration A classifies on the device and needs --model"),
        (None, _) => None,
    };
    let clip_source = |i: u64| -> Result<ClipSource> {
        Ok(match &a.wav {
            Some(p) => ClipSource::Wav(p.clone()),
            None => ClipSource::Synth { class_id: parse_class(&a.synth_class)?, seed: a.seed + i },
        })
    };
    clip_source(0)?;
    let mut device = Device::connect(a.server.as_str(), opts, model)?;
    let mut failed = 0;
    for i in 0..a.iterations {
        let mut report = device.run(&clip_source(i)?);
        if zero_timestamps {
            report.record_start_us = 0;
            for ts in [
                &mut report.record_end_us,
                &mut report.extract_end_us,
                &mut report.classify_end_us,
                &mut report.send_start_us,
                &mut report.ack_received_us,
            ] {
                *ts = ts.map(|_| 0);
            }
        }
        if let Some(f) = &report.failure {
            log::error!("clip {}: {:?} failed: {}", report.clip_id, f.phase, f.error);
            failed += 1;
        }
        print_json(&report)?;
    }
    if failed > 0 {
        bail!("{failed} of {} runs failed", a.iterations);
    }
    Ok(())
}

fn flag_layer(a: &BenchArgs) -> Result<Table> {
    let mut t = Table::new();
    let mut set = |key: &str, text: Option<String>| -> Result<()> {
        if let Some(text) = text {
            t.insert(key.to_string(), layers::parse_setting(key, &text)?);
        }
        Ok(())
    };
    set("fleet_sizes", a.fleet_sizes.clone())?;
    set("configs", a.configs.clone())?;
    set("iterations", a.iterations.map(|v| v.to_string()))?;
    set("clip_seconds", a.clip_seconds.map(|v| v.to_string()))?;
    set("device_compute_scale", a.compute_scale.map(|v| v.to_string()))?;
    set("seed", a.seed.map(|v| v.to_string()))?;
    set("pacing", a.pacing.map(|v| v.to_string()))?;
    set("latency_criterion", a.criterion.map(|c| c.key().to_string()))?;
    if let Some(m) = &a.model {
        t.insert("model".into(), Value::String(m.to_string_lossy().into_owned()));
    }
    Ok(t)
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let env = layers::env_layer(|k| std::env::var(k).ok())?;
    let file = a.scenario.as_deref().map(layers::file_layer).transpose()?;
    let scenario = layers::resolve(env, file, flag_layer(a)?)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let model_path = match &scenario.model {
        Some(p) => p.clone(),
        None => {
            let path = a.out.join("model.bin");
            eprintln!("no model given; training one on generated clips into {}", path.display());
            let data = synthetic_dataset(30, SYNTH_CLIP_SECONDS, scenario.seed)?;
            let config = TrainConfig { epochs: 5000, learning_rate: 0.1, seed: scenario.seed };
            let (model, report) = train(&MlpModel::init(scenario.seed), &data, config)?;
            eprintln!("held-out accuracy {:.3}", report.final_test_accuracy);
            save_model(&model, &path)?;
            path
        }
    };
    let results = run_benchmark(&scenario, &model_path, a.store.as_deref())?;
    let paths = emit_report(&results, &a.out)?;
    std::fs::write(a.out.join("scenario.toml"), scenario.to_toml_string())?;
    for f in &results.failures {
        log::warn!("{f}");
    }
    eprintln!("wrote {} and {}", paths.results_csv.display(), paths.report_md.display());
    match &results.scorecard {
        Some(card) => print_json(card),
        None => {
            eprintln!("scoring skipped: it needs all three configurations");
            Ok(())
        }
    }
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let metrics = read_metrics_csv(&a.csv).with_context(|| format!("reading {}", a.csv.display()))?;
    let card = score_configs(&metrics, a.criterion.into())?;
    match a.format {
        Format::Json => print_json(&card),
        Format::Markdown => {
            print!("{}", score_table(&card));
            Ok(())
        }
    }
}

/// The error chain joined by ": ", skipping causes that the previous
/// message already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn init_logging(verbose: u8, default: &str) {
    let level = match verbose {
        0 => default,
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose, if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" });
    let zero_ts = cli.deterministic_ts;
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Extract { wav } => cmd_extract(wav),
        Command::Classify { wav, model } => cmd_classify(wav, model),
        Command::Synth(a) => cmd_synth(a),
        Command::Serve(a) => cmd_serve(a, zero_ts),
        Command::Device(a) => cmd_device(a, zero_ts),
        Command::Bench(a) => cmd_bench(a),
        Command::Score(a) => cmd_score(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
