//! The three device pipelines over a stop-and-wait TCP session.

use std::fmt;
use std::io::{self, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::classifier::{load_model, MlpModel, ModelError};
use crate::dsp::extract_features;
use crate::protocol::{
    encode_frame, read_frame, AckStatus, AudioPayload, FeaturesPayload, Message, ProtocolError, ResultPayload,
};

use super::clock::{now_us, ComputeScale};
use super::recorder::{acquire_clip, ClipSource, RECORDER_SAMPLE_RATE};

pub const DEFAULT_REPLY_TIMEOUT: Duration = Duration::from_secs(30);

/// Where extraction and classification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Configuration {
    /// Extraction and classification on the device; only the result is sent.
    A,
    /// Raw audio sent; the server extracts and classifies.
    B,
    /// Features extracted on the device and classified by the server.
    C,
}

impl Configuration {
    pub const ALL: [Configuration; 3] = [Configuration::A, Configuration::B, Configuration::C];

    pub fn label(self) -> &'static str {
        match self {
            Configuration::A => "A",
            Configuration::B => "B",
            Configuration::C => "C",
        }
    }

    pub fn extracts_on_device(self) -> bool {
        matches!(self, Configuration::A | Configuration::C)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Configuration {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Configuration::A),
            "B" | "b" => Ok(Configuration::B),
            "C" | "c" => Ok(Configuration::C),
            other => Err(format!("unknown configuration `{other}` (expected A, B or C)")),
        }
    }
}

/// Last pipeline phase entered by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Connect,
    Recording,
    Extraction,
    Classification,
    Transmission,
    AwaitReply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub phase: Phase,
    pub error: String,
}

/// Per-clip timing and outcome, emitted as one JSON line.
///
/// Timestamps are microseconds on the process monotonic clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRunReport {
    pub device_id: u32,
    pub config: Configuration,
    pub clip_id: u64,
    pub record_start_us: u64,
    pub record_end_us: Option<u64>,
    pub extract_end_us: Option<u64>,
    pub classify_end_us: Option<u64>,
    pub send_start_us: Option<u64>,
    pub ack_received_us: Option<u64>,
    pub chunks: usize,
    pub bytes_sent: u64,
    pub class_index: Option<u8>,
    pub confidence: Option<f32>,
    pub recording_phase_s: f64,
    pub classification_phase_s: f64,
    pub total_runtime_s: f64,
    /// Device-side extraction and classification time.
    pub compute_s: f64,
    /// Send start to reply.
    pub reply_latency_s: f64,
    pub failure: Option<RunFailure>,
}

impl DeviceRunReport {
    fn started(device_id: u32, config: Configuration, clip_id: u64) -> Self {
        Self {
            device_id,
            config,
            clip_id,
            record_start_us: now_us(),
            record_end_us: None,
            extract_end_us: None,
            classify_end_us: None,
            send_start_us: None,
            ack_received_us: None,
            chunks: 0,
            bytes_sent: 0,
            class_index: None,
            confidence: None,
            recording_phase_s: 0.0,
            classification_phase_s: 0.0,
            total_runtime_s: 0.0,
            compute_s: 0.0,
            reply_latency_s: 0.0,
            failure: None,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none() && self.ack_received_us.is_some()
    }

    pub fn class_label(&self) -> Option<&'static str> {
        self.class_index.and_then(|c| crate::classifier::CLASS_LABELS.get(usize::from(c)).copied())
    }

    /// Timestamps present so far, in pipeline order.
    pub fn timestamps(&self) -> Vec<u64> {
        std::iter::once(Some(self.record_start_us))
            .chain([self.record_end_us, self.extract_end_us, self.classify_end_us, self.send_start_us, self.ack_received_us])
            .flatten()
            .collect()
    }

    fn finalize(&mut self) {
        let secs = |a: u64, b: u64| b.saturating_sub(a) as f64 / 1e6;
        if let Some(end) = self.record_end_us {
            self.recording_phase_s = secs(self.record_start_us, end);
            if let Some(c) = self.classify_end_us.or(self.extract_end_us) {
                self.compute_s = secs(end, c);
            }
            if let Some(ack) = self.ack_received_us {
                self.classification_phase_s = secs(end, ack);
            }
        }
        if let Some(ack) = self.ack_received_us {
            self.total_runtime_s = secs(self.record_start_us, ack);
            if let Some(send) = self.send_start_us {
                self.reply_latency_s = secs(send, ack);
            }
        }
    }
}

/// Emulated uplink: a propagation delay plus serialization at a fixed
/// bandwidth. With a shared medium, transmissions from every device holding
/// a clone of the emulator are serialized, as on a single access point.
#[derive(Debug, Clone, Default)]
pub struct LinkEmulator {
    bandwidth_bytes_per_s: Option<f64>,
    base_delay: Duration,
    medium: Option<Arc<Mutex<()>>>,
}

impl LinkEmulator {
    pub fn unlimited() -> Self {
        Self::default()
    }

    /// `bandwidth_bytes_per_s` of zero means unlimited.
    pub fn new(bandwidth_bytes_per_s: f64, base_delay: Duration, shared_medium: bool) -> Self {
        Self {
            bandwidth_bytes_per_s: (bandwidth_bytes_per_s > 0.0 && bandwidth_bytes_per_s.is_finite())
                .then_some(bandwidth_bytes_per_s),
            base_delay,
            medium: shared_medium.then(|| Arc::new(Mutex::new(()))),
        }
    }

    pub fn bandwidth_bytes_per_s(&self) -> Option<f64> {
        self.bandwidth_bytes_per_s
    }

    pub fn base_delay(&self) -> Duration {
        self.base_delay
    }

    /// Time `bytes` occupy the link.
    pub fn serialization_time(&self, bytes: usize) -> Duration {
        self.bandwidth_bytes_per_s.map_or(Duration::ZERO, |bw| Duration::from_secs_f64(bytes as f64 / bw))
    }

    pub fn transmit<W: Write>(&self, w: &mut W, bytes: &[u8]) -> io::Result<()> {
        if !self.base_delay.is_zero() {
            thread::sleep(self.base_delay);
        }
        let _guard = self.medium.as_ref().map(|m| m.lock().unwrap_or_else(|p| p.into_inner()));
        let hold = self.serialization_time(bytes.len());
        if !hold.is_zero() {
            thread::sleep(hold);
        }
        w.write_all(bytes)?;
        w.flush()
    }

    /// Downlink propagation for a reply.
    pub fn deliver(&self) {
        if !self.base_delay.is_zero() {
            thread::sleep(self.base_delay);
        }
    }
}

/// The classifier used on the device in configuration A.
#[derive(Debug, Clone)]
pub enum LocalModel {
    Loaded(Arc<MlpModel>),
    /// Read from disk for every clip, as a per-clip classifier process
    /// would; the load counts as classification time.
    File(PathBuf),
}

impl LocalModel {
    fn with_model<T>(&self, f: impl FnOnce(&MlpModel) -> Result<T, ModelError>) -> Result<T, ModelError> {
        match self {
            LocalModel::Loaded(m) => f(m),
            LocalModel::File(path) => f(&load_model(path)?),
        }
    }
}

impl From<Arc<MlpModel>> for LocalModel {
    fn from(m: Arc<MlpModel>) -> Self {
        LocalModel::Loaded(m)
    }
}

impl From<MlpModel> for LocalModel {
    fn from(m: MlpModel) -> Self {
        LocalModel::Loaded(Arc::new(m))
    }
}

#[derive(Debug, Clone)]
pub struct DeviceOptions {
    pub device_id: u32,
    pub config: Configuration,
    pub clip_seconds: f64,
    pub sample_rate: u32,
    /// Real-time recording; disable for fast tests.
    pub pacing: bool,
    pub compute: ComputeScale,
    pub link: LinkEmulator,
    pub reply_timeout: Duration,
    /// Send 0 as the frame header timestamp.
    pub zero_timestamps: bool,
}

impl DeviceOptions {
    pub fn new(device_id: u32, config: Configuration) -> Self {
        Self {
            device_id,
            config,
            clip_seconds: 10.0,
            sample_rate: RECORDER_SAMPLE_RATE,
            pacing: true,
            compute: ComputeScale::NATIVE,
            link: LinkEmulator::unlimited(),
            reply_timeout: DEFAULT_REPLY_TIMEOUT,
            zero_timestamps: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DeviceError {
    #[error("configuration A requires a local model")]
    MissingModel,
    #[error("cannot connect to {addr}: {source}")]
    Connect { addr: String, source: io::Error },
}

/// One end device bound to one server connection.
pub struct Device {
    opts: DeviceOptions,
    model: Option<LocalModel>,
    conn: Option<TcpStream>,
    peer: SocketAddr,
    next_clip_id: u64,
}

struct Outcome {
    message: Message,
    local: Option<ResultPayload>,
}

type Step<T> = Result<T, RunFailure>;

fn fail(phase: Phase, error: impl fmt::Display) -> RunFailure {
    RunFailure { phase, error: error.to_string() }
}

impl Device {
    pub fn connect(
        addr: impl ToSocketAddrs + fmt::Debug,
        opts: DeviceOptions,
        model: Option<LocalModel>,
    ) -> Result<Self, DeviceError> {
        if opts.config == Configuration::A && model.is_none() {
            return Err(DeviceError::MissingModel);
        }
        let err = |source| DeviceError::Connect { addr: format!("{addr:?}"), source };
        let conn = TcpStream::connect(&addr).map_err(err)?;
        let peer = conn.peer_addr().map_err(err)?;
        conn.set_nodelay(true).map_err(err)?;
        conn.set_read_timeout(Some(opts.reply_timeout)).map_err(err)?;
        Ok(Self { opts, model, conn: Some(conn), peer, next_clip_id: 0 })
    }

    pub fn options(&self) -> &DeviceOptions {
        &self.opts
    }

    pub fn peer(&self) -> SocketAddr {
        self.peer
    }

    /// Records one clip from `source` and runs it through the pipeline.
    pub fn run(&mut self, source: &ClipSource) -> DeviceRunReport {
        let mut report = DeviceRunReport::started(self.opts.device_id, self.opts.config, self.next_clip_id);
        if let Err(f) = self.run_steps(source, &mut report) {
            log::warn!("device {} clip {} failed in {:?}: {}", report.device_id, report.clip_id, f.phase, f.error);
            report.failure = Some(f);
        }
        report.finalize();
        report
    }

    fn run_steps(&mut self, source: &ClipSource, r: &mut DeviceRunReport) -> Step<()> {
        if self.conn.is_none() {
            return Err(fail(Phase::Connect, "connection closed after an earlier failure"));
        }
        let rec = acquire_clip(source, self.opts.clip_seconds, self.opts.sample_rate, self.opts.pacing)
            .map_err(|e| fail(Phase::Recording, e))?;
        r.record_end_us = Some(now_us());
        r.chunks = rec.chunks;

        let clip_id = self.next_clip_id;
        let compute = self.opts.compute;
        let outcome = match self.opts.config {
            Configuration::B => {
                Outcome { message: Message::Audio(AudioPayload { sample_rate: rec.clip.sample_rate(), pcm: rec.clip.to_pcm16() }), local: None }
            }
            config => {
                let features = compute.run(|| extract_features(&rec.clip)).map_err(|e| fail(Phase::Extraction, e))?;
                r.extract_end_us = Some(now_us());
                if config == Configuration::C {
                    Outcome { message: Message::Features(FeaturesPayload { values: features.to_f32() }), local: None }
                } else {
                    let model = self.model.as_ref().ok_or_else(|| fail(Phase::Classification, DeviceError::MissingModel))?;
                    let p = compute
                        .run(|| model.with_model(|m| m.predict(&features)))
                        .map_err(|e| fail(Phase::Classification, e))?;
                    r.classify_end_us = Some(now_us());
                    let result = ResultPayload { class_index: p.class_index as u8, confidence: p.confidence as f32, clip_id };
                    Outcome { message: Message::Result(result), local: Some(result) }
                }
            }
        };

        let send_start = now_us();
        r.send_start_us = Some(send_start);
        let header_ts = if self.opts.zero_timestamps { 0 } else { send_start };
        let bytes = encode_frame(&outcome.message.into_frame(self.opts.device_id, header_ts))
            .map_err(|e| fail(Phase::Transmission, e))?;
        let conn = self.conn.as_mut().expect("checked above");
        self.next_clip_id += 1;
        if let Err(e) = self.opts.link.transmit(conn, &bytes) {
            self.conn = None;
            return Err(fail(Phase::Transmission, e));
        }
        r.bytes_sent = bytes.len() as u64;

        let reply = match read_frame(conn).and_then(|f| f.message()) {
            Ok(m) => m,
            Err(e) => {
                self.conn = None;
                return Err(fail(Phase::AwaitReply, describe_read_error(e)));
            }
        };
        self.opts.link.deliver();
        r.ack_received_us = Some(now_us());
        self.accept_reply(reply, clip_id, outcome.local, r)
    }

    fn accept_reply(&mut self, reply: Message, clip_id: u64, local: Option<ResultPayload>, r: &mut DeviceRunReport) -> Step<()> {
        let unexpected = |what: &str| fail(Phase::AwaitReply, format!("unexpected reply: {what}"));
        let decided = match (self.opts.config, reply) {
            (_, Message::Ack(ack)) if ack.status == AckStatus::Error => {
                return Err(fail(Phase::AwaitReply, format!("server rejected clip {}", ack.clip_id)));
            }
            (Configuration::A, Message::Ack(ack)) if ack.clip_id == clip_id => local.expect("config A decides locally"),
            (Configuration::B | Configuration::C, Message::Classification(c)) if c.clip_id == clip_id => c,
            (_, m) => {
                self.conn = None;
                return Err(unexpected(&format!("{:?}", m.msg_type())));
            }
        };
        r.class_index = Some(decided.class_index);
        r.confidence = Some(decided.confidence);
        Ok(())
    }
}

fn describe_read_error(e: ProtocolError) -> String {
    match e {
        ProtocolError::Io(io) if matches!(io.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
            "reply timeout".to_string()
        }
        other => other.to_string(),
    }
}
