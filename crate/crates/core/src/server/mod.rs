//! The server role: connection readers feed per-connection queues, and a
//! single scheduler thread serves them round-robin, persisting results
//! before replying.

mod handler;
mod scheduler;
mod store;

pub use handler::{error_reply, handle_message, Handled, Inbound};
pub use scheduler::RoundRobin;
pub use store::{read_records, JsonlStore, MemoryStore, ResultRecord, ResultSink};

use std::collections::{HashMap, HashSet};
use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::classifier::{MlpModel, NUM_CLASSES};
use crate::device::now_us;
use crate::dsp::FEATURE_DIM;
use crate::protocol::{write_frame, Frame, FrameDecoder, MsgType};

pub const DEFAULT_PORT: u16 = 7071;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("model maps {inputs} inputs to {outputs} classes; expected {FEATURE_DIM} to {NUM_CLASSES}")]
    ModelShape { inputs: usize, outputs: usize },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// One scheduler turn, recorded when the processing log is enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingEvent {
    pub seq: u64,
    pub conn_id: u64,
    pub device_id: u32,
    pub msg_type: MsgType,
    /// Connections with queued frames when this turn began, in ring order.
    pub backlog: Vec<u64>,
    pub ts_us: u64,
    /// Receipt to reply.
    pub latency_us: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    pub keep_processing_log: bool,
    /// Hold the scheduler until `ServerHandle::resume`.
    pub start_paused: bool,
    /// Write 0 instead of the clock into reply headers and stored records.
    pub zero_timestamps: bool,
}

struct Queued {
    frame: Frame,
    received_us: u64,
}

struct Conn {
    writer: TcpStream,
    next_clip_id: u64,
    closing: bool,
}

#[derive(Default)]
struct State {
    rr: RoundRobin<u64, Queued>,
    conns: HashMap<u64, Conn>,
    paused: bool,
    shutdown: bool,
}

struct Shared {
    state: Mutex<State>,
    wake: Condvar,
    log: Mutex<Vec<ProcessingEvent>>,
    keep_log: bool,
    zero_timestamps: bool,
    processed: AtomicU64,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// A running server. Dropping the handle shuts it down.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

/// Binds and starts serving in background threads.
pub fn serve(
    addr: impl ToSocketAddrs + std::fmt::Debug,
    model: Arc<MlpModel>,
    sink: Box<dyn ResultSink>,
    options: ServerOptions,
) -> Result<ServerHandle, ServerError> {
    if model.input_dim() != FEATURE_DIM || model.output_dim() != NUM_CLASSES {
        return Err(ServerError::ModelShape { inputs: model.input_dim(), outputs: model.output_dim() });
    }
    let listener = TcpListener::bind(&addr).map_err(|source| ServerError::Bind { addr: format!("{addr:?}"), source })?;
    let local = listener.local_addr()?;
    let shared = Arc::new(Shared {
        state: Mutex::new(State { paused: options.start_paused, ..State::default() }),
        wake: Condvar::new(),
        log: Mutex::new(Vec::new()),
        keep_log: options.keep_processing_log,
        zero_timestamps: options.zero_timestamps,
        processed: AtomicU64::new(0),
    });
    let stop = Arc::new(AtomicBool::new(false));
    log::info!("listening on {local}");

    let scheduler = {
        let shared = Arc::clone(&shared);
        thread::Builder::new().name("scheduler".into()).spawn(move || scheduler_loop(&shared, &model, sink))?
    };
    let acceptor = {
        let shared = Arc::clone(&shared);
        let stop = Arc::clone(&stop);
        thread::Builder::new().name("acceptor".into()).spawn(move || accept_loop(listener, &shared, &stop))?
    };
    Ok(ServerHandle { addr: local, shared, stop, threads: vec![scheduler, acceptor] })
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn pause(&self) {
        self.shared.lock().paused = true;
    }

    pub fn resume(&self) {
        self.shared.lock().paused = false;
        self.shared.wake.notify_all();
    }

    /// Frames received but not yet processed.
    pub fn queued(&self) -> usize {
        self.shared.lock().rr.total_queued()
    }

    pub fn processed(&self) -> u64 {
        self.shared.processed.load(Ordering::SeqCst)
    }

    /// Blocks until `queued()` reaches `n` or `timeout` passes.
    pub fn wait_queued(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while Instant::now() < deadline {
            if self.queued() >= n {
                return true;
            }
            thread::sleep(Duration::from_millis(2));
        }
        self.queued() >= n
    }

    pub fn processing_log(&self) -> Vec<ProcessingEvent> {
        self.shared.log.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Blocks the caller for as long as the server runs.
    pub fn join(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        if self.threads.is_empty() {
            return;
        }
        self.stop.store(true, Ordering::SeqCst);
        {
            let mut st = self.shared.lock();
            st.shutdown = true;
            for conn in st.conns.values() {
                let _ = conn.writer.shutdown(Shutdown::Both);
            }
        }
        self.shared.wake.notify_all();
        // Unblock accept().
        let _ = TcpStream::connect(self.addr);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

fn accept_loop(listener: TcpListener, shared: &Arc<Shared>, stop: &AtomicBool) {
    let mut next_conn = 0u64;
    let mut readers = Vec::new();
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let conn_id = next_conn;
        next_conn += 1;
        let Ok(writer) = stream.try_clone() else { continue };
        let _ = stream.set_nodelay(true);
        {
            let mut st = shared.lock();
            st.rr.add(conn_id);
            st.conns.insert(conn_id, Conn { writer, next_clip_id: 0, closing: false });
        }
        log::debug!("connection {conn_id} from {:?}", stream.peer_addr().ok());
        let shared = Arc::clone(shared);
        match thread::Builder::new().name(format!("reader-{conn_id}")).spawn(move || read_loop(stream, conn_id, &shared)) {
            Ok(h) => readers.push(h),
            Err(e) => log::error!("cannot spawn reader: {e}"),
        }
        readers.retain(|h: &JoinHandle<()>| !h.is_finished());
    }
    for h in readers {
        let _ = h.join();
    }
}

fn read_loop(mut stream: TcpStream, conn_id: u64, shared: &Shared) {
    let mut decoder = FrameDecoder::new();
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => {
                log::debug!("connection {conn_id}: read error {e}");
                break;
            }
        };
        decoder.push(&buf[..n]);
        let mut violated = false;
        loop {
            match decoder.next_frame() {
                Ok(Some(frame)) => {
                    let mut st = shared.lock();
                    if st.conns.contains_key(&conn_id) {
                        st.rr.push(conn_id, Queued { frame, received_us: now_us() });
                    }
                    drop(st);
                    shared.wake.notify_all();
                }
                Ok(None) => break,
                Err(e) => {
                    log::warn!("connection {conn_id}: {e}; closing");
                    violated = true;
                    break;
                }
            }
        }
        if violated {
            let _ = stream.shutdown(Shutdown::Both);
            break;
        }
    }
    let mut st = shared.lock();
    if st.rr.queue_len(conn_id) == 0 {
        st.rr.remove(conn_id);
        st.conns.remove(&conn_id);
    } else if let Some(c) = st.conns.get_mut(&conn_id) {
        c.closing = true;
    }
}

fn scheduler_loop(shared: &Shared, model: &MlpModel, mut sink: Box<dyn ResultSink>) {
    let mut seq = 0u64;
    loop {
        let mut st = shared.lock();
        let (conn_id, item, backlog, clip_id, mut writer) = loop {
            if st.shutdown {
                return;
            }
            if !st.paused {
                let backlog = st.rr.backlogged();
                if let Some((conn_id, item)) = st.rr.pop_next() {
                    let conn = st.conns.get_mut(&conn_id).expect("queued connections are registered");
                    let clip_id = conn.next_clip_id;
                    if matches!(item.frame.msg_type, MsgType::Audio | MsgType::Features) {
                        conn.next_clip_id += 1;
                    }
                    let writer = conn.writer.try_clone();
                    if conn.closing && st.rr.queue_len(conn_id) == 0 {
                        st.rr.remove(conn_id);
                        st.conns.remove(&conn_id);
                    }
                    break (conn_id, item, backlog, clip_id, writer);
                }
            }
            st = shared.wake.wait(st).unwrap_or_else(|p| p.into_inner());
        };
        drop(st);

        let frame = &item.frame;
        let mut handled = handle_message(Inbound { frame, clip_id, received_us: item.received_us }, model);
        if shared.zero_timestamps {
            handled.reply.timestamp_us = 0;
            if let Some(r) = handled.record.as_mut() {
                r.server_receive_ts_us = 0;
            }
        }
        let reply = match &handled.record {
            Some(record) => match sink.store(record) {
                Ok(()) => handled.reply,
                Err(e) => {
                    log::error!("storing result for device {} failed: {e}", frame.device_id);
                    let mut reply = error_reply(frame.device_id, record.clip_id);
                    if shared.zero_timestamps {
                        reply.timestamp_us = 0;
                    }
                    reply
                }
            },
            None => handled.reply,
        };
        if let Ok(w) = writer.as_mut() {
            if let Err(e) = write_frame(w, &reply).map_err(io::Error::other).and_then(|_| w.flush()) {
                log::debug!("connection {conn_id}: reply failed: {e}");
            }
        }
        let done = now_us();
        let latency_us = done.saturating_sub(item.received_us);
        log::info!(
            "ts={done} device={} msg_type={:?} latency_us={latency_us}",
            frame.device_id,
            frame.msg_type
        );
        if shared.keep_log {
            shared.log.lock().unwrap_or_else(|p| p.into_inner()).push(ProcessingEvent {
                seq,
                conn_id,
                device_id: frame.device_id,
                msg_type: frame.msg_type,
                backlog,
                ts_us: done,
                latency_us,
            });
        }
        seq += 1;
        shared.processed.fetch_add(1, Ordering::SeqCst);
    }
}

/// Checks round-robin fairness over a processing log: within every stretch
/// of turns where the same set of connections stays backlogged, their
/// processed counts differ by at most one.
pub fn check_fairness(log: &[ProcessingEvent]) -> Result<(), String> {
    let mut start = 0;
    while start < log.len() {
        let set: HashSet<u64> = log[start].backlog.iter().copied().collect();
        let mut end = start;
        while end < log.len() && log[end].backlog.iter().copied().collect::<HashSet<_>>() == set {
            end += 1;
        }
        let mut counts: HashMap<u64, usize> = set.iter().map(|k| (*k, 0)).collect();
        for ev in &log[start..end] {
            *counts.entry(ev.conn_id).or_default() += 1;
        }
        let lo = counts.values().min().copied().unwrap_or(0);
        let hi = counts.values().max().copied().unwrap_or(0);
        if hi > lo + 1 {
            return Err(format!("turns {start}..{end}: counts {counts:?} over backlog {set:?}"));
        }
        start = end.max(start + 1);
    }
    Ok(())
}
