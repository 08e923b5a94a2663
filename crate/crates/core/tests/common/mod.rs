//! Reference implementations written independently of the library code,
//! shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use usc_core::classifier::{loss_and_gradients, Dense, MlpModel, Standardizer};
use usc_core::dsp::fft::Fft;
use usc_core::dsp::{chromagram, dct2_matrix, mfcc, stft, tonnetz, AudioClip, Window};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use usc_core::protocol::{encode_frame, read_frame, Frame, FrameDecoder, MsgType, HEADER_LEN, MAGIC};

/// O(n^2) DFT straight from the definition.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * t % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Orthonormal DCT-II by direct summation.
pub fn naive_dct(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI / n * (i as f64 + 0.5) * k as f64).cos())
                .sum();
            s * if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() }
        })
        .collect()
}

pub fn random_signal(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Largest deviation between FFT and naive DFT, relative to the largest
/// DFT magnitude.
pub fn fft_vs_dft_error(n: usize, seed: u64) -> f64 {
    let x = random_signal(n, seed);
    let reference = naive_dft(&x);
    let mut fast = x.clone();
    Fft::new(n).unwrap().process(&mut fast);
    let scale = reference.iter().map(|c| c.norm()).fold(0.0, f64::max);
    fast.iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale
}

/// |sum |x|^2 - sum |X|^2 / n| relative to the time-domain energy.
pub fn parseval_error(n: usize, seed: u64) -> f64 {
    let x = random_signal(n, seed);
    let mut spectrum = x.clone();
    Fft::new(n).unwrap().process(&mut spectrum);
    let time: f64 = x.iter().map(|c| c.norm_sqr()).sum();
    let freq: f64 = spectrum.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
    (time - freq).abs() / time
}

/// max |D D^T - I| for the DCT matrix used by the MFCC stage.
pub fn dct_orthonormality_error(n: usize) -> f64 {
    let d = dct2_matrix(n);
    let g = d.dot(&d.t());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[[i, j]] - target).abs());
        }
    }
    worst
}

pub fn sine(freq: f64, sr: u32, n: usize, amp: f64) -> AudioClip {
    let s = (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(sr)).sin()).collect();
    AudioClip::new(s, sr).unwrap()
}

/// Pitch class with the largest time-averaged chroma for a pure tone.
pub fn chroma_argmax(freq: f64) -> usize {
    let sr = 22050;
    let spec = stft(&sine(freq, sr, sr as usize, 0.5), 2048, 512, Window::Hann).unwrap();
    let chroma = chromagram(&spec, sr);
    let mean = chroma.mean_axis(ndarray::Axis(0)).unwrap();
    (0..12).max_by(|&a, &b| mean[a].total_cmp(&mean[b])).unwrap()
}

/// A constant log-mel frame has all its energy in the first cepstral
/// coefficient: c0 = sqrt(n) ln(v + eps), every other coefficient zero.
pub fn mfcc_constant_frame_error(value: f64) -> f64 {
    let n = 128;
    let mel = Array2::from_elem((3, n), value);
    let c = mfcc(&mel, 40).unwrap();
    let log = (value + 1e-10).ln();
    let mut worst: f64 = 0.0;
    for row in c.rows() {
        worst = worst.max((row[0] - (n as f64).sqrt() * log).abs() / log.abs().max(1.0));
        for &v in row.iter().skip(1) {
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Uniform chroma sits at the centre of every circle: all six tonnetz
/// coordinates vanish.
pub fn tonnetz_uniform_error() -> f64 {
    let chroma = Array2::from_elem((4, 12), 0.7);
    tonnetz(&chroma).iter().map(|v| v.abs()).fold(0.0, f64::max)
}

fn small_model(seed: u64) -> MlpModel {
    MlpModel::init_with_dims(&[4, 3, 3, 2], vec!["a".into(), "b".into()], seed).unwrap()
}

fn with_param(model: &MlpModel, layer: usize, is_bias: bool, index: usize, delta: f64) -> MlpModel {
    let mut layers: Vec<Dense> = model.layers().to_vec();
    if is_bias {
        layers[layer].biases[index] += delta;
    } else {
        let cols = layers[layer].weights.ncols();
        layers[layer].weights[[index / cols, index % cols]] += delta;
    }
    MlpModel::from_parts(layers, Standardizer::identity(4), model.labels().to_vec()).unwrap()
}

/// Largest relative error between backpropagated gradients and central
/// finite differences of the loss, on a 4-3-3-2 network with random
/// weights, biases, inputs and labels.
pub fn gradient_check(seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x9e37_79b9);
    let base = small_model(seed);
    let mut layers = base.layers().to_vec();
    for l in &mut layers {
        l.biases.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    let model = MlpModel::from_parts(layers, Standardizer::identity(4), base.labels().to_vec()).unwrap();
    let rows = 6;
    let x = Array2::from_shape_fn((rows, 4), |_| rng.random_range(-2.0..2.0));
    let y = Array2::from_shape_fn((rows, 2), |(r, c)| if (r + seed as usize) % 2 == c { 1.0 } else { 0.0 });
    let (_, grads) = loss_and_gradients(&model, &x, &y);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for layer in 0..3 {
        let n_w = model.layers()[layer].weights.len();
        let n_b = model.layers()[layer].biases.len();
        let cols = model.layers()[layer].weights.ncols();
        for (is_bias, count) in [(false, n_w), (true, n_b)] {
            for i in 0..count {
                let plus = loss_and_gradients(&with_param(&model, layer, is_bias, i, h), &x, &y).0;
                let minus = loss_and_gradients(&with_param(&model, layer, is_bias, i, -h), &x, &y).0;
                let numeric = (plus - minus) / (2.0 * h);
                let analytic =
                    if is_bias { grads.biases[layer][i] } else { grads.weights[layer][[i / cols, i % cols]] };
                let denom = (analytic.abs() + numeric.abs()).max(1e-8);
                worst = worst.max((analytic - numeric).abs() / denom);
            }
        }
    }
    worst
}

/// Scalar forward pass: standardize, two tanh layers, softmax.
pub fn naive_forward(model: &MlpModel, x: &[f64]) -> Vec<f64> {
    let st = model.standardizer();
    let mut a: Vec<f64> = x.iter().enumerate().map(|(i, v)| (v - st.mean[i]) / st.std[i]).collect();
    for (li, layer) in model.layers().iter().enumerate() {
        let mut z = vec![0.0; layer.weights.ncols()];
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = layer.biases[j];
            for (i, ai) in a.iter().enumerate() {
                *zj += ai * layer.weights[[i, j]];
            }
        }
        a = if li < 2 { z.iter().map(|v| v.tanh()).collect() } else { z };
    }
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Hand-assembled wire bytes for one frame of every message type, with
/// device 7 and timestamp 0x0102030405060708.
pub fn golden_frames() -> Vec<(Frame, Vec<u8>)> {
    fn header(t: u8, len: u8) -> Vec<u8> {
        let mut h = b"USC1".to_vec();
        h.push(t);
        h.extend([7, 0, 0, 0]);
        h.extend([8, 7, 6, 5, 4, 3, 2, 1]);
        h.extend([len, 0, 0, 0]);
        h
    }
    let ts = 0x0102_0304_0506_0708;
    let cases: [(MsgType, u8, Vec<u8>); 5] = [
        // 16000 Hz, mono, 16-bit, samples [1, -2]
        (MsgType::Audio, 1, vec![0x80, 0x3e, 0, 0, 1, 16, 1, 0, 0xfe, 0xff]),
        // dim 2, [1.0, -0.5]
        (MsgType::Features, 2, vec![2, 0, 0, 0, 0x80, 0x3f, 0, 0, 0, 0xbf]),
        // class 8, confidence 0.75, clip 42
        (MsgType::Result, 3, vec![8, 0, 0, 0x40, 0x3f, 42, 0, 0, 0, 0, 0, 0, 0]),
        // OK, clip 42
        (MsgType::Ack, 4, vec![0, 42, 0, 0, 0, 0, 0, 0, 0]),
        // class 3, confidence 1.0, clip 1
        (MsgType::Classification, 5, vec![3, 0, 0, 0x80, 0x3f, 1, 0, 0, 0, 0, 0, 0, 0]),
    ];
    cases
        .into_iter()
        .map(|(t, code, payload)| {
            let mut bytes = header(code, payload.len() as u8);
            bytes.extend(&payload);
            (Frame::new(t, 7, ts, payload), bytes)
        })
        .collect()
}

pub fn arb_msg_type() -> impl Strategy<Value = MsgType> {
    prop::sample::select(MsgType::ALL.to_vec())
}

pub fn arb_frame() -> impl Strategy<Value = Frame> {
    (arb_msg_type(), any::<u32>(), any::<u64>(), prop::collection::vec(any::<u8>(), 0..600))
        .prop_map(|(t, d, ts, p)| Frame::new(t, d, ts, p))
}

/// Encode, then decode through both the blocking reader and the push
/// decoder.
pub fn check_round_trip(frame: &Frame) -> Result<(), TestCaseError> {
    let bytes = encode_frame(frame).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(bytes.len(), HEADER_LEN + frame.payload.len());
    let mut cursor = std::io::Cursor::new(&bytes);
    let back = read_frame(&mut cursor).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&back, frame);
    prop_assert_eq!(cursor.position() as usize, bytes.len());
    let mut dec = FrameDecoder::new();
    dec.push(&bytes);
    let decoded = dec.next_frame().ok().flatten();
    prop_assert_eq!(decoded.as_ref(), Some(frame));
    prop_assert_eq!(dec.buffered(), 0);
    Ok(())
}

/// Concatenated frames split at arbitrary points decode to the same
/// sequence.
pub fn check_fragmentation(frames: &[Frame], cuts: &[usize]) -> Result<(), TestCaseError> {
    let mut stream = Vec::new();
    for f in frames {
        stream.extend(encode_frame(f).map_err(|e| TestCaseError::fail(e.to_string()))?);
    }
    let mut points: Vec<usize> = cuts.iter().map(|c| c % (stream.len() + 1)).collect();
    points.push(0);
    points.push(stream.len());
    points.sort_unstable();
    let mut dec = FrameDecoder::new();
    let mut out = Vec::new();
    for w in points.windows(2) {
        dec.push(&stream[w[0]..w[1]]);
        while let Some(f) = dec.next_frame().map_err(|e| TestCaseError::fail(e.to_string()))? {
            out.push(f);
        }
    }
    prop_assert_eq!(out.as_slice(), frames);
    prop_assert!(dec.finish().is_ok());
    Ok(())
}

/// Arbitrary bytes never panic either decoder, and a stream whose first
/// bytes disagree with the magic is rejected before anything else.
pub fn check_garbage(bytes: &[u8]) -> Result<(), TestCaseError> {
    let mut dec = FrameDecoder::new();
    dec.push(bytes);
    let mut decoded = 0;
    while let Ok(Some(_)) = dec.next_frame() {
        decoded += 1;
    }
    let prefix = bytes.len().min(4);
    if bytes[..prefix] != MAGIC[..prefix] {
        prop_assert_eq!(decoded, 0);
        let mut fresh = FrameDecoder::new();
        fresh.push(bytes);
        prop_assert!(fresh.next_frame().is_err());
    }
    let mut cursor = std::io::Cursor::new(bytes);
    if let Ok(f) = read_frame(&mut cursor) {
        prop_assert_eq!(cursor.position() as usize, f.encoded_len());
    }
    Ok(())
}

/// Starts a paused server, lets `clients` raw connections each pipeline
/// `per_client` FEATURES frames, then resumes and returns the processing
/// log once everything has been handled. The server's results go to
/// `store`.
pub fn saturated_run(
    model: std::sync::Arc<MlpModel>,
    store: Box<dyn usc_core::server::ResultSink>,
    clients: usize,
    per_client: usize,
) -> Result<Vec<usc_core::server::ProcessingEvent>, String> {
    use std::io::Write;
    use std::time::{Duration, Instant};
    use usc_core::protocol::{write_frame, FeaturesPayload, Message};
    use usc_core::server::{serve, ServerOptions};

    let opts = ServerOptions { keep_processing_log: true, start_paused: true, ..ServerOptions::default() };
    let server = serve("127.0.0.1:0", model, store, opts).map_err(|e| e.to_string())?;
    let features = Message::Features(FeaturesPayload { values: vec![0.25; usc_core::FEATURE_DIM] });
    let mut streams = Vec::new();
    for c in 0..clients {
        let mut s = std::net::TcpStream::connect(server.local_addr()).map_err(|e| e.to_string())?;
        for i in 0..per_client {
            write_frame(&mut s, &features.into_frame(100 + c as u32, i as u64)).map_err(|e| e.to_string())?;
        }
        s.flush().map_err(|e| e.to_string())?;
        streams.push(s);
    }
    let total = clients * per_client;
    if !server.wait_queued(total, Duration::from_secs(20)) {
        return Err(format!("only {} of {total} frames queued", server.queued()));
    }
    server.resume();
    let deadline = Instant::now() + Duration::from_secs(60);
    while server.processed() < total as u64 {
        if Instant::now() > deadline {
            return Err(format!("processed {} of {total}", server.processed()));
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let log = server.processing_log();
    server.shutdown();
    drop(streams);
    Ok(log)
}

/// With every connection backlogged, each consecutive window of
/// `clients` turns serves every connection exactly once.
pub fn check_strict_rounds(log: &[usc_core::server::ProcessingEvent], clients: usize) -> Result<(), String> {
    for (r, round) in log.chunks(clients).enumerate() {
        let ids: std::collections::HashSet<u64> = round.iter().map(|e| e.conn_id).collect();
        if ids.len() != round.len() {
            return Err(format!("round {r} repeats a connection: {:?}", round.iter().map(|e| e.conn_id).collect::<Vec<_>>()));
        }
    }
    Ok(())
}

/// Published power (mW), runtime (s) and mean latency at 4 and 12 devices (ms).
pub fn published_metrics() -> Vec<usc_core::bench::ConfigMetrics> {
    use usc_core::Configuration::{A, B, C};
    [(A, 1852.00, 57.77, 0.6, 5.4), (B, 1830.54, 16.42, 9.7, 300.7), (C, 1786.86, 53.02, 1.7, 5.5)]
        .into_iter()
        .map(|(config, power_mw, runtime_s, latency_small_ms, latency_large_ms)| usc_core::bench::ConfigMetrics {
            config,
            power_mw,
            runtime_s,
            latency_small_ms,
            latency_large_ms,
        })
        .collect()
}

/// Per-configuration means over the successful runs of single-device
/// probes.
#[derive(Debug, Clone, Copy)]
pub struct ProbeMeans {
    pub runtime_s: f64,
    pub recording_s: f64,
    pub power_mw: f64,
    pub runs: usize,
}

/// Runs interleaved single-device probes of A, B and C with pacing off on
/// one loopback server and returns their means in A, B, C order.
pub fn probe_means(model_path: &std::path::Path, iterations: usize, compute_scale: f64) -> Result<[ProbeMeans; 3], String> {
    use usc_core::bench::{estimate_energy, probe_configs, FleetSpec, PowerModel};
    use usc_core::device::LocalModel;
    use usc_core::server::{serve, MemoryStore, ServerOptions};
    use usc_core::Configuration;

    let model = usc_core::classifier::load_model(model_path).map_err(|e| e.to_string())?;
    let server = serve("127.0.0.1:0", std::sync::Arc::new(model), Box::new(MemoryStore::default()), ServerOptions::default())
        .map_err(|e| e.to_string())?;
    let specs: Vec<FleetSpec> = Configuration::ALL
        .iter()
        .map(|&c| {
            let mut s = FleetSpec::new(1, c);
            s.iterations = iterations;
            s.device_compute_scale = compute_scale;
            s.pacing = false;
            s
        })
        .collect();
    let runs = probe_configs(&specs, server.local_addr(), Some(LocalModel::File(model_path.to_path_buf())))
        .map_err(|e| e.to_string())?;
    let pm = PowerModel::default();
    let mut out = [ProbeMeans { runtime_s: 0.0, recording_s: 0.0, power_mw: 0.0, runs: 0 }; 3];
    for (slot, run) in out.iter_mut().zip(&runs) {
        let ok: Vec<_> = run.samples.iter().map(|s| &s.report).filter(|r| r.succeeded()).collect();
        if ok.is_empty() {
            return Err(format!("no successful {} probes: {:?}", run.spec.config, run.failures));
        }
        let n = ok.len() as f64;
        let bw = run.spec.network.bandwidth();
        slot.runs = ok.len();
        slot.runtime_s = ok.iter().map(|r| r.total_runtime_s).sum::<f64>() / n;
        slot.recording_s = ok.iter().map(|r| r.recording_phase_s).sum::<f64>() / n;
        let mut power = 0.0;
        for r in &ok {
            power += estimate_energy(r, &pm, bw).map_err(|e| e.to_string())?;
        }
        slot.power_mw = power / n;
    }
    Ok(out)
}
