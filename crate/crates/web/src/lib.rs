//! WebAssembly bindings for the demo page in `www/`. Every export takes and
//! returns JSON text; the plain functions underneath are usable natively.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use usc_core::bench::{score_configs, transmit_time, ConfigMetrics, LatencyCriterion, PowerModel, ScoreCard};
use usc_core::device::synth_clip;
use usc_core::dsp::wav::decode_wav;
use usc_core::dsp::{AudioClip, FrameFeatures};
use usc_core::protocol::{AudioPayload, HEADER_LEN};
use usc_core::{Configuration, CLASS_LABELS, FEATURE_DIM};

/// Longest clip the page will analyze, to keep the tab responsive.
const MAX_SECONDS: f64 = 30.0;

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub sample_rate: u32,
    pub seconds: f64,
    pub frames: usize,
    /// log10 mel power, frames x 128, scaled to [0, 1] for display.
    pub mel_image: Vec<Vec<f32>>,
    pub chroma: Vec<f64>,
    pub contrast: Vec<f64>,
    pub tonnetz: Vec<f64>,
    pub mfcc: Vec<f64>,
    pub feature_vector: Vec<f64>,
}

fn analyze(clip: &AudioClip) -> Result<Analysis, String> {
    let seconds = clip.len() as f64 / f64::from(clip.sample_rate());
    if seconds > MAX_SECONDS {
        return Err(format!("clip is {seconds:.1} s long; the demo accepts at most {MAX_SECONDS} s"));
    }
    let ff = FrameFeatures::compute(clip).map_err(|e| e.to_string())?;
    let fv = ff.aggregate().map_err(|e| e.to_string())?;
    let logs = ff.mel.mapv(|v| (v + 1e-10).log10());
    let (lo, hi) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = (hi - lo).max(1e-9);
    let mel_image = logs.rows().into_iter().map(|r| r.iter().map(|v| ((v - lo) / span) as f32).collect()).collect();
    let values = fv.into_values();
    Ok(Analysis {
        sample_rate: clip.sample_rate(),
        seconds,
        frames: ff.mel.nrows(),
        mel_image,
        mfcc: values[..40].to_vec(),
        chroma: values[40..52].to_vec(),
        contrast: values[180..187].to_vec(),
        tonnetz: values[187..FEATURE_DIM].to_vec(),
        feature_vector: values,
    })
}

/// Features of a generated clip of `class` (name or index).
pub fn analyze_synth(class: &str, seconds: f64, seed: u64) -> Result<Analysis, String> {
    let idx = class
        .parse::<usize>()
        .ok()
        .filter(|&i| i < CLASS_LABELS.len())
        .or_else(|| CLASS_LABELS.iter().position(|l| *l == class))
        .ok_or_else(|| format!("unknown class `{class}`"))?;
    if !(seconds > 0.0 && seconds <= MAX_SECONDS) {
        return Err(format!("duration must be in (0, {MAX_SECONDS}] s"));
    }
    analyze(&synth_clip(idx, seconds, 16000, seed).map_err(|e| e.to_string())?)
}

/// Features of an uploaded WAV file.
pub fn analyze_wav(bytes: &[u8]) -> Result<Analysis, String> {
    analyze(&decode_wav(bytes).map_err(|e| e.to_string())?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerQuery {
    #[serde(default)]
    pub power: PowerModel,
    pub clip_seconds: f64,
    pub sample_rate: u32,
    pub bandwidth_bytes_per_s: f64,
    /// Device compute seconds for A, B and C.
    pub compute_s: [f64; 3],
}

#[derive(Debug, Serialize)]
pub struct PowerRow {
    pub config: Configuration,
    pub bytes: u64,
    pub transmit_s: f64,
    pub total_s: f64,
    pub avg_power_mw: f64,
    pub energy_j: f64,
}

fn wire_bytes(config: Configuration, clip_seconds: f64, sample_rate: u32) -> u64 {
    let payload = match config {
        Configuration::A => 13,
        Configuration::B => AudioPayload::HEADER_LEN as u64 + 2 * (clip_seconds * f64::from(sample_rate)).round() as u64,
        Configuration::C => 2 + 4 * FEATURE_DIM as u64,
    };
    HEADER_LEN as u64 + payload
}

/// Average power of one run per configuration: recording for the clip
/// length, device compute, then the upload.
pub fn explore_power(q: &PowerQuery) -> Result<Vec<PowerRow>, String> {
    if !(q.clip_seconds > 0.0) || q.sample_rate == 0 || !(q.bandwidth_bytes_per_s > 0.0) {
        return Err("clip length, sample rate and bandwidth must be positive".into());
    }
    Configuration::ALL
        .iter()
        .zip(q.compute_s)
        .map(|(&config, compute)| {
            let bytes = wire_bytes(config, q.clip_seconds, q.sample_rate);
            let transmit_s = transmit_time(bytes, Some(q.bandwidth_bytes_per_s));
            let total_s = q.clip_seconds + compute + transmit_s;
            let avg = q.power.average_mw(total_s, compute, transmit_s).map_err(|e| e.to_string())?;
            Ok(PowerRow { config, bytes, transmit_s, total_s, avg_power_mw: avg, energy_j: avg * total_s / 1000.0 })
        })
        .collect()
}

#[derive(Debug, Deserialize)]
pub struct ScoreQuery {
    pub metrics: Vec<ConfigMetrics>,
    #[serde(default)]
    pub criterion: LatencyCriterion,
}

pub fn score(q: &ScoreQuery) -> Result<ScoreCard, String> {
    score_configs(&q.metrics, q.criterion).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e)).and_then(|v| serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string())))
}

fn from_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("bad request: {e}"))
}

#[wasm_bindgen(js_name = analyzeSynth)]
pub fn analyze_synth_js(class: &str, seconds: f64, seed: u32) -> Result<String, JsError> {
    to_json(analyze_synth(class, seconds, u64::from(seed)))
}

#[wasm_bindgen(js_name = analyzeWav)]
pub fn analyze_wav_js(bytes: &[u8]) -> Result<String, JsError> {
    to_json(analyze_wav(bytes))
}

#[wasm_bindgen(js_name = explorePower)]
pub fn explore_power_js(query: &str) -> Result<String, JsError> {
    to_json(from_json(query).and_then(|q: PowerQuery| explore_power(&q)))
}

#[wasm_bindgen(js_name = scoreConfigs)]
pub fn score_js(query: &str) -> Result<String, JsError> {
    to_json(from_json(query).and_then(|q: ScoreQuery| score(&q)))
}

#[wasm_bindgen(js_name = classLabels)]
pub fn class_labels() -> String {
    serde_json::to_string(&CLASS_LABELS).expect("labels serialize")
}
