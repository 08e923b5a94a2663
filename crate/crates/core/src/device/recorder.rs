//! Chunked clip acquisition emulating a microphone read loop.

use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use crate::dsp::{resample, wav, AudioClip, DspError};

use super::synth_clip;

/// Samples per read; 4096 bytes of 16-bit mono audio.
pub const CHUNK_SAMPLES: usize = 2048;
/// Native rate of the emulated microphone.
pub const RECORDER_SAMPLE_RATE: u32 = 16000;

#[derive(Debug, Clone, PartialEq)]
pub enum ClipSource {
    Wav(PathBuf),
    Synth { class_id: usize, seed: u64 },
    /// Pre-generated audio, replayed through the chunk loop.
    Buffer(AudioClip),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub clip: AudioClip,
    pub chunks: usize,
}

fn source_audio(source: &ClipSource, duration_s: f64, sr: u32) -> Result<AudioClip, DspError> {
    let clip = match source {
        ClipSource::Wav(path) => wav::read_wav(path)?,
        ClipSource::Synth { class_id, seed } => synth_clip(*class_id, duration_s, sr, *seed)?,
        ClipSource::Buffer(clip) => clip.clone(),
    };
    if clip.is_empty() {
        return Err(DspError::EmptyInput);
    }
    if clip.sample_rate() == sr { Ok(clip) } else { resample(&clip, sr) }
}

/// Reads `duration_s` of audio at `sr` in 2048-sample chunks, each quantized
/// to 16-bit PCM. With `pacing`, every chunk is released no earlier than
/// its real-time position.
pub fn acquire_clip(source: &ClipSource, duration_s: f64, sr: u32, pacing: bool) -> Result<Recording, DspError> {
    if !(duration_s > 0.0) || sr == 0 {
        return Err(DspError::InvalidParameter("duration and sample rate must be positive".into()));
    }
    let audio = source_audio(source, duration_s, sr)?;
    let want = ((duration_s * f64::from(sr)).round() as usize).min(audio.len());
    let start = Instant::now();
    let mut pcm: Vec<i16> = Vec::with_capacity(want);
    let mut chunks = 0;
    for chunk in audio.samples()[..want].chunks(CHUNK_SAMPLES) {
        if pacing {
            let due = Duration::from_secs_f64((pcm.len() + chunk.len()) as f64 / f64::from(sr));
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                thread::sleep(wait);
            }
        }
        pcm.extend(chunk.iter().map(|&s| (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16));
        chunks += 1;
    }
    Ok(Recording { clip: AudioClip::from_pcm16(&pcm, sr)?, chunks })
}
