//! Minimal RIFF/WAVE codec: PCM format 1, 16-bit little-endian, mono.

use std::fs;
use std::path::Path;

use super::{AudioClip, DspError};

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, DspError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DspError::Io(format!("{}: {e}", path.display())))?;
    decode_wav(&bytes)
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), DspError> {
    fs::write(path, encode_wav(clip))?;
    Ok(())
}

pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let pcm = clip.to_pcm16();
    let data_len = (pcm.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + pcm.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in pcm {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, DspError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(DspError::Unsupported("not a RIFF/WAVE file".into()));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.checked_add(len).filter(|&e| e <= bytes.len());
        match id {
            b"fmt " => {
                let end = end.ok_or_else(|| DspError::Unsupported("truncated fmt chunk".into()))?;
                if end - body < 16 {
                    return Err(DspError::Unsupported("fmt chunk too small".into()));
                }
                format = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => {
                let (code, channels, rate, bits) = format
                    .ok_or_else(|| DspError::Unsupported("data chunk before fmt chunk".into()))?;
                if code != 1 {
                    return Err(DspError::Unsupported(format!(
                        "WAV format code {code}; only PCM (1) is accepted"
                    )));
                }
                if channels != 1 {
                    return Err(DspError::Unsupported(format!(
                        "{channels} channels; only mono is accepted"
                    )));
                }
                if bits != 16 {
                    return Err(DspError::Unsupported(format!(
                        "{bits}-bit samples; only 16-bit is accepted"
                    )));
                }
                // Tolerate a data length that overstates the file (common in
                // streamed recordings) by reading what is present.
                let end = end.unwrap_or(bytes.len());
                let pcm: Vec<i16> = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]))
                    .collect();
                return AudioClip::from_pcm16(&pcm, rate);
            }
            _ => {}
        }
        pos = body + len + (len & 1);
    }
    Err(DspError::Unsupported("no data chunk".into()))
}
