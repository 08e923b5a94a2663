use super::{Frame, MsgType, ProtocolError};
use crate::dsp::FEATURE_DIM;

fn malformed(msg: impl Into<String>) -> ProtocolError {
    ProtocolError::Payload(msg.into())
}

/// Raw PCM as sent in configuration B: `u32 sample_rate, u8 channels,
/// u8 bit_depth`, then i16 LE samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioPayload {
    pub sample_rate: u32,
    pub pcm: Vec<i16>,
}

impl AudioPayload {
    pub const HEADER_LEN: usize = 6;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::HEADER_LEN + self.pcm.len() * 2);
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.push(1);
        out.push(16);
        for s in &self.pcm {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn decode(b: &[u8]) -> Result<Self, ProtocolError> {
        if b.len() < Self::HEADER_LEN {
            return Err(malformed("audio header too short"));
        }
        let sample_rate = u32::from_le_bytes(b[0..4].try_into().expect("4 bytes"));
        let (channels, bit_depth) = (b[4], b[5]);
        if channels != 1 || bit_depth != 16 {
            return Err(malformed(format!("audio must be mono 16-bit, got {channels} ch {bit_depth} bit")));
        }
        if sample_rate == 0 {
            return Err(malformed("audio sample rate is zero"));
        }
        let data = &b[Self::HEADER_LEN..];
        if !data.len().is_multiple_of(2) {
            return Err(malformed("odd PCM byte count"));
        }
        let pcm = data.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
        Ok(Self { sample_rate, pcm })
    }
}

/// Feature map as sent in configuration C: `u16 dim`, then f32 LE values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturesPayload {
    pub values: Vec<f32>,
}

impl FeaturesPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + self.values.len() * 4);
        out.extend_from_slice(&(self.values.len() as u16).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the framing only; see [`FeaturesPayload::validate`].
    pub fn decode(b: &[u8]) -> Result<Self, ProtocolError> {
        if b.len() < 2 {
            return Err(malformed("features header too short"));
        }
        let dim = u16::from_le_bytes([b[0], b[1]]) as usize;
        if b.len() != 2 + dim * 4 {
            return Err(malformed(format!("features declare {dim} values but carry {} bytes", b.len() - 2)));
        }
        let values = b[2..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Ok(Self { values })
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.values.len() != FEATURE_DIM {
            return Err(malformed(format!("feature dim {} != {FEATURE_DIM}", self.values.len())));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(malformed(format!("feature {i} is not finite")));
        }
        Ok(())
    }
}

/// Class decision: `u8 class_index, f32 confidence, u64 clip_id`. Used for
/// RESULT (device to server) and CLASSIFICATION (server to device).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultPayload {
    pub class_index: u8,
    pub confidence: f32,
    pub clip_id: u64,
}

impl ResultPayload {
    pub const LEN: usize = 13;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.push(self.class_index);
        out.extend_from_slice(&self.confidence.to_le_bytes());
        out.extend_from_slice(&self.clip_id.to_le_bytes());
        out
    }

    pub fn decode(b: &[u8]) -> Result<Self, ProtocolError> {
        if b.len() != Self::LEN {
            return Err(malformed(format!("result payload is {} bytes, expected 13", b.len())));
        }
        let p = Self {
            class_index: b[0],
            confidence: f32::from_le_bytes(b[1..5].try_into().expect("4 bytes")),
            clip_id: u64::from_le_bytes(b[5..13].try_into().expect("8 bytes")),
        };
        if usize::from(p.class_index) >= crate::classifier::NUM_CLASSES {
            return Err(malformed(format!("class index {} out of range", p.class_index)));
        }
        if !(0.0..=1.0).contains(&p.confidence) {
            return Err(malformed(format!("confidence {} outside [0, 1]", p.confidence)));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[repr(u8)]
pub enum AckStatus {
    Ok = 0,
    Error = 1,
}

/// `u8 status, u64 clip_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckPayload {
    pub status: AckStatus,
    pub clip_id: u64,
}

impl AckPayload {
    pub const LEN: usize = 9;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.push(self.status as u8);
        out.extend_from_slice(&self.clip_id.to_le_bytes());
        out
    }

    pub fn decode(b: &[u8]) -> Result<Self, ProtocolError> {
        if b.len() != Self::LEN {
            return Err(malformed(format!("ack payload is {} bytes, expected 9", b.len())));
        }
        let status = match b[0] {
            0 => AckStatus::Ok,
            1 => AckStatus::Error,
            s => return Err(malformed(format!("ack status {s}"))),
        };
        Ok(Self { status, clip_id: u64::from_le_bytes(b[1..9].try_into().expect("8 bytes")) })
    }
}

/// A frame payload decoded according to its message type.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Audio(AudioPayload),
    Features(FeaturesPayload),
    Result(ResultPayload),
    Ack(AckPayload),
    Classification(ResultPayload),
}

impl Message {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Message::Audio(_) => MsgType::Audio,
            Message::Features(_) => MsgType::Features,
            Message::Result(_) => MsgType::Result,
            Message::Ack(_) => MsgType::Ack,
            Message::Classification(_) => MsgType::Classification,
        }
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        match self {
            Message::Audio(p) => p.encode(),
            Message::Features(p) => p.encode(),
            Message::Result(p) | Message::Classification(p) => p.encode(),
            Message::Ack(p) => p.encode(),
        }
    }

    pub fn into_frame(&self, device_id: u32, timestamp_us: u64) -> Frame {
        Frame::new(self.msg_type(), device_id, timestamp_us, self.encode_payload())
    }
}

impl Frame {
    pub fn message(&self) -> Result<Message, ProtocolError> {
        let b = &self.payload;
        Ok(match self.msg_type {
            MsgType::Audio => Message::Audio(AudioPayload::decode(b)?),
            MsgType::Features => Message::Features(FeaturesPayload::decode(b)?),
            MsgType::Result => Message::Result(ResultPayload::decode(b)?),
            MsgType::Ack => Message::Ack(AckPayload::decode(b)?),
            MsgType::Classification => Message::Classification(ResultPayload::decode(b)?),
        })
    }
}
