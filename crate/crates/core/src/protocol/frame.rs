use std::io::{self, Read, Write};

use super::{ProtocolError, HEADER_LEN, MAGIC, MAX_PAYLOAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[repr(u8)]
pub enum MsgType {
    Audio = 1,
    Features = 2,
    Result = 3,
    Ack = 4,
    Classification = 5,
}

impl MsgType {
    pub const ALL: [MsgType; 5] =
        [MsgType::Audio, MsgType::Features, MsgType::Result, MsgType::Ack, MsgType::Classification];
}

impl TryFrom<u8> for MsgType {
    type Error = ProtocolError;

    fn try_from(v: u8) -> Result<Self, ProtocolError> {
        Ok(match v {
            1 => MsgType::Audio,
            2 => MsgType::Features,
            3 => MsgType::Result,
            4 => MsgType::Ack,
            5 => MsgType::Classification,
            other => return Err(ProtocolError::UnknownType(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub device_id: u32,
    pub timestamp_us: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, device_id: u32, timestamp_us: u64, payload: Vec<u8>) -> Self {
        Self { msg_type, device_id, timestamp_us, payload }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, ProtocolError> {
    if frame.payload.len() > MAX_PAYLOAD {
        return Err(ProtocolError::Oversize(frame.payload.len()));
    }
    let mut out = Vec::with_capacity(frame.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.push(frame.msg_type as u8);
    out.extend_from_slice(&frame.device_id.to_le_bytes());
    out.extend_from_slice(&frame.timestamp_us.to_le_bytes());
    out.extend_from_slice(&(frame.payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&frame.payload);
    Ok(out)
}

/// Writes one frame; returns the number of bytes put on the wire.
pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<usize, ProtocolError> {
    let bytes = encode_frame(frame)?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(bytes.len())
}

struct Header {
    msg_type: MsgType,
    device_id: u32,
    timestamp_us: u64,
    payload_len: usize,
}

fn parse_header(h: &[u8; HEADER_LEN]) -> Result<Header, ProtocolError> {
    if h[..4] != MAGIC {
        return Err(ProtocolError::BadMagic(h[..4].to_vec()));
    }
    let msg_type = MsgType::try_from(h[4])?;
    let device_id = u32::from_le_bytes(h[5..9].try_into().expect("4 bytes"));
    let timestamp_us = u64::from_le_bytes(h[9..17].try_into().expect("8 bytes"));
    let payload_len = u32::from_le_bytes(h[17..21].try_into().expect("4 bytes")) as usize;
    if payload_len > MAX_PAYLOAD {
        return Err(ProtocolError::Oversize(payload_len));
    }
    Ok(Header { msg_type, device_id, timestamp_us, payload_len })
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), ProtocolError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => ProtocolError::UnexpectedEof,
        _ => ProtocolError::Io(e),
    })
}

/// Reads exactly one frame. The magic is checked before anything past the
/// first four bytes is consumed, and nothing beyond `payload_len` is read.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Frame, ProtocolError> {
    let mut header = [0u8; HEADER_LEN];
    read_exact_or_eof(r, &mut header[..4])?;
    if header[..4] != MAGIC {
        return Err(ProtocolError::BadMagic(header[..4].to_vec()));
    }
    read_exact_or_eof(r, &mut header[4..])?;
    let h = parse_header(&header)?;
    let mut payload = vec![0u8; h.payload_len];
    read_exact_or_eof(r, &mut payload)?;
    Ok(Frame { msg_type: h.msg_type, device_id: h.device_id, timestamp_us: h.timestamp_us, payload })
}

/// Push-style decoder for callers that receive bytes in arbitrary pieces.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes received but not yet returned as part of a frame.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next complete frame, `Ok(None)` if more bytes are needed.
    pub fn next_frame(&mut self) -> Result<Option<Frame>, ProtocolError> {
        let prefix = self.buf.len().min(4);
        if self.buf[..prefix] != MAGIC[..prefix] {
            return Err(ProtocolError::BadMagic(self.buf[..prefix].to_vec()));
        }
        if self.buf.len() < HEADER_LEN {
            if self.buf.len() > 4 {
                MsgType::try_from(self.buf[4])?;
            }
            return Ok(None);
        }
        let header: [u8; HEADER_LEN] = self.buf[..HEADER_LEN].try_into().expect("header length");
        let h = parse_header(&header)?;
        let total = HEADER_LEN + h.payload_len;
        if self.buf.len() < total {
            return Ok(None);
        }
        let payload = self.buf[HEADER_LEN..total].to_vec();
        self.buf.drain(..total);
        Ok(Some(Frame { msg_type: h.msg_type, device_id: h.device_id, timestamp_us: h.timestamp_us, payload }))
    }

    /// Call at end of stream: leftover bytes mean a truncated frame.
    pub fn finish(&self) -> Result<(), ProtocolError> {
        if self.buf.is_empty() { Ok(()) } else { Err(ProtocolError::UnexpectedEof) }
    }
}
