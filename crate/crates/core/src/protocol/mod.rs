//! Length-prefixed framing for device/server traffic.
//!
//! Every frame is a fixed 21-byte header followed by the payload:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "USC1"
//!      4     1  msg_type (1 AUDIO, 2 FEATURES, 3 RESULT, 4 ACK, 5 CLASSIFICATION)
//!      5     4  device_id      u32 LE
//!      9     8  timestamp_us   u64 LE
//!     17     4  payload_len    u32 LE (at most 16 MiB)
//!     21     n  payload
//! ```

mod frame;
mod payload;

pub use frame::{encode_frame, read_frame, write_frame, Frame, FrameDecoder, MsgType};
pub use payload::{AckPayload, AckStatus, AudioPayload, FeaturesPayload, Message, ResultPayload};

pub const MAGIC: [u8; 4] = *b"USC1";
pub const HEADER_LEN: usize = 21;
pub const MAX_PAYLOAD: usize = 16 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("protocol violation: bad magic {0:02x?}")]
    BadMagic(Vec<u8>),
    #[error("protocol violation: unknown message type {0}")]
    UnknownType(u8),
    #[error("payload of {0} bytes exceeds the 16 MiB limit")]
    Oversize(usize),
    #[error("unexpected EOF")]
    UnexpectedEof,
    #[error("malformed payload: {0}")]
    Payload(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ProtocolError {
    /// Errors after which the byte stream can no longer be trusted and the
    /// connection must be closed.
    pub fn is_violation(&self) -> bool {
        matches!(self, ProtocolError::BadMagic(_) | ProtocolError::UnknownType(_) | ProtocolError::Oversize(_))
    }
}
