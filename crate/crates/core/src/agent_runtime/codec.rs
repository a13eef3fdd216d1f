//! Length-prefixed JSON frames: a 4-byte big-endian length, then the
//! message object with keys sorted at every level.

use std::io::{ErrorKind, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::BusError;

pub const MAX_FRAME_BYTES: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    pub topic: String,
    pub correlation_id: String,
    pub sender: String,
    /// Per `(sender, topic)` sequence number, assigned by the bus.
    pub seq: u64,
    pub payload: Value,
}

/// Canonical JSON body of a message (no length prefix).
pub fn encode_body(message: &Message) -> Vec<u8> {
    // round-tripping through Value sorts every object's keys
    let value = serde_json::to_value(message).expect("message is JSON-representable");
    serde_json::to_vec(&value).expect("value serializes")
}

pub fn encode_frame(message: &Message) -> Result<Vec<u8>, BusError> {
    let body = encode_body(message);
    if body.len() > MAX_FRAME_BYTES {
        return Err(BusError::FrameTooLarge(body.len()));
    }
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

fn decode_body(body: &[u8]) -> Result<Message, BusError> {
    serde_json::from_slice(body).map_err(|e| BusError::MalformedFrame(e.to_string()))
}

/// Decodes exactly one frame.
pub fn decode_frame(bytes: &[u8]) -> Result<Message, BusError> {
    let Some((head, body)) = bytes.split_first_chunk::<4>() else {
        return Err(BusError::MalformedFrame("frame shorter than its length prefix".into()));
    };
    let len = u32::from_be_bytes(*head) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(BusError::FrameTooLarge(len));
    }
    if body.len() != len {
        return Err(BusError::MalformedFrame(format!("length prefix says {len} bytes, got {}", body.len())));
    }
    decode_body(body)
}

pub fn write_frame<W: Write>(out: &mut W, message: &Message) -> Result<(), BusError> {
    out.write_all(&encode_frame(message)?)?;
    out.flush()?;
    Ok(())
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(input: &mut R) -> Result<Option<Message>, BusError> {
    let mut head = [0u8; 4];
    match input.read_exact(&mut head) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(head) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(BusError::FrameTooLarge(len));
    }
    let mut body = vec![0u8; len];
    input.read_exact(&mut body).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => BusError::MalformedFrame("stream ended inside a frame".into()),
        _ => e.into(),
    })?;
    decode_body(&body).map(Some)
}
