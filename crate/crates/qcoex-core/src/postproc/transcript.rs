//! Classical-channel transcript: the ordered messages both parties exchange
//! during post-processing, with a fixed binary serialization so independent
//! implementations can replay each other's sessions.
//!
//! Wire layout (all integers little-endian):
//!
//! ```text
//! magic "QPPT" (4) | version u16 | reserved u16 | message count u32
//! per message: kind u8 | payload length u32 | payload bytes
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub const MAGIC: &[u8; 4] = b"QPPT";
pub const VERSION: u16 = 1;

/// Message kinds used by the pipeline.
pub mod kind {
    pub const WINNOW_INIT: u8 = 1;
    pub const PARITIES_A: u8 = 2;
    pub const MISMATCH_B: u8 = 3;
    pub const SYNDROMES_A: u8 = 4;
    pub const AUTH_TAG_A: u8 = 5;
    pub const AUTH_TAG_B: u8 = 6;
    pub const PA_SPEC: u8 = 7;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub kind: u8,
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    messages: Vec<Message>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TranscriptError {
    Malformed(String),
}

impl fmt::Display for TranscriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TranscriptError::Malformed(msg) => write!(f, "malformed transcript: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TranscriptError {}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, kind: u8, payload: Vec<u8>) {
        self.messages.push(Message { kind, payload });
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(self.messages.len() as u32).to_le_bytes());
        for msg in &self.messages {
            out.push(msg.kind);
            out.extend_from_slice(&(msg.payload.len() as u32).to_le_bytes());
            out.extend_from_slice(&msg.payload);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Transcript, TranscriptError> {
        let fail = |msg: &str| TranscriptError::Malformed(format!("{msg}"));
        if bytes.len() < 12 {
            return Err(fail("truncated header"));
        }
        if &bytes[0..4] != MAGIC {
            return Err(fail("bad magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(TranscriptError::Malformed(format!(
                "unsupported version {version}"
            )));
        }
        let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut messages = Vec::with_capacity(count);
        let mut at = 12usize;
        for _ in 0..count {
            if at + 5 > bytes.len() {
                return Err(fail("truncated message header"));
            }
            let kind = bytes[at];
            let len = u32::from_le_bytes(bytes[at + 1..at + 5].try_into().unwrap()) as usize;
            at += 5;
            if at + len > bytes.len() {
                return Err(fail("truncated message payload"));
            }
            messages.push(Message { kind, payload: bytes[at..at + len].to_vec() });
            at += len;
        }
        if at != bytes.len() {
            return Err(fail("trailing bytes"));
        }
        Ok(Transcript { messages })
    }
}
