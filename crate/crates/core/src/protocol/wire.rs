//! Frame encoding and transcript capture.
//!
//! A frame on the wire is
//!
//! ```text
//! length      u32 LE   bytes that follow (15-byte header + payload)
//! session_id  u64 LE
//! pass_index  u16 LE
//! kind        u8
//! block_count u32 LE
//! payload     packed bits, bit i in byte i/8 at position i%8 (LSB first)
//! ```
//!
//! Payloads list parity bits in block order followed by any per-block values
//! (syndromes, `m` bits each with `S_1` first) in mismatched-block order.

use std::fmt;

use crate::{Error, Result};

pub const HEADER_LEN: usize = 8 + 2 + 1 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageKind {
    Parity = 0,
    Syndrome = 1,
    ParityReply = 2,
    SyndromeReply = 3,
}

impl MessageKind {
    pub fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            0 => MessageKind::Parity,
            1 => MessageKind::Syndrome,
            2 => MessageKind::ParityReply,
            3 => MessageKind::SyndromeReply,
            other => return Err(Error::Wire(format!("unknown message kind {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub session_id: u64,
    pub pass_index: u16,
    pub kind: MessageKind,
    pub block_count: u32,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let body_len = HEADER_LEN + self.payload.len();
        let mut out = Vec::with_capacity(4 + body_len);
        out.extend_from_slice(&(body_len as u32).to_le_bytes());
        out.extend_from_slice(&self.session_id.to_le_bytes());
        out.extend_from_slice(&self.pass_index.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.block_count.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 + HEADER_LEN {
            return Err(Error::Wire(format!(
                "frame too short: {} bytes",
                bytes.len()
            )));
        }
        let body_len = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        if body_len != bytes.len() - 4 {
            return Err(Error::Wire(format!(
                "length prefix {body_len} does not match {} body bytes",
                bytes.len() - 4
            )));
        }
        let b = &bytes[4..];
        Ok(Frame {
            session_id: u64::from_le_bytes(b[0..8].try_into().unwrap()),
            pass_index: u16::from_le_bytes(b[8..10].try_into().unwrap()),
            kind: MessageKind::from_byte(b[10])?,
            block_count: u32::from_le_bytes(b[11..15].try_into().unwrap()),
            payload: b[HEADER_LEN..].to_vec(),
        })
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader::new(&self.payload)
    }
}

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bit: u8) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit & 1 == 1 {
            *self.bytes.last_mut().unwrap() |= 1 << (self.len % 8);
        }
        self.len += 1;
    }

    /// Pushes the low `width` bits of `value`, least significant first.
    pub fn push_value(&mut self, value: u32, width: u32) {
        for i in 0..width {
            self.push(((value >> i) & 1) as u8);
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn read(&mut self) -> Result<u8> {
        let byte = self
            .bytes
            .get(self.pos / 8)
            .ok_or_else(|| Error::Wire(format!("payload exhausted at bit {}", self.pos)))?;
        let bit = (byte >> (self.pos % 8)) & 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_value(&mut self, width: u32) -> Result<u32> {
        let mut v = 0u32;
        for i in 0..width {
            v |= (self.read()? as u32) << i;
        }
        Ok(v)
    }

    pub fn read_bits(&mut self, count: usize) -> Result<Vec<u8>> {
        (0..count).map(|_| self.read()).collect()
    }
}

/// Captured frames of a session, one hex-encoded frame per line after a
/// single header line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub header: String,
    pub frames: Vec<Frame>,
}

impl Transcript {
    pub fn new(header: impl Into<String>, frames: Vec<Frame>) -> Self {
        Self {
            header: header.into(),
            frames,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| Error::Wire("transcript missing '# ' header line".into()))?
            .to_string();
        let frames = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let bytes =
                    hex::decode(l).map_err(|e| Error::Wire(format!("bad hex line: {e}")))?;
                Frame::decode(&bytes)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { header, frames })
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.header)?;
        for frame in &self.frames {
            writeln!(f, "{}", hex::encode(frame.encode()))?;
        }
        Ok(())
    }
}
