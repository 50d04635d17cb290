//! Two-party reconciliation sessions.
//!
//! Alice holds the reference key; Bob flips bits to match her. Each party is a
//! separate state machine that only sees its own key and the frames it
//! receives over an in-memory channel. Both keep their own [`PassLedger`] and
//! the driver checks the two agree after every pass.

mod binary;
mod shuffle;
mod winnow;
pub mod wire;

use std::fmt;

pub use shuffle::{shuffle, ShufflePlan};
pub use wire::{Frame, MessageKind, Transcript};

use crate::hamming::HammingParams;
use crate::{Error, Result};

/// One party's copy of the key being reconciled.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeyString {
    bits: Vec<u8>,
    generation: u32,
}

impl KeyString {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some((index, &value)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(Error::InvalidBit { index, value });
        }
        Ok(Self {
            bits,
            generation: 0,
        })
    }

    pub(crate) fn from_raw(bits: Vec<u8>, generation: u32) -> Self {
        Self { bits, generation }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of passes this key has been through.
    pub fn generation(&self) -> u32 {
        self.generation
    }

    /// Positions where the two keys differ. Lengths must match.
    pub fn differing_positions(&self, other: &KeyString) -> Vec<usize> {
        self.bits
            .iter()
            .zip(&other.bits)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn error_count(&self, other: &KeyString) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl fmt::Display for KeyString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Winnow,
    Binary,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolKind::Winnow => f.write_str("winnow"),
            ProtocolKind::Binary => f.write_str("binary"),
        }
    }
}

/// Communications one pass needs.
///
/// Winnow: the parity message, plus the syndrome reply if any block mismatched.
/// BINARY: the parity message, then one message per bisection level.
pub fn communications_per_pass(
    kind: ProtocolKind,
    params: HammingParams,
    any_mismatch: bool,
) -> u32 {
    match (kind, any_mismatch) {
        (_, false) => 1,
        (ProtocolKind::Winnow, true) => 2,
        (ProtocolKind::Binary, true) => 1 + params.m(),
    }
}

/// Accounting for one pass, as seen by one party.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PassLedger {
    pub pass_index: u32,
    pub block_size: usize,
    pub blocks: usize,
    pub mismatched_blocks: usize,
    /// Parity and syndrome bits made public, one per revealed subset.
    pub bits_revealed: usize,
    pub bits_discarded: usize,
    pub messages_sent: u32,
    /// Trailing bits shorter than one block, carried through untouched.
    pub carried: usize,
}

impl PassLedger {
    /// Revealed bits not yet paid for by a discard; they must come out of
    /// privacy amplification instead.
    pub fn deferred_bits(&self) -> usize {
        self.bits_revealed.saturating_sub(self.bits_discarded)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LeakLedger {
    pub passes: Vec<PassLedger>,
}

impl LeakLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, pass: PassLedger) {
        self.passes.push(pass);
    }

    pub fn total_revealed(&self) -> usize {
        self.passes.iter().map(|p| p.bits_revealed).sum()
    }

    pub fn total_discarded(&self) -> usize {
        self.passes.iter().map(|p| p.bits_discarded).sum()
    }

    pub fn total_deferred(&self) -> usize {
        self.passes.iter().map(|p| p.deferred_bits()).sum()
    }

    pub fn total_messages(&self) -> u64 {
        self.passes.iter().map(|p| p.messages_sent as u64).sum()
    }
}

/// Both keys after a pass, the agreed ledger entry and the length each block
/// kept, in block order. Carried remainder bits follow the last block.
#[derive(Debug, Clone, PartialEq)]
pub struct PassOutcome {
    pub alice: KeyString,
    pub bob: KeyString,
    pub ledger: PassLedger,
    pub block_lengths: Vec<usize>,
}

/// A reconciliation session: frames are numbered by pass and optionally
/// captured into a transcript.
#[derive(Debug, Clone)]
pub struct Session {
    id: u64,
    next_pass: u16,
    capture: Option<Vec<Frame>>,
}

impl Session {
    pub fn new(id: u64) -> Self {
        Self {
            id,
            next_pass: 0,
            capture: None,
        }
    }

    /// Session that records every frame it carries.
    pub fn capturing(id: u64) -> Self {
        Self {
            capture: Some(Vec::new()),
            ..Self::new(id)
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn frames(&self) -> &[Frame] {
        self.capture.as_deref().unwrap_or(&[])
    }

    pub fn transcript(&self, header: impl Into<String>) -> Transcript {
        Transcript::new(header, self.frames().to_vec())
    }

    pub fn winnow_pass(
        &mut self,
        alice: &KeyString,
        bob: &KeyString,
        params: HammingParams,
    ) -> Result<PassOutcome> {
        check_pair(alice, bob)?;
        let pass = self.bump_pass();
        let mut channel = Channel::new(self);
        winnow::run(&mut channel, pass, alice, bob, params)
    }

    pub fn binary_pass(
        &mut self,
        alice: &KeyString,
        bob: &KeyString,
        params: HammingParams,
        privacy_maintenance: bool,
    ) -> Result<PassOutcome> {
        check_pair(alice, bob)?;
        let pass = self.bump_pass();
        let mut channel = Channel::new(self);
        binary::run(&mut channel, pass, alice, bob, params, privacy_maintenance)
    }

    fn bump_pass(&mut self) -> u16 {
        let p = self.next_pass;
        self.next_pass = self.next_pass.wrapping_add(1);
        p
    }
}

/// Reliable in-order delivery between the two parties of one session. Every
/// frame is serialized and parsed back, so the parties only ever see what the
/// wire format carries.
pub(crate) struct Channel<'s> {
    session: &'s mut Session,
    delivered: u32,
}

impl<'s> Channel<'s> {
    fn new(session: &'s mut Session) -> Self {
        Self {
            session,
            delivered: 0,
        }
    }

    pub(crate) fn session_id(&self) -> u64 {
        self.session.id
    }

    pub(crate) fn deliver(&mut self, frame: Frame) -> Result<Frame> {
        let bytes = frame.encode();
        let received = Frame::decode(&bytes)?;
        if let Some(log) = self.session.capture.as_mut() {
            log.push(frame);
        }
        self.delivered += 1;
        Ok(received)
    }

    pub(crate) fn delivered(&self) -> u32 {
        self.delivered
    }
}

fn check_pair(alice: &KeyString, bob: &KeyString) -> Result<()> {
    if alice.len() != bob.len() {
        return Err(Error::ProtocolAbort(format!(
            "key length mismatch: alice {} bits, bob {} bits",
            alice.len(),
            bob.len()
        )));
    }
    Ok(())
}

/// One Winnow pass on a fresh session, appending the agreed entry to `ledger`.
pub fn winnow_pass(
    alice: &KeyString,
    bob: &KeyString,
    params: HammingParams,
    ledger: &mut LeakLedger,
) -> Result<(KeyString, KeyString)> {
    let mut session = Session::new(0);
    session.next_pass = ledger.passes.len() as u16;
    let mut out = session.winnow_pass(alice, bob, params)?;
    out.ledger.pass_index = ledger.passes.len() as u32;
    ledger.push(out.ledger);
    Ok((out.alice, out.bob))
}

/// One BINARY pass on a fresh session, appending the agreed entry to `ledger`.
pub fn binary_pass(
    alice: &KeyString,
    bob: &KeyString,
    params: HammingParams,
    ledger: &mut LeakLedger,
    privacy_maintenance: bool,
) -> Result<(KeyString, KeyString)> {
    let mut session = Session::new(0);
    session.next_pass = ledger.passes.len() as u16;
    let mut out = session.binary_pass(alice, bob, params, privacy_maintenance)?;
    out.ledger.pass_index = ledger.passes.len() as u32;
    ledger.push(out.ledger);
    Ok((out.alice, out.bob))
}

pub(crate) fn parity(bits: &[u8]) -> u8 {
    bits.iter().fold(0, |acc, b| acc ^ b)
}

pub(crate) fn agree(a: &PassLedger, b: &PassLedger) -> Result<()> {
    if a != b {
        return Err(Error::InvariantViolation(format!(
            "party ledgers disagree: {a:?} vs {b:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn communication_counts() {
        let p128 = HammingParams::from_block_size(128).unwrap();
        let p8 = HammingParams::from_block_size(8).unwrap();
        assert_eq!(communications_per_pass(ProtocolKind::Winnow, p128, true), 2);
        assert_eq!(communications_per_pass(ProtocolKind::Binary, p8, true), 4);
        assert_eq!(communications_per_pass(ProtocolKind::Winnow, p8, false), 1);
    }

    #[test]
    fn key_rejects_non_binary() {
        assert!(KeyString::new(vec![0, 1, 3]).is_err());
        let a = KeyString::new(vec![0, 1, 1, 0]).unwrap();
        let b = KeyString::new(vec![0, 0, 1, 1]).unwrap();
        assert_eq!(a.differing_positions(&b), vec![1, 3]);
        assert_eq!(a.to_string(), "0110");
    }

    #[test]
    fn length_mismatch_aborts() {
        let a = KeyString::new(vec![0; 16]).unwrap();
        let b = KeyString::new(vec![0; 15]).unwrap();
        let params = HammingParams::new(3).unwrap();
        let mut ledger = LeakLedger::new();
        assert!(matches!(
            winnow_pass(&a, &b, params, &mut ledger),
            Err(Error::ProtocolAbort(_))
        ));
        assert!(matches!(
            binary_pass(&a, &b, params, &mut ledger, true),
            Err(Error::ProtocolAbort(_))
        ));
        assert!(ledger.passes.is_empty());
    }
}
