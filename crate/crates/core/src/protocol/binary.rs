//! One BINARY pass: block parities, then bisection of every mismatched block.
//!
//! Message `k` (for `k >= 1`) carries the sender's parity of the first half of
//! each active interval at bisection level `k`, preceded (for `k >= 2`) by the
//! sender's level `k - 1` parities so the other side can resolve that level
//! too. The receiver of message `k` resolves it and answers with message
//! `k + 1`. That is `1 + log2(N)` messages in all. The opening party is chosen
//! so the last message lands on Bob, who then knows the isolated bit and flips
//! it.
//!
//! Counting rule: one revealed bit per block parity and one per level per
//! mismatched block. The echoed counterpart parities describe the same subsets
//! and are not counted again.
//!
//! With privacy maintenance each revealed subset gives up its last bit. Block
//! ends and first-half ends are all distinct and each subset's discarded bit
//! lies outside every later subset, so the discards cancel the revealed
//! parities exactly.

use super::wire::{BitWriter, Frame, MessageKind};
use super::{agree, parity, Channel, KeyString, PassLedger, PassOutcome};
use crate::hamming::HammingParams;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    start: usize,
    len: usize,
}

struct BinaryParty {
    role: Role,
    bits: Vec<u8>,
    n: usize,
    blocks: usize,
    mismatched: usize,
    active: Vec<Interval>,
    pending: Vec<u8>,
    discards: Vec<usize>,
}

impl BinaryParty {
    fn new(role: Role, key: &KeyString, n: usize) -> Self {
        let blocks = key.len() / n;
        Self {
            role,
            bits: key.bits().to_vec(),
            n,
            blocks,
            mismatched: 0,
            active: Vec::new(),
            pending: Vec::new(),
            discards: Vec::new(),
        }
    }

    fn block_parities(&self) -> Vec<u8> {
        self.bits[..self.blocks * self.n]
            .chunks_exact(self.n)
            .map(parity)
            .collect()
    }

    fn start_bisection(&mut self, other: &[u8]) {
        let own = self.block_parities();
        self.active = own
            .iter()
            .zip(other)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| Interval {
                start: i * self.n,
                len: self.n,
            })
            .collect();
        self.mismatched = self.active.len();
    }

    /// Own first-half parities of the active intervals at the next level.
    fn level_parities(&mut self) -> Vec<u8> {
        self.active
            .iter()
            .map(|iv| {
                let half = iv.len / 2;
                self.discards.push(iv.start + half - 1);
                parity(&self.bits[iv.start..iv.start + half])
            })
            .collect()
    }

    fn resolve(&mut self, own: &[u8], other: &[u8]) {
        for (iv, (a, b)) in self.active.iter_mut().zip(own.iter().zip(other)) {
            let half = iv.len / 2;
            if a == b {
                iv.start += half;
            }
            iv.len = half;
        }
    }

    /// Every block parity was revealed, whether or not bisection followed.
    fn settle_block_discards(&mut self) {
        self.discards
            .extend((0..self.blocks).map(|i| (i + 1) * self.n - 1));
    }

    fn ledger(&self, params: HammingParams, pass: u16, messages: u32, pm: bool) -> PassLedger {
        let revealed = self.blocks + params.m() as usize * self.mismatched;
        PassLedger {
            pass_index: pass as u32,
            block_size: self.n,
            blocks: self.blocks,
            mismatched_blocks: self.mismatched,
            bits_revealed: revealed,
            bits_discarded: if pm { self.discards.len() } else { 0 },
            messages_sent: messages,
            carried: self.bits.len() - self.blocks * self.n,
        }
    }

    fn finish(mut self, pm: bool, generation: u32) -> (KeyString, Vec<usize>) {
        if !pm {
            let lengths = vec![self.n; self.blocks];
            return (KeyString::from_raw(self.bits, generation), lengths);
        }
        let mut drop = vec![false; self.bits.len()];
        for &d in &self.discards {
            drop[d] = true;
        }
        let mut lengths = Vec::with_capacity(self.blocks);
        let mut out = Vec::with_capacity(self.bits.len());
        for b in 0..self.blocks {
            let before = out.len();
            let range = b * self.n..(b + 1) * self.n;
            out.extend(range.filter(|&i| !drop[i]).map(|i| self.bits[i]));
            lengths.push(out.len() - before);
        }
        out.extend_from_slice(&self.bits[self.blocks * self.n..]);
        self.bits = out;
        (KeyString::from_raw(self.bits, generation), lengths)
    }
}

fn frame(
    channel: &Channel<'_>,
    pass: u16,
    kind: MessageKind,
    count: usize,
    parts: &[&[u8]],
) -> Frame {
    let mut w = BitWriter::new();
    for part in parts {
        part.iter().for_each(|&b| w.push(b));
    }
    Frame {
        session_id: channel.session_id(),
        pass_index: pass,
        kind,
        block_count: count as u32,
        payload: w.into_bytes(),
    }
}

pub(super) fn run(
    channel: &mut Channel<'_>,
    pass: u16,
    alice: &KeyString,
    bob: &KeyString,
    params: HammingParams,
    pm: bool,
) -> Result<PassOutcome> {
    let n = params.n();
    let levels = params.m() as usize;
    let mut a = BinaryParty::new(Role::Alice, alice, n);
    let mut b = BinaryParty::new(Role::Bob, bob, n);
    // Message `levels` is sent by the responder when `levels` is odd.
    let (opener, responder) = if levels % 2 == 1 {
        (&mut b, &mut a)
    } else {
        (&mut a, &mut b)
    };

    let opening_parities = opener.block_parities();
    let msg = channel.deliver(frame(
        channel,
        pass,
        MessageKind::Parity,
        opener.blocks,
        &[&opening_parities],
    ))?;
    let theirs = msg.reader().read_bits(msg.block_count as usize)?;
    responder.start_bisection(&theirs);

    if responder.mismatched > 0 {
        // Message 1: responder's block parities and level-1 parities.
        let own_blocks = responder.block_parities();
        let level1 = responder.level_parities();
        responder.pending = level1.clone();
        let mut incoming = channel.deliver(frame(
            channel,
            pass,
            MessageKind::ParityReply,
            responder.blocks,
            &[&own_blocks, &level1],
        ))?;

        let (mut receiver, mut sender) = (opener, responder);
        for level in 1..=levels {
            let mut r = incoming.reader();
            if level == 1 {
                let other_blocks = r.read_bits(incoming.block_count as usize)?;
                receiver.start_bisection(&other_blocks);
            } else {
                let echo = r.read_bits(receiver.active.len())?;
                let pending = std::mem::take(&mut receiver.pending);
                receiver.resolve(&pending, &echo);
            }
            let other_level = r.read_bits(receiver.active.len())?;
            let own_level = receiver.level_parities();
            receiver.resolve(&own_level, &other_level);

            if level == levels {
                debug_assert_eq!(receiver.role, Role::Bob);
                for iv in &receiver.active {
                    debug_assert_eq!(iv.len, 1);
                    receiver.bits[iv.start] ^= 1;
                }
                break;
            }
            let next = receiver.level_parities();
            receiver.pending = next.clone();
            incoming = channel.deliver(frame(
                channel,
                pass,
                MessageKind::ParityReply,
                receiver.active.len(),
                &[&own_level, &next],
            ))?;
            std::mem::swap(&mut receiver, &mut sender);
        }
    }

    a.settle_block_discards();
    b.settle_block_discards();
    let messages = channel.delivered();
    let alice_ledger = a.ledger(params, pass, messages, pm);
    let bob_ledger = b.ledger(params, pass, messages, pm);
    agree(&alice_ledger, &bob_ledger)?;
    let (alice_out, lengths) = a.finish(pm, alice.generation() + 1);
    let (bob_out, _) = b.finish(pm, bob.generation() + 1);
    Ok(PassOutcome {
        alice: alice_out,
        bob: bob_out,
        ledger: alice_ledger,
        block_lengths: lengths,
    })
}
