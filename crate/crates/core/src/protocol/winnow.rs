//! One Winnow pass.
//!
//! Round structure:
//! 1. Bob -> Alice, `Parity`: Bob's parity of every N-bit block.
//! 2. Alice -> Bob, `SyndromeReply` (only if some block mismatched): Alice's
//!    block parities, then her syndromes over positions `1..n_h` of each
//!    mismatched block. Silence means every block agreed.
//!
//! Bob flips position `S_a xor S_b` of each mismatched block when it is
//! nonzero. Both parties then drop index 0 of every block (paying for the
//! parity bit) and the `{2^j}` positions of mismatched blocks (paying for the
//! syndrome). A mismatch with zero syndrome difference means the error sat in
//! index 0, so dropping it already corrected the block.

use super::wire::{BitWriter, Frame, MessageKind};
use super::{agree, parity, Channel, KeyString, PassLedger, PassOutcome};
use crate::hamming::{syndrome_of, HammingParams};
use crate::Result;

struct Party<'k> {
    bits: &'k [u8],
    params: HammingParams,
}

impl<'k> Party<'k> {
    fn blocks(&self) -> impl Iterator<Item = &'k [u8]> + '_ {
        self.bits.chunks_exact(self.params.n())
    }

    fn block_count(&self) -> usize {
        self.bits.len() / self.params.n()
    }

    fn parities(&self) -> Vec<u8> {
        self.blocks().map(parity).collect()
    }
}

fn ledger_for(
    params: HammingParams,
    pass: u16,
    key_len: usize,
    mismatched: usize,
    messages: u32,
) -> PassLedger {
    let blocks = key_len / params.n();
    let revealed = blocks + params.m() as usize * mismatched;
    PassLedger {
        pass_index: pass as u32,
        block_size: params.n(),
        blocks,
        mismatched_blocks: mismatched,
        bits_revealed: revealed,
        bits_discarded: revealed,
        messages_sent: messages,
        carried: key_len % params.n(),
    }
}

/// Drops index 0 of every block and the `{2^j}` positions of flagged blocks,
/// then appends the carried remainder.
fn privacy_maintenance(
    bits: &[u8],
    params: HammingParams,
    flagged: &[bool],
) -> (Vec<u8>, Vec<usize>) {
    let n = params.n();
    let mut out = Vec::with_capacity(bits.len());
    let mut lengths = Vec::with_capacity(flagged.len());
    for (block, &flag) in bits.chunks_exact(n).zip(flagged) {
        let before = out.len();
        out.extend(
            block
                .iter()
                .enumerate()
                .skip(1)
                .filter(|(j, _)| !(flag && j.is_power_of_two()))
                .map(|(_, &b)| b),
        );
        lengths.push(out.len() - before);
    }
    out.extend_from_slice(&bits[flagged.len() * n..]);
    (out, lengths)
}

pub(super) fn run(
    channel: &mut Channel<'_>,
    pass: u16,
    alice: &KeyString,
    bob: &KeyString,
    params: HammingParams,
) -> Result<PassOutcome> {
    let m = params.m();
    let session_id = channel.session_id();
    let bob_party = Party {
        bits: bob.bits(),
        params,
    };
    let alice_party = Party {
        bits: alice.bits(),
        params,
    };
    let blocks = bob_party.block_count();

    // Bob opens with his parities.
    let bob_parities = bob_party.parities();
    let mut w = BitWriter::new();
    bob_parities.iter().for_each(|&p| w.push(p));
    let opening = channel.deliver(Frame {
        session_id,
        pass_index: pass,
        kind: MessageKind::Parity,
        block_count: blocks as u32,
        payload: w.into_bytes(),
    })?;

    // Alice compares and answers with syndromes for mismatched blocks.
    let received_bob = opening.reader().read_bits(opening.block_count as usize)?;
    let alice_parities = alice_party.parities();
    let alice_flags: Vec<bool> = alice_parities
        .iter()
        .zip(&received_bob)
        .map(|(a, b)| a != b)
        .collect();
    let alice_mismatched = alice_flags.iter().filter(|&&f| f).count();
    let reply = if alice_mismatched > 0 {
        let mut w = BitWriter::new();
        alice_parities.iter().for_each(|&p| w.push(p));
        for (block, _) in alice_party.blocks().zip(&alice_flags).filter(|(_, &f)| f) {
            w.push_value(syndrome_of(&block[1..]), m);
        }
        Some(channel.deliver(Frame {
            session_id,
            pass_index: pass,
            kind: MessageKind::SyndromeReply,
            block_count: blocks as u32,
            payload: w.into_bytes(),
        })?)
    } else {
        None
    };
    let alice_ledger = ledger_for(
        params,
        pass,
        alice.len(),
        alice_mismatched,
        channel.delivered(),
    );
    let (alice_out, alice_lengths) = privacy_maintenance(alice.bits(), params, &alice_flags);

    // Bob corrects.
    let mut bob_bits = bob.bits().to_vec();
    let mut bob_flags = vec![false; blocks];
    if let Some(frame) = &reply {
        let mut r = frame.reader();
        let alice_par = r.read_bits(frame.block_count as usize)?;
        for (flag, (a, b)) in bob_flags
            .iter_mut()
            .zip(alice_par.iter().zip(&bob_parities))
        {
            *flag = a != b;
        }
        let n = params.n();
        for (idx, _) in bob_flags.iter().enumerate().filter(|(_, &f)| f) {
            let s_a = r.read_value(m)?;
            let block = &mut bob_bits[idx * n..(idx + 1) * n];
            let s_d = s_a ^ syndrome_of(&block[1..]);
            if s_d != 0 {
                block[s_d as usize] ^= 1;
            }
        }
    }
    let bob_mismatched = bob_flags.iter().filter(|&&f| f).count();
    let bob_ledger = ledger_for(params, pass, bob.len(), bob_mismatched, channel.delivered());
    let (bob_out, _) = privacy_maintenance(&bob_bits, params, &bob_flags);

    agree(&alice_ledger, &bob_ledger)?;
    Ok(PassOutcome {
        alice: KeyString::from_raw(alice_out, alice.generation() + 1),
        bob: KeyString::from_raw(bob_out, bob.generation() + 1),
        ledger: alice_ledger,
        block_lengths: alice_lengths,
    })
}

#[cfg(test)]
mod tests {
    use crate::hamming::HammingParams;
    use crate::protocol::{winnow_pass, KeyString, LeakLedger, Session};

    fn key_with_errors(len: usize, positions: &[usize]) -> (KeyString, KeyString) {
        let alice: Vec<u8> = (0..len).map(|i| ((i * 5 + i / 7) % 2) as u8).collect();
        let mut bob = alice.clone();
        for &p in positions {
            bob[p] ^= 1;
        }
        (KeyString::new(alice).unwrap(), KeyString::new(bob).unwrap())
    }

    #[test]
    fn zero_error_key_of_80_bits() {
        let params = HammingParams::new(3).unwrap();
        let (a, b) = key_with_errors(80, &[]);
        let mut ledger = LeakLedger::new();
        let (a2, b2) = winnow_pass(&a, &b, params, &mut ledger).unwrap();
        assert_eq!(a2.len(), 70);
        assert_eq!(a2, b2);
        let entry = &ledger.passes[0];
        assert_eq!(
            (
                entry.blocks,
                entry.bits_revealed,
                entry.bits_discarded,
                entry.messages_sent
            ),
            (10, 10, 10, 1)
        );
        assert_eq!(a2.generation(), 1);
    }

    #[test]
    fn single_error_every_position_every_block_size() {
        for params in HammingParams::all() {
            let n = params.n();
            for pos in 0..n {
                let (a, b) = key_with_errors(n, &[pos]);
                let mut ledger = LeakLedger::new();
                let (a2, b2) = winnow_pass(&a, &b, params, &mut ledger).unwrap();
                assert_eq!(a2, b2, "N={n} pos={pos}");
                assert_eq!(a2.len(), n - 1 - params.m() as usize);
                assert_eq!(ledger.passes[0].messages_sent, 2);
            }
        }
    }

    #[test]
    fn even_errors_skip_hamming() {
        let params = HammingParams::new(3).unwrap();
        let (a, b) = key_with_errors(8, &[2, 6]);
        let mut ledger = LeakLedger::new();
        let (a2, b2) = winnow_pass(&a, &b, params, &mut ledger).unwrap();
        assert_eq!(a2.len(), 7);
        assert_eq!(a2.error_count(&b2), 2);
        assert_eq!(ledger.passes[0].mismatched_blocks, 0);
        assert_eq!(ledger.passes[0].messages_sent, 1);
    }

    #[test]
    fn remainder_is_carried() {
        let params = HammingParams::new(3).unwrap();
        let (a, b) = key_with_errors(19, &[17]);
        let mut ledger = LeakLedger::new();
        let (a2, b2) = winnow_pass(&a, &b, params, &mut ledger).unwrap();
        assert_eq!(a2.len(), 2 * 7 + 3);
        assert_eq!(&a2.bits()[14..], &a.bits()[16..]);
        assert_eq!(a2.error_count(&b2), 1);
        assert_eq!(ledger.passes[0].carried, 3);
    }

    #[test]
    fn transcript_shape() {
        let params = HammingParams::new(3).unwrap();
        let (a, b) = key_with_errors(24, &[9]);
        let mut session = Session::capturing(5);
        let out = session.winnow_pass(&a, &b, params).unwrap();
        assert_eq!(out.block_lengths, vec![7, 4, 7]);
        let frames = session.frames();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].block_count, 3);
        // 3 parity bits + one 3-bit syndrome
        assert_eq!(frames[1].payload.len(), 1);
        assert!(frames
            .iter()
            .all(|f| f.session_id == 5 && f.pass_index == 0));
    }
}
