//! Hamming(2^m - 1) syndrome codec.
//!
//! Positions inside a Hamming block are 1-based so that the packed syndrome of
//! a single flipped bit is exactly its position. Syndrome bit `S_i` is stored
//! at bit `i - 1` of the packed value.

use std::fmt;

use crate::{Error, Result};

pub const MIN_SYNDROME_BITS: u32 = 3;
pub const MAX_SYNDROME_BITS: u32 = 7;

/// Minimum Hamming distance of every code in this family.
pub const HAMMING_DISTANCE: usize = 3;

/// Parameters of one Hamming/Winnow block family, fixed by the number of
/// syndrome bits `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HammingParams {
    m: u32,
}

impl HammingParams {
    pub fn new(m: u32) -> Result<Self> {
        if !(MIN_SYNDROME_BITS..=MAX_SYNDROME_BITS).contains(&m) {
            return Err(Error::InvalidSyndromeBits(m));
        }
        Ok(Self { m })
    }

    /// Parameters for a Winnow block of `n = 2^m` bits.
    pub fn from_block_size(n: usize) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(Error::InvalidBlockSize(n));
        }
        Self::new(n.trailing_zeros()).map_err(|_| Error::InvalidBlockSize(n))
    }

    /// Parameters for a Hamming block of `n_h = 2^m - 1` bits.
    pub fn from_hamming_length(n_h: usize) -> Result<Self> {
        Self::from_block_size(n_h + 1).map_err(|_| Error::InvalidHammingLength(n_h))
    }

    /// Number of syndrome bits.
    pub fn m(&self) -> u32 {
        self.m
    }

    /// Hamming block length `2^m - 1`.
    pub fn n_h(&self) -> usize {
        (1usize << self.m) - 1
    }

    /// Winnow block length `2^m`.
    pub fn n(&self) -> usize {
        1usize << self.m
    }

    /// Payload length `n_h - m`.
    pub fn k(&self) -> usize {
        self.n_h() - self.m as usize
    }

    /// Positions removed by privacy maintenance: `{2^j : j = 0..m-1}`, 1-based.
    pub fn pm_positions(&self) -> Vec<usize> {
        (0..self.m).map(|j| 1usize << j).collect()
    }

    /// Whether 1-based position `pos` is one of the privacy-maintenance positions.
    pub fn is_pm_position(&self, pos: usize) -> bool {
        pos.is_power_of_two() && pos <= self.n_h()
    }

    /// All supported parameter sets, smallest block first.
    pub fn all() -> impl Iterator<Item = HammingParams> {
        (MIN_SYNDROME_BITS..=MAX_SYNDROME_BITS).map(|m| HammingParams { m })
    }
}

impl fmt::Display for HammingParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m={} N={} N_h={}", self.m, self.n(), self.n_h())
    }
}

/// A packed m-bit syndrome, `S_1` in the least significant bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Syndrome(u32);

impl Syndrome {
    pub const ZERO: Syndrome = Syndrome(0);

    pub fn new(value: u32, params: HammingParams) -> Result<Self> {
        if value >> params.m() != 0 {
            return Err(Error::Parameter(format!(
                "syndrome value {value} does not fit in {} bits",
                params.m()
            )));
        }
        Ok(Syndrome(value))
    }

    pub fn value(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Syndrome bit `S_i` for 1-based `i`.
    pub fn bit(self, i: u32) -> u8 {
        ((self.0 >> (i - 1)) & 1) as u8
    }

    /// Syndrome difference `S_a xor S_b`.
    pub fn difference(self, other: Syndrome) -> Syndrome {
        Syndrome(self.0 ^ other.0)
    }
}

impl std::ops::BitXor for Syndrome {
    type Output = Syndrome;

    fn bitxor(self, rhs: Syndrome) -> Syndrome {
        self.difference(rhs)
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An ordered run of bits. Index 0 of the slice is Hamming position 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitBlock {
    bits: Vec<u8>,
}

impl BitBlock {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some((index, &value)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(Error::InvalidBit { index, value });
        }
        Ok(Self { bits })
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len] }
    }

    /// Block of length `len` with ones at the given 1-based positions.
    pub fn with_ones(len: usize, positions: &[usize]) -> Result<Self> {
        let mut block = Self::zeros(len);
        for &p in positions {
            if p == 0 || p > len {
                return Err(Error::Parameter(format!("position {p} outside 1..={len}")));
            }
            block.bits[p - 1] = 1;
        }
        Ok(block)
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .enumerate()
            .map(|(index, c)| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidBit {
                    index,
                    value: c as u8,
                }),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { bits })
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

    /// Bit at 1-based Hamming position `pos`.
    pub fn get(&self, pos: usize) -> u8 {
        self.bits[pos - 1]
    }

    /// Toggles the bit at 1-based position `pos`.
    pub fn flip(&mut self, pos: usize) {
        self.bits[pos - 1] ^= 1;
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }
}

impl fmt::Display for BitBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// The m x n_h parity-check matrix: entry `(i, j)` is `floor(j / 2^(i-1)) mod 2`.
///
/// Row `r` of the result is syndrome bit `i = r + 1`; column `c` is position `j = c + 1`.
pub fn parity_check_matrix(params: HammingParams) -> Vec<Vec<u8>> {
    (1..=params.m())
        .map(|i| {
            (1..=params.n_h())
                .map(|j| ((j >> (i - 1)) & 1) as u8)
                .collect()
        })
        .collect()
}

/// Syndrome of a bit slice interpreted as Hamming positions `1..=bits.len()`.
///
/// Column `j` of the parity-check matrix is the binary number `j`, so the
/// contraction reduces to XOR-ing the positions that hold a one.
pub(crate) fn syndrome_of(bits: &[u8]) -> u32 {
    bits.iter()
        .enumerate()
        .filter(|(_, &b)| b & 1 == 1)
        .fold(0u32, |acc, (idx, _)| acc ^ (idx as u32 + 1))
}

pub fn syndrome(block: &BitBlock, params: HammingParams) -> Result<Syndrome> {
    check_len(block.len(), params.n_h())?;
    Ok(Syndrome(syndrome_of(block.bits())))
}

/// Position a party must toggle to cancel the syndrome difference, if any.
pub fn correction_position(s_d: Syndrome) -> Option<usize> {
    if s_d.is_zero() {
        None
    } else {
        Some(s_d.value() as usize)
    }
}

/// Drops the bits at the `{2^j}` positions, keeping the order of the rest.
pub fn apply_privacy_maintenance(block: &BitBlock, params: HammingParams) -> Result<BitBlock> {
    check_len(block.len(), params.n_h())?;
    Ok(BitBlock {
        bits: strip_pm_positions(block.bits()),
    })
}

pub(crate) fn strip_pm_positions(bits: &[u8]) -> Vec<u8> {
    bits.iter()
        .enumerate()
        .filter(|(idx, _)| !(idx + 1).is_power_of_two())
        .map(|(_, &b)| b)
        .collect()
}

fn check_len(actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::MalformedBlock { expected, actual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(m: u32) -> HammingParams {
        HammingParams::new(m).unwrap()
    }

    /// Eq. 4 evaluated literally against the generated matrix.
    fn contract(block: &BitBlock, params: HammingParams) -> u32 {
        parity_check_matrix(params)
            .iter()
            .enumerate()
            .map(|(row, h)| {
                let s: u32 = h
                    .iter()
                    .zip(block.bits())
                    .map(|(&a, &b)| (a & b) as u32)
                    .sum();
                (s % 2) << row
            })
            .sum()
    }

    #[test]
    fn params_invariants() {
        for params in HammingParams::all() {
            let m = params.m() as usize;
            assert_eq!(params.n_h(), (1 << m) - 1);
            assert_eq!(params.n(), params.n_h() + 1);
            assert_eq!(params.k(), params.n_h() - m);
            let pm = params.pm_positions();
            assert_eq!(pm.len(), m);
            assert!(pm.iter().all(|&x| x.is_power_of_two() && x <= params.n_h()));
        }
        assert!(HammingParams::new(2).is_err());
        assert!(HammingParams::new(8).is_err());
        assert_eq!(HammingParams::from_block_size(32).unwrap().m(), 5);
        assert!(HammingParams::from_block_size(24).is_err());
        assert_eq!(HammingParams::from_hamming_length(15).unwrap().m(), 4);
    }

    #[test]
    fn matrix_m3_literal() {
        let h = parity_check_matrix(p(3));
        let rows: Vec<String> = h
            .iter()
            .map(|r| r.iter().map(|b| b.to_string()).collect())
            .collect();
        assert_eq!(rows, ["1010101", "0110011", "0001111"]);
    }

    #[test]
    fn matrix_columns_are_binary_positions() {
        let h3 = parity_check_matrix(p(3));
        assert_eq!((h3[0][4], h3[1][4], h3[2][4]), (1, 0, 1));
        let h4 = parity_check_matrix(p(4));
        let col9: Vec<u8> = h4.iter().map(|r| r[8]).collect();
        assert_eq!(col9, [1, 0, 0, 1]);
        for params in HammingParams::all() {
            let h = parity_check_matrix(params);
            for j in 1..=params.n_h() {
                let v: usize = h
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (r[j - 1] as usize) << i)
                    .sum();
                assert_eq!(v, j);
            }
        }
    }

    #[test]
    fn syndrome_examples() {
        let params = p(3);
        assert_eq!(syndrome(&BitBlock::zeros(7), params).unwrap().value(), 0);
        let b5 = BitBlock::with_ones(7, &[5]).unwrap();
        assert_eq!(syndrome(&b5, params).unwrap().value(), 5);
        let b35 = BitBlock::with_ones(7, &[3, 5]).unwrap();
        assert_eq!(contract(&b35, params), 6);
        assert_eq!(syndrome(&b35, params).unwrap().value(), 6);
    }

    #[test]
    fn syndrome_length_mismatch() {
        let err = syndrome(&BitBlock::zeros(8), p(3)).unwrap_err();
        assert_eq!(
            err,
            Error::MalformedBlock {
                expected: 7,
                actual: 8
            }
        );
        assert!(apply_privacy_maintenance(&BitBlock::zeros(6), p(3)).is_err());
    }

    #[test]
    fn syndrome_matches_matrix_contraction_exhaustive_m4() {
        let params = p(4);
        for mask in 0u32..(1 << 15) {
            let bits: Vec<u8> = (0..15).map(|i| ((mask >> i) & 1) as u8).collect();
            let block = BitBlock::new(bits).unwrap();
            assert_eq!(
                syndrome(&block, params).unwrap().value(),
                contract(&block, params)
            );
        }
    }

    #[test]
    fn correction_examples() {
        assert_eq!(correction_position(Syndrome::ZERO), None);
        assert_eq!(
            correction_position(Syndrome::new(5, p(3)).unwrap()),
            Some(5)
        );
        assert!(Syndrome::new(8, p(3)).is_err());
    }

    #[test]
    fn correction_zeroes_difference_for_all_pairs_m3() {
        let params = p(3);
        for a in 0u32..128 {
            for b in 0u32..128 {
                let alice = BitBlock::new((0..7).map(|i| ((a >> i) & 1) as u8).collect()).unwrap();
                let mut bob =
                    BitBlock::new((0..7).map(|i| ((b >> i) & 1) as u8).collect()).unwrap();
                let sa = syndrome(&alice, params).unwrap();
                let sd = sa ^ syndrome(&bob, params).unwrap();
                if let Some(pos) = correction_position(sd) {
                    bob.flip(pos);
                }
                assert!((sa ^ syndrome(&bob, params).unwrap()).is_zero());
            }
        }
    }

    #[test]
    fn single_error_corrected_exhaustive() {
        for params in [p(3), p(4), p(5)] {
            let alice = BitBlock::zeros(params.n_h());
            for pos in 1..=params.n_h() {
                let mut bob = BitBlock::with_ones(params.n_h(), &[pos]).unwrap();
                let sd = syndrome(&alice, params).unwrap() ^ syndrome(&bob, params).unwrap();
                assert_eq!(sd.value() as usize, pos);
                bob.flip(correction_position(sd).unwrap());
                assert_eq!(bob, alice);
            }
        }
    }

    #[test]
    fn double_errors_detected_and_become_triple() {
        for params in [p(3), p(4)] {
            let n_h = params.n_h();
            for a in 1..=n_h {
                for b in (a + 1)..=n_h {
                    let mut err = BitBlock::with_ones(n_h, &[a, b]).unwrap();
                    let sd = syndrome(&err, params).unwrap();
                    assert!(!sd.is_zero());
                    err.flip(correction_position(sd).unwrap());
                    assert_eq!(err.weight(), 3);
                }
            }
        }
    }

    #[test]
    fn zero_syndrome_weights_m3() {
        let params = p(3);
        let mut counts = [0usize; 8];
        for mask in 0u32..128 {
            let block = BitBlock::new((0..7).map(|i| ((mask >> i) & 1) as u8).collect()).unwrap();
            if syndrome(&block, params).unwrap().is_zero() {
                counts[block.weight()] += 1;
            }
        }
        assert_eq!(counts, [1, 0, 0, 7, 7, 0, 0, 1]);
    }

    #[test]
    fn privacy_maintenance_examples() {
        let params = p(3);
        let all = BitBlock::parse("1111111").unwrap();
        assert_eq!(
            apply_privacy_maintenance(&all, params).unwrap().to_string(),
            "1111"
        );
        let pm = BitBlock::with_ones(7, &[1, 2, 4]).unwrap();
        assert_eq!(
            apply_privacy_maintenance(&pm, params).unwrap().to_string(),
            "0000"
        );

        let p4 = p(4);
        let block = BitBlock::new((1..=15).map(|j| (j % 2) as u8).collect()).unwrap();
        let out = apply_privacy_maintenance(&block, p4).unwrap();
        assert_eq!(out.len(), 11);
        let expected: Vec<u8> = (1..=15usize)
            .filter(|j| ![1, 2, 4, 8].contains(j))
            .map(|j| (j % 2) as u8)
            .collect();
        assert_eq!(out.bits(), expected.as_slice());
    }

    #[test]
    fn bitblock_rejects_non_binary() {
        assert_eq!(
            BitBlock::new(vec![0, 1, 2]).unwrap_err(),
            Error::InvalidBit { index: 2, value: 2 }
        );
        assert!(BitBlock::parse("01x").is_err());
    }
}
