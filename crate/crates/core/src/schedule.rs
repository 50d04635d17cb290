use std::fmt;
use std::str::FromStr;

use crate::hamming::HammingParams;
use crate::{Error, Result};

/// Block sizes a schedule walks through, in application order.
pub const BLOCK_SIZES: [usize; 5] = [8, 16, 32, 64, 128];

/// Pass counts `{j_8, j_16, j_32, j_64, j_128}`.
///
/// Passes are always applied smallest block first, so the block size never
/// decreases along a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Schedule {
    counts: [u32; 5],
}

impl Schedule {
    pub const fn new(counts: [u32; 5]) -> Self {
        Self { counts }
    }

    /// A single pass at block size `n`.
    pub fn single(n: usize) -> Result<Self> {
        let idx = BLOCK_SIZES
            .iter()
            .position(|&b| b == n)
            .ok_or(Error::InvalidBlockSize(n))?;
        let mut counts = [0; 5];
        counts[idx] = 1;
        Ok(Self { counts })
    }

    pub fn counts(&self) -> [u32; 5] {
        self.counts
    }

    pub fn total_passes(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_passes() == 0
    }

    /// Parameters of every pass, in order.
    pub fn passes(&self) -> Vec<HammingParams> {
        BLOCK_SIZES
            .iter()
            .zip(self.counts)
            .flat_map(|(&n, j)| {
                let params =
                    HammingParams::from_block_size(n).expect("fixed block sizes are valid");
                std::iter::repeat_n(params, j as usize)
            })
            .collect()
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.counts;
        write!(f, "{},{},{},{},{}", c[0], c[1], c[2], c[3], c[4])
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// Parses `"3,1,0,1,3"`; braces and spaces are tolerated.
    fn from_str(s: &str) -> Result<Self> {
        let cleaned: String = s
            .chars()
            .filter(|c| !matches!(c, '{' | '}' | ' '))
            .collect();
        let parts: Vec<&str> = cleaned.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::InvalidSchedule(format!(
                "expected 5 comma-separated counts, got {:?}",
                s
            )));
        }
        let mut counts = [0u32; 5];
        for (slot, part) in counts.iter_mut().zip(parts) {
            *slot = part
                .parse()
                .map_err(|_| Error::InvalidSchedule(format!("bad pass count {part:?}")))?;
        }
        Ok(Self { counts })
    }
}
