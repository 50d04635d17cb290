use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::KeyString;
use crate::{Error, Result};

/// A public, value-independent permutation applied by both parties between
/// passes. `output[i] = input[permutation[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShufflePlan {
    seed: Option<u64>,
    permutation: Vec<usize>,
}

impl ShufflePlan {
    /// Fisher-Yates over `0..len` driven by ChaCha8 seeded with `seed`.
    pub fn from_seed(seed: u64, len: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut permutation: Vec<usize> = (0..len).collect();
        permutation.shuffle(&mut rng);
        Self {
            seed: Some(seed),
            permutation,
        }
    }

    pub fn identity(len: usize) -> Self {
        Self {
            seed: None,
            permutation: (0..len).collect(),
        }
    }

    pub fn from_permutation(permutation: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; permutation.len()];
        for &p in &permutation {
            if p >= seen.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Parameter("permutation is not a bijection".into()));
            }
        }
        Ok(Self {
            seed: None,
            permutation,
        })
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.permutation.len()];
        for (i, &p) in self.permutation.iter().enumerate() {
            inv[p] = i;
        }
        Self {
            seed: None,
            permutation: inv,
        }
    }
}

pub fn shuffle(key: &KeyString, plan: &ShufflePlan) -> Result<KeyString> {
    if key.len() != plan.len() {
        return Err(Error::ProtocolAbort(format!(
            "shuffle plan covers {} bits but key has {}",
            plan.len(),
            key.len()
        )));
    }
    let bits = plan.permutation.iter().map(|&i| key.bits()[i]).collect();
    Ok(KeyString::from_raw(bits, key.generation()))
}
