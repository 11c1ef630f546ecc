use serde::{Deserialize, Serialize};

use super::CostError;
use crate::primitives::keccak_concat;

/// `(m, k)` for `n` expected inserts at false-positive rate `p`, both
/// floored and clamped to at least 1.
pub fn bloom_params(n: u64, p: f64) -> Result<(u64, u32), CostError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(CostError::InvalidTolerance(p));
    }
    if n == 0 {
        return Err(CostError::InvalidBloomSize);
    }
    let ln2 = std::f64::consts::LN_2;
    let m = ((-(n as f64) * p.ln()) / (ln2 * ln2)).floor().max(1.0) as u64;
    let k = ((m as f64 / n as f64) * ln2).floor().max(1.0) as u32;
    Ok((m, k))
}

/// Closed-form estimate `(1 - e^{-kn/m})^k`.
pub fn fp_rate(m: u64, k: u32, n: u64) -> f64 {
    (1.0 - (-(k as f64) * n as f64 / m as f64).exp()).powi(k as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    DefinitelyAbsent,
    MaybePresent,
}

/// Bit array queried through `k` double-hashed positions
/// `h1 + i·h2 mod m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BloomFilter {
    bits: Vec<u64>,
    m: u64,
    k: u32,
    n: u64,
    seed: u64,
}

impl BloomFilter {
    pub fn new(m: u64, k: u32, seed: u64) -> Result<Self, CostError> {
        if m == 0 || k == 0 {
            return Err(CostError::InvalidBloomSize);
        }
        Ok(Self { bits: vec![0; m.div_ceil(64) as usize], m, k, n: 0, seed })
    }

    pub fn for_capacity(n: u64, p: f64, seed: u64) -> Result<Self, CostError> {
        let (m, k) = bloom_params(n, p)?;
        Self::new(m, k, seed)
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Inserts so far, duplicates included.
    pub fn inserted(&self) -> u64 {
        self.n
    }

    pub fn expected_fp_rate(&self) -> f64 {
        fp_rate(self.m, self.k, self.n.max(1))
    }

    fn positions(&self, element: &[u8]) -> impl Iterator<Item = u64> {
        let h = keccak_concat([&self.seed.to_be_bytes()[..], element]);
        let h1 = u64::from_be_bytes(h.0[..8].try_into().expect("8 bytes"));
        let h2 = u64::from_be_bytes(h.0[8..16].try_into().expect("8 bytes")) | 1;
        let m = self.m;
        (0..self.k as u64).map(move |i| ((h1 as u128 + i as u128 * h2 as u128) % m as u128) as u64)
    }

    pub fn insert(&mut self, element: &[u8]) {
        let pos: Vec<u64> = self.positions(element).collect();
        for p in pos {
            self.bits[(p / 64) as usize] |= 1 << (p % 64);
        }
        self.n += 1;
    }

    pub fn query(&self, element: &[u8]) -> Membership {
        if self.positions(element).all(|p| self.bits[(p / 64) as usize] >> (p % 64) & 1 == 1) {
            Membership::MaybePresent
        } else {
            Membership::DefinitelyAbsent
        }
    }

    pub fn ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }
}
