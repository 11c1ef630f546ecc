use std::io::Write;

use flate2::write::ZlibEncoder;
use flate2::Compression;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CostError;
use crate::l1sim::calldata_gas;
use crate::oprollup::UserTx;
use crate::primitives::{Address, Word};

/// Synthetic batch payloads, one hex line per batch.
pub const CORPUS_FIXTURE: &str = include_str!("../../fixtures/batch_corpus.hex");

pub fn zlib(data: &[u8]) -> Vec<u8> {
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::best());
    enc.write_all(data).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

pub fn parse_corpus(text: &str) -> Result<Vec<Vec<u8>>, CostError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| hex::decode(l.trim()).map_err(|e| CostError::BadCorpus { line: i + 1, reason: e.to_string() }))
        .collect()
}

pub fn fixture_corpus() -> Vec<Vec<u8>> {
    parse_corpus(CORPUS_FIXTURE).expect("fixture corpus is valid hex")
}

/// Batches of transfers and storage writes among a small pool of accounts.
pub fn synthetic_corpus(rng: &mut impl Rng, batches: usize, txs_per_batch: usize) -> Vec<Vec<u8>> {
    let users: Vec<Address> = (0..24).map(|i| Address::from_label(&format!("user-{i}"))).collect();
    (0..batches)
        .map(|_| {
            let mut out = Vec::new();
            for _ in 0..txs_per_batch {
                let from = users[rng.gen_range(0..users.len())];
                let tx = if rng.gen_bool(0.7) {
                    let to = users[rng.gen_range(0..users.len())];
                    UserTx::Transfer { from, to, value: rng.gen_range(1..10_000u128) * 1_000_000_000_000 }
                } else {
                    UserTx::Store { from, key: Word::from_u64(rng.gen_range(0..64)), value: Word::from_u64(rng.gen()) }
                };
                out.extend(tx.encode());
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStats {
    pub batches: usize,
    pub raw_bytes: u64,
    pub compressed_bytes: u64,
    pub raw_gas: u64,
    pub compressed_gas: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressionStats {
    pub group_size: usize,
    pub groups: Vec<GroupStats>,
}

impl CompressionStats {
    pub fn raw_bytes(&self) -> u64 {
        self.groups.iter().map(|g| g.raw_bytes).sum()
    }

    pub fn compressed_bytes(&self) -> u64 {
        self.groups.iter().map(|g| g.compressed_bytes).sum()
    }

    pub fn raw_gas(&self) -> u64 {
        self.groups.iter().map(|g| g.raw_gas).sum()
    }

    pub fn compressed_gas(&self) -> u64 {
        self.groups.iter().map(|g| g.compressed_gas).sum()
    }

    /// Compressed over raw bytes; above 1 for incompressible input.
    pub fn byte_ratio(&self) -> f64 {
        self.compressed_bytes() as f64 / self.raw_bytes() as f64
    }

    pub fn gas_ratio(&self) -> f64 {
        self.compressed_gas() as f64 / self.raw_gas() as f64
    }
}

/// Compresses consecutive runs of `group_size` batches together.
pub fn compression_stats(corpus: &[Vec<u8>], group_size: usize) -> Result<CompressionStats, CostError> {
    if corpus.is_empty() {
        return Err(CostError::EmptyCorpus);
    }
    if group_size == 0 {
        return Err(CostError::ZeroGroupSize);
    }
    let groups = corpus
        .chunks(group_size)
        .map(|chunk| {
            let raw = chunk.concat();
            let z = zlib(&raw);
            GroupStats {
                batches: chunk.len(),
                raw_bytes: raw.len() as u64,
                compressed_bytes: z.len() as u64,
                raw_gas: calldata_gas(&raw),
                compressed_gas: calldata_gas(&z),
            }
        })
        .collect();
    Ok(CompressionStats { group_size, groups })
}
