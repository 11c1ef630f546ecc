//! Cost analytics: Bloom-filter sizing, the address cache, batch
//! compression, and data-availability gas across the three settlement
//! styles.

mod bloom;
mod cache;
mod compression;
mod report;

use thiserror::Error;

pub use bloom::{bloom_params, fp_rate, BloomFilter, Membership};
pub use cache::{argument_savings, AddressCache, CACHE_KEY_BYTES};
pub use compression::{
    compression_stats, fixture_corpus, parse_corpus, synthetic_corpus, zlib, CompressionStats, GroupStats, CORPUS_FIXTURE,
};
pub use report::{amortized_proof_cost, da_cost_comparison, format_gas, CostReport, DaScenario, PAPER_DA_RATIO, PAPER_L1_GAS, PAPER_DIFF_GAS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("false-positive tolerance {0} outside (0, 1)")]
    InvalidTolerance(f64),
    #[error("bloom filter needs at least one expected insert, bit and hash")]
    InvalidBloomSize,
    #[error("address already cached")]
    AlreadyCached,
    #[error("cache is full")]
    CacheFull,
    #[error("key not found")]
    KeyNotFound,
    #[error("cache capacity must be below 2^32")]
    CapacityTooLarge,
    #[error("no transactions to amortize over")]
    NoTransactions,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("group size must be at least 1")]
    ZeroGroupSize,
    #[error("bad corpus line {line}: {reason}")]
    BadCorpus { line: usize, reason: String },
}
