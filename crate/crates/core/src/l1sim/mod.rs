//! Simulated settlement chain: blocks, the gas schedule, native contracts
//! with slot storage, the event log, and the censorship model.

pub mod abi;
mod chain;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::{Address, B256};

pub use chain::{
    CallContext, ChainConfig, ChainDump, Contract, Event, Handler, L1Block, L1Chain, Receipt, Revert, Transaction,
    TxStatus,
};

pub const GWEI: u128 = 1_000_000_000;
pub const ETHER: u128 = 1_000_000_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum L1Error {
    #[error("no account or contract at {0}")]
    UnknownAddress(Address),
    #[error("address {0} already in use")]
    AddressInUse(Address),
    #[error("sender balance {balance} below value {value}")]
    InsufficientBalance { balance: u128, value: u128 },
    #[error("timestamp {requested} precedes head timestamp {head}")]
    TimestampRegression { requested: u64, head: u64 },
    #[error("invalid chain dump: {0}")]
    BadDump(String),
    #[error("invalid censorship model: {0}")]
    InvalidModel(&'static str),
}

/// Kind of storage write, decided from the current value, the new value and
/// whether the slot was already written earlier in the transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreTransition {
    ZeroToNonzero,
    NonzeroToNonzero,
    ToZero,
    /// Slot already written in this transaction, or a same-value write.
    Modified,
}

impl StoreTransition {
    pub fn classify(current_is_zero: bool, new_is_zero: bool, unchanged: bool, modified_in_tx: bool) -> Self {
        if modified_in_tx || unchanged {
            Self::Modified
        } else if new_is_zero {
            Self::ToZero
        } else if current_is_zero {
            Self::ZeroToNonzero
        } else {
            Self::NonzeroToNonzero
        }
    }
}

/// Gas charged for one storage write. `refund` marks writes that clear a
/// slot; the refund amount itself is not modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreCost {
    pub gas: u64,
    pub refund: bool,
}

/// Storage prices are `[cold, warm]`, where cold means the slot has not been
/// touched earlier in the block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GasSchedule {
    pub calldata_zero: u64,
    pub calldata_nonzero: u64,
    pub tx_base: u64,
    pub sstore_zero_to_nonzero: [u64; 2],
    pub sstore_nonzero_to_nonzero: [u64; 2],
    pub sstore_modified: u64,
}

impl Default for GasSchedule {
    fn default() -> Self {
        Self {
            calldata_zero: 4,
            calldata_nonzero: 16,
            tx_base: 21_000,
            sstore_zero_to_nonzero: [22_100, 20_000],
            sstore_nonzero_to_nonzero: [5_000, 2_900],
            sstore_modified: 100,
        }
    }
}

impl GasSchedule {
    pub fn calldata_gas(&self, data: &[u8]) -> u64 {
        data.iter().map(|b| if *b == 0 { self.calldata_zero } else { self.calldata_nonzero }).sum()
    }

    pub fn sstore_gas(&self, transition: StoreTransition, cold: bool) -> StoreCost {
        let col = if cold { 0 } else { 1 };
        match transition {
            StoreTransition::ZeroToNonzero => StoreCost { gas: self.sstore_zero_to_nonzero[col], refund: false },
            StoreTransition::NonzeroToNonzero => StoreCost { gas: self.sstore_nonzero_to_nonzero[col], refund: false },
            StoreTransition::ToZero => StoreCost { gas: self.sstore_nonzero_to_nonzero[col], refund: true },
            StoreTransition::Modified => StoreCost { gas: self.sstore_modified, refund: false },
        }
    }
}

pub fn calldata_gas(data: &[u8]) -> u64 {
    GasSchedule::default().calldata_gas(data)
}

pub fn sstore_gas(transition: StoreTransition, cold: bool) -> StoreCost {
    GasSchedule::default().sstore_gas(transition, cold)
}

/// Value at risk `v` (ether) against an attacker who must censor `n`
/// consecutive blocks, each with success probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensorshipModel {
    pub v: f64,
    pub p: f64,
    pub n: u64,
}

impl CensorshipModel {
    pub fn new(v: f64, p: f64, n: u64) -> Result<Self, L1Error> {
        if !(0.0..=1.0).contains(&p) {
            return Err(L1Error::InvalidModel("p outside [0, 1]"));
        }
        if !v.is_finite() || v < 0.0 {
            return Err(L1Error::InvalidModel("value must be finite and non-negative"));
        }
        Ok(Self { v, p, n })
    }

    /// Number of blocks in an interval at the given block time.
    pub fn blocks_in(seconds: u64, block_time: u64) -> u64 {
        seconds / block_time
    }
}

/// `V · pⁿ` in double precision; relative error stays below `n · 2⁻⁵²`.
pub fn censorship_expected_value(m: &CensorshipModel) -> f64 {
    if m.n == 0 {
        return m.v;
    }
    m.v * (m.n as f64 * m.p.ln()).exp()
}

/// L1 header fields exposed to L2 through the attributes transaction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct L1Attributes {
    pub number: u64,
    pub timestamp: u64,
    pub basefee: u128,
    pub hash: B256,
    /// L2 block index within the epoch, reset to 0 when an epoch starts.
    pub sequence_number: u64,
}

pub fn l1_attributes(block: &L1Block, sequence_number: u64) -> L1Attributes {
    L1Attributes {
        number: block.number,
        timestamp: block.timestamp,
        basefee: block.basefee,
        hash: block.hash,
        sequence_number,
    }
}
