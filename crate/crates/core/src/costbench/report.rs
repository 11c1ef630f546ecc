use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::compression::zlib;
use super::CostError;
use crate::l1sim::{calldata_gas, sstore_gas, StoreTransition};
use crate::oprollup::UserTx;
use crate::primitives::{Address, Word};
use crate::validityrollup::{decode_state_diff, sample_diff_words, word_address, words_to_bytes, StateDiff};

/// Reference values printed alongside recomputed ones.
pub const PAPER_L1_GAS: u64 = 221_000;
pub const PAPER_DIFF_GAS: u64 = 9_240;
pub const PAPER_DA_RATIO: f64 = 0.0418;

/// Gas per transaction when `total_gas` is shared by `tx_count` transactions.
pub fn amortized_proof_cost(total_gas: u64, tx_count: u64) -> Result<f64, CostError> {
    if tx_count == 0 {
        return Err(CostError::NoTransactions);
    }
    Ok(total_gas as f64 / tx_count as f64)
}

pub fn format_gas(g: f64) -> String {
    format!("{g:.2}")
}

/// A sequence of storage writes to one contract, each its own transaction,
/// all within one L1 block (or one publication interval on a rollup).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaScenario {
    pub name: String,
    pub contract: Word,
    pub writes: Vec<(Word, Word)>,
    /// Gas to verify one validity proof and the transactions it covers.
    pub proof_gas: u64,
    pub proof_txs: u64,
}

impl DaScenario {
    pub fn new(name: &str, contract: Word, writes: Vec<(Word, Word)>) -> Self {
        Self { name: name.into(), contract, writes, proof_gas: 267_830, proof_txs: 200 }
    }

    /// The writes of the appendix state diff.
    pub fn sample() -> Self {
        let diff = decode_state_diff(&sample_diff_words()).expect("sample diff decodes");
        let c = &diff.contracts[0];
        Self::new("sample diff", c.address, c.updates.clone())
    }

    /// `n` distinct cells, written once each.
    pub fn distinct(n: u64) -> Self {
        let writes = (0..n).map(|i| (Word::from_u64(i), Word::from_u64(1_000 + i))).collect();
        Self::new("distinct cells", Word::from_u64(0x5107), writes)
    }

    /// One cell written `n` times.
    pub fn overwrite(n: u64) -> Self {
        let writes = (1..=n).map(|i| (Word::from_u64(3), Word::from_u64(i))).collect();
        Self::new("overwritten cell", Word::from_u64(0x5107), writes)
    }
}

/// Raw measurements only; every ratio is computed on demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub scenario: String,
    pub writes: u64,
    pub cells: u64,
    pub l1_gas: u64,
    pub diff_bytes: u64,
    pub diff_gas: u64,
    pub proof_gas: u64,
    pub proof_txs: u64,
    pub op_raw_bytes: u64,
    pub op_compressed_bytes: u64,
    pub op_gas: u64,
}

impl CostReport {
    pub fn diff_ratio(&self) -> f64 {
        self.diff_gas as f64 / self.l1_gas as f64
    }

    pub fn op_ratio(&self) -> f64 {
        self.op_gas as f64 / self.l1_gas as f64
    }

    pub fn diff_gas_per_write(&self) -> f64 {
        self.diff_gas as f64 / self.writes as f64
    }

    /// Proof gas attributed to this scenario's transactions.
    pub fn proof_share(&self) -> f64 {
        self.proof_gas as f64 * self.writes as f64 / self.proof_txs as f64
    }

    pub fn validity_total(&self) -> f64 {
        self.diff_gas as f64 + self.proof_share()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "raw": self,
            "derived": {
                "diff_ratio": self.diff_ratio(),
                "op_ratio": self.op_ratio(),
                "diff_gas_per_write": self.diff_gas_per_write(),
                "proof_share": self.proof_share(),
                "validity_total": self.validity_total(),
            },
            "reference": {
                "l1_gas": PAPER_L1_GAS,
                "diff_gas": PAPER_DIFF_GAS,
                "diff_ratio": PAPER_DA_RATIO,
            },
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let rows: [(&str, String, String); 6] = [
            ("L1 storage writes", self.l1_gas.to_string(), PAPER_L1_GAS.to_string()),
            ("state diff calldata", self.diff_gas.to_string(), PAPER_DIFF_GAS.to_string()),
            ("diff / L1", format!("{:.2}%", 100.0 * self.diff_ratio()), format!("{:.2}%", 100.0 * PAPER_DA_RATIO)),
            ("diff + proof share", format_gas(self.validity_total()), "-".into()),
            ("compressed op calldata", self.op_gas.to_string(), "-".into()),
            ("op / L1", format!("{:.2}%", 100.0 * self.op_ratio()), "-".into()),
        ];
        let _ = writeln!(s, "scenario: {} ({} writes, {} cells)", self.scenario, self.writes, self.cells);
        let _ = writeln!(s, "{:<24} {:>14} {:>14}", "item", "gas", "reference");
        for (k, v, r) in rows {
            let _ = writeln!(s, "{k:<24} {v:>14} {r:>14}");
        }
        s
    }
}

pub fn da_cost_comparison(sc: &DaScenario) -> Result<CostReport, CostError> {
    if sc.proof_txs == 0 {
        return Err(CostError::NoTransactions);
    }
    let mut current: std::collections::BTreeMap<Word, Word> = Default::default();
    let mut touched = BTreeSet::new();
    let mut l1_gas = 0;
    for (k, v) in &sc.writes {
        let cur = current.get(k).copied().unwrap_or_default();
        let t = StoreTransition::classify(cur == Word::default(), *v == Word::default(), cur == *v, false);
        l1_gas += sstore_gas(t, touched.insert(*k)).gas;
        current.insert(*k, *v);
    }

    let mut diff = StateDiff::new();
    for (k, v) in &sc.writes {
        diff.write(sc.contract, *k, *v);
    }
    let diff_bytes = words_to_bytes(&diff.encode());

    let from = word_address(&sc.contract).unwrap_or_else(|| Address::from_label(&sc.name));
    let op_raw: Vec<u8> =
        sc.writes.iter().flat_map(|(k, v)| UserTx::Store { from, key: *k, value: *v }.encode()).collect();
    let op_z = zlib(&op_raw);

    Ok(CostReport {
        scenario: sc.name.clone(),
        writes: sc.writes.len() as u64,
        cells: touched.len() as u64,
        l1_gas,
        diff_bytes: diff_bytes.len() as u64,
        diff_gas: calldata_gas(&diff_bytes),
        proof_gas: sc.proof_gas,
        proof_txs: sc.proof_txs,
        op_raw_bytes: op_raw.len() as u64,
        op_compressed_bytes: op_z.len() as u64,
        op_gas: calldata_gas(&op_z),
    })
}
