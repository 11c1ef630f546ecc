//! State differences as published in calldata.
//!
//! Layout: `[deployment word count, deployment entries.., modified contract
//! count, then per contract: address, update count, (key, value)..]`. A
//! deployment entry is `[address, contract hash, arg count, args..]`.

use serde::{Deserialize, Serialize};

use super::ValidityError;
use crate::l1sim::calldata_gas;
use crate::primitives::{keccak256, Word};

/// Sample diff: no deployments, one contract, ten cells (five small values).
pub const SAMPLE_DIFF: &str = include_str!("../../fixtures/state_diff_sample.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deployment {
    pub address: Word,
    pub contract_hash: Word,
    pub constructor_args: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractUpdates {
    pub address: Word,
    /// Keys are unique; insertion order is kept so a decoded diff re-encodes
    /// to the same words.
    pub updates: Vec<(Word, Word)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDiff {
    pub deployments: Vec<Deployment>,
    pub contracts: Vec<ContractUpdates>,
}

impl StateDiff {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn deploy(&mut self, d: Deployment) {
        self.deployments.push(d);
    }

    /// Records a storage write; a later write to the same cell replaces the
    /// earlier one in place.
    pub fn write(&mut self, contract: Word, key: Word, value: Word) {
        let idx = match self.contracts.iter().position(|c| c.address == contract) {
            Some(i) => i,
            None => {
                self.contracts.push(ContractUpdates { address: contract, updates: Vec::new() });
                self.contracts.len() - 1
            }
        };
        let updates = &mut self.contracts[idx].updates;
        match updates.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => updates.push((key, value)),
        }
    }

    /// Folds `later` on top of `self`.
    pub fn merge(&mut self, later: &StateDiff) {
        self.deployments.extend(later.deployments.iter().cloned());
        for c in &later.contracts {
            for (k, v) in &c.updates {
                self.write(c.address, *k, *v);
            }
        }
    }

    pub fn get(&self, contract: &Word, key: &Word) -> Option<Word> {
        self.contracts
            .iter()
            .find(|c| c.address == *contract)
            .and_then(|c| c.updates.iter().find(|(k, _)| k == key).map(|(_, v)| *v))
    }

    pub fn is_empty(&self) -> bool {
        self.deployments.is_empty() && self.contracts.iter().all(|c| c.updates.is_empty())
    }

    /// Every `(contract, key, value)` in encoding order.
    pub fn cells(&self) -> impl Iterator<Item = (Word, Word, Word)> + '_ {
        self.contracts.iter().flat_map(|c| c.updates.iter().map(move |(k, v)| (c.address, *k, *v)))
    }

    pub fn encode(&self) -> Vec<Word> {
        encode_state_diff(self)
    }

    pub fn digest(&self) -> crate::primitives::B256 {
        keccak256(words_to_bytes(&self.encode()))
    }
}

pub fn encode_state_diff(diff: &StateDiff) -> Vec<Word> {
    let mut deploy = Vec::new();
    for d in &diff.deployments {
        deploy.push(d.address);
        deploy.push(d.contract_hash);
        deploy.push(Word::from_u64(d.constructor_args.len() as u64));
        deploy.extend(d.constructor_args.iter().copied());
    }
    let mut out = Vec::with_capacity(deploy.len() + 2);
    out.push(Word::from_u64(deploy.len() as u64));
    out.extend(deploy);
    out.push(Word::from_u64(diff.contracts.len() as u64));
    for c in &diff.contracts {
        out.push(c.address);
        out.push(Word::from_u64(c.updates.len() as u64));
        for (k, v) in &c.updates {
            out.push(*k);
            out.push(*v);
        }
    }
    out
}

struct Reader<'a> {
    words: &'a [Word],
    pos: usize,
}

impl Reader<'_> {
    fn next(&mut self, what: &str) -> Result<Word, ValidityError> {
        let w = self.words.get(self.pos).copied().ok_or_else(|| ValidityError::MalformedDiff(format!("truncated at {what}")))?;
        self.pos += 1;
        Ok(w)
    }

    fn count(&mut self, what: &str) -> Result<usize, ValidityError> {
        let w = self.next(what)?;
        let n = w.to_u64().ok_or_else(|| ValidityError::MalformedDiff(format!("{what} does not fit a length")))?;
        let left = (self.words.len() - self.pos) as u64;
        if n > left {
            return Err(ValidityError::MalformedDiff(format!("{what} {n} exceeds the {left} remaining words")));
        }
        Ok(n as usize)
    }
}

pub fn decode_state_diff(words: &[Word]) -> Result<StateDiff, ValidityError> {
    let mut r = Reader { words, pos: 0 };
    let deploy_words = r.count("deployment word count")?;
    let deploy_end = r.pos + deploy_words;
    let mut deployments = Vec::new();
    while r.pos < deploy_end {
        let address = r.next("deployment address")?;
        let contract_hash = r.next("contract hash")?;
        let n = r.count("constructor argument count")?;
        let constructor_args = (0..n).map(|_| r.next("constructor argument")).collect::<Result<_, _>>()?;
        deployments.push(Deployment { address, contract_hash, constructor_args });
    }
    if r.pos != deploy_end {
        return Err(ValidityError::MalformedDiff("deployment entries overrun their section".into()));
    }
    let contracts_n = r.count("modified contract count")?;
    let mut contracts: Vec<ContractUpdates> = Vec::with_capacity(contracts_n);
    for _ in 0..contracts_n {
        let address = r.next("contract address")?;
        if contracts.iter().any(|c| c.address == address) {
            return Err(ValidityError::MalformedDiff(format!("contract {address} listed twice")));
        }
        let n = r.count("storage update count")?;
        let mut updates: Vec<(Word, Word)> = Vec::with_capacity(n);
        for _ in 0..n {
            let k = r.next("storage key")?;
            let v = r.next("storage value")?;
            if updates.iter().any(|(x, _)| *x == k) {
                return Err(ValidityError::MalformedDiff(format!("key {k} written twice")));
            }
            updates.push((k, v));
        }
        contracts.push(ContractUpdates { address, updates });
    }
    if r.pos != words.len() {
        return Err(ValidityError::MalformedDiff(format!("{} trailing words", words.len() - r.pos)));
    }
    Ok(StateDiff { deployments, contracts })
}

/// 32-byte big-endian words, the form posted as calldata.
pub fn words_to_bytes(words: &[Word]) -> Vec<u8> {
    words.iter().flat_map(|w| w.0).collect()
}

pub fn bytes_to_words(bytes: &[u8]) -> Result<Vec<Word>, ValidityError> {
    if !bytes.len().is_multiple_of(32) {
        return Err(ValidityError::MalformedDiff(format!("{} bytes is not a whole number of words", bytes.len())));
    }
    Ok(bytes.chunks_exact(32).map(|c| Word(c.try_into().expect("32-byte chunk"))).collect())
}

pub fn diff_calldata_gas(words: &[Word]) -> u64 {
    calldata_gas(&words_to_bytes(words))
}

/// Decimal words separated by commas, whitespace or newlines; brackets are
/// ignored.
pub fn parse_words(text: &str) -> Result<Vec<Word>, ValidityError> {
    text.split(|c: char| c == ',' || c.is_whitespace() || c == '[' || c == ']')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Word>().map_err(|e| ValidityError::MalformedDiff(format!("word `{s}`: {e}"))))
        .collect()
}

pub fn format_words(words: &[Word]) -> String {
    let parts: Vec<String> = words.iter().map(Word::to_string).collect();
    format!("[{}]", parts.join(", "))
}

pub fn sample_diff_words() -> Vec<Word> {
    parse_words(SAMPLE_DIFF).expect("bundled sample parses")
}
