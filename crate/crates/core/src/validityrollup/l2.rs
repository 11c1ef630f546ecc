//! L2 state, the token bridge contract and its L1 handler.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::diff::{Deployment, StateDiff};
use super::messaging::{selector_from_name, withdraw_payload, address_word, L1ToL2Message, L2ToL1Message};
use super::ValidityError;
use crate::merkle::MerkleTree;
use crate::primitives::{keccak256, keccak_concat, Address, B256, Word};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractState {
    pub class_hash: Word,
    pub storage: BTreeMap<Word, Word>,
}

/// Storage of every deployed contract. Zero values are not stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarkState {
    pub contracts: BTreeMap<Word, ContractState>,
}

impl StarkState {
    pub fn read(&self, contract: &Word, key: &Word) -> Word {
        self.contracts.get(contract).and_then(|c| c.storage.get(key)).copied().unwrap_or(Word::ZERO)
    }

    pub fn is_deployed(&self, contract: &Word) -> bool {
        self.contracts.contains_key(contract)
    }

    pub fn apply(&mut self, diff: &StateDiff) {
        for d in &diff.deployments {
            self.contracts.entry(d.address).or_default().class_hash = d.contract_hash;
        }
        for (contract, key, value) in diff.cells() {
            let storage = &mut self.contracts.entry(contract).or_default().storage;
            if value.is_zero() {
                storage.remove(&key);
            } else {
                storage.insert(key, value);
            }
        }
    }

    pub fn applied(&self, diff: &StateDiff) -> StarkState {
        let mut s = self.clone();
        s.apply(diff);
        s
    }

    /// Merkle root over one leaf per contract and per non-zero cell, in key
    /// order; the empty state has the zero root.
    pub fn root(&self) -> B256 {
        let mut leaves: Vec<Vec<u8>> = Vec::new();
        for (addr, c) in &self.contracts {
            leaves.push([addr.0.as_slice(), c.class_hash.0.as_slice()].concat());
            for (k, v) in &c.storage {
                leaves.push([addr.0.as_slice(), k.0.as_slice(), v.0.as_slice()].concat());
            }
        }
        if leaves.is_empty() {
            return B256::ZERO;
        }
        MerkleTree::build(&leaves).expect("non-empty leaves").root()
    }
}

pub fn token_bridge_class() -> Word {
    Word(keccak256(b"token_bridge").0)
}

/// Storage key of a user's balance in the bridge contract.
pub fn balance_key(user: &Word) -> Word {
    let mut w = Word(keccak_concat([b"balance".as_slice(), user.0.as_slice()]).0);
    w.0[0] &= 0x03;
    w
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StarkTx {
    /// Delivery of an L1 message to its `@l1_handler`.
    L1Handler(L1ToL2Message),
    Transfer { from: Word, to: Word, amount: u128 },
    /// Burns `amount` on L2 and sends the bridge withdrawal message to L1.
    Withdraw { user: Word, recipient: Address, amount: u128 },
}

/// What one transaction changed; merged across a whole proof batch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effects {
    pub diff: StateDiff,
    pub sent: Vec<L2ToL1Message>,
    pub consumed: Vec<B256>,
}

impl Effects {
    pub fn merge(&mut self, later: &Effects) {
        self.diff.merge(&later.diff);
        self.sent.extend(later.sent.iter().cloned());
        self.consumed.extend(later.consumed.iter().copied());
    }
}

/// An L2 with a single ETH bridge contract at `bridge`, paired with the L1
/// bridge at `l1_bridge`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarkL2 {
    pub state: StarkState,
    pub bridge: Word,
    pub l1_bridge: Address,
}

impl StarkL2 {
    pub fn genesis_diff(bridge: Word) -> StateDiff {
        let mut d = StateDiff::new();
        d.deploy(Deployment { address: bridge, contract_hash: token_bridge_class(), constructor_args: Vec::new() });
        d
    }

    pub fn new(bridge: Word, l1_bridge: Address) -> Self {
        let mut state = StarkState::default();
        state.apply(&Self::genesis_diff(bridge));
        Self { state, bridge, l1_bridge }
    }

    pub fn balance(&self, user: &Word) -> u128 {
        self.state.read(&self.bridge, &balance_key(user)).to_u128().unwrap_or(u128::MAX)
    }

    /// Applies `tx` if it succeeds; a failing transaction changes nothing.
    pub fn execute(&mut self, tx: &StarkTx) -> Result<Effects, ValidityError> {
        let mut fx = Effects::default();
        match tx {
            StarkTx::L1Handler(msg) => {
                self.dispatch_l1_handler(msg, &mut fx)?;
                fx.consumed.push(msg.hash());
            }
            StarkTx::Transfer { from, to, amount } => {
                let a = self.balance_in(&fx, from).checked_sub(*amount).ok_or(ValidityError::InsufficientL2Balance)?;
                self.write_balance(from, a, &mut fx);
                let b = self.balance_in(&fx, to).checked_add(*amount).ok_or(ValidityError::InsufficientL2Balance)?;
                self.write_balance(to, b, &mut fx);
            }
            StarkTx::Withdraw { user, recipient, amount } => {
                let left = self.balance(user).checked_sub(*amount).ok_or(ValidityError::InsufficientL2Balance)?;
                self.write_balance(user, left, &mut fx);
                fx.sent.push(L2ToL1Message { from: self.bridge, to: self.l1_bridge, payload: withdraw_payload(recipient, *amount) });
            }
        }
        self.state.apply(&fx.diff);
        Ok(fx)
    }

    /// Balance as seen by a transaction that has already written `fx`.
    fn balance_in(&self, fx: &Effects, user: &Word) -> u128 {
        match fx.diff.get(&self.bridge, &balance_key(user)) {
            Some(w) => w.to_u128().unwrap_or(u128::MAX),
            None => self.balance(user),
        }
    }

    fn write_balance(&self, user: &Word, amount: u128, fx: &mut Effects) {
        fx.diff.write(self.bridge, balance_key(user), Word::from_u128(amount));
    }

    /// Routes `msg` to the handler registered under its selector; the
    /// handler receives the L1 sender first.
    fn dispatch_l1_handler(&self, msg: &L1ToL2Message, fx: &mut Effects) -> Result<(), ValidityError> {
        if msg.to != self.bridge || msg.selector != selector_from_name("deposit")? {
            return Err(ValidityError::NoHandler { contract: msg.to, selector: msg.selector });
        }
        self.deposit(&address_word(&msg.from), &msg.payload, fx)
    }

    /// `@l1_handler deposit(from_address, user, amount)`
    fn deposit(&self, from_address: &Word, payload: &[Word], fx: &mut Effects) -> Result<(), ValidityError> {
        if *from_address != address_word(&self.l1_bridge) {
            return Err(ValidityError::HandlerAssertion("from_address != L1_CONTRACT_ADDRESS".into()));
        }
        let [user, amount] = payload else {
            return Err(ValidityError::HandlerAssertion("deposit expects (user, amount)".into()));
        };
        let amount = amount.to_u128().ok_or_else(|| ValidityError::HandlerAssertion("amount out of range".into()))?;
        let res = self.balance(user);
        let new_balance = res.checked_add(amount).ok_or_else(|| ValidityError::HandlerAssertion("balance overflow".into()))?;
        self.write_balance(user, new_balance, fx);
        Ok(())
    }
}
