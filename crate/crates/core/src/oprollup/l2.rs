//! L2 execution model. Transactions are simulated transfers, slot writes
//! and withdrawals; the sequencer is trusted for authenticity, so user
//! transactions carry no signature.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::deposit::DepositedTx;
use super::rlp::Rlp;
use super::OpError;
use crate::l1sim::abi::Encoder;
use crate::l1sim::L1Attributes;
use crate::merkle::{MerkleProof, MerkleTree};
use crate::primitives::{hex_bytes, keccak256, keccak_concat, Address, Word, B256};

pub const L1_ATTRIBUTES_DEPOSITOR: Address = Address([
    0xde, 0xad, 0xde, 0xad, 0xde, 0xad, 0xde, 0xad, 0xde, 0xad, 0xde, 0xad, 0xde, 0xad, 0xde, 0xad, 0xde, 0xad, 0x00, 0x01,
]);
pub const L1_BLOCK_PREDEPLOY: Address = Address([
    0x42, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x15,
]);
pub const MESSAGE_PASSER: Address = Address([0x42, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);

const TX_TRANSFER: u8 = 0x01;
const TX_STORE: u8 = 0x02;
const TX_WITHDRAW: u8 = 0x03;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WithdrawalTx {
    pub nonce: u64,
    pub sender: Address,
    pub target: Address,
    pub value: u128,
    pub gas_limit: u64,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
}

impl WithdrawalTx {
    pub fn hash(&self) -> B256 {
        keccak256(
            Encoder::new()
                .u64(self.nonce)
                .address(self.sender)
                .address(self.target)
                .u128(self.value)
                .u64(self.gas_limit)
                .bytes(&self.data)
                .finish(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UserTx {
    Transfer { from: Address, to: Address, value: u128 },
    Store { from: Address, key: Word, value: Word },
    Withdraw {
        from: Address,
        target: Address,
        value: u128,
        gas_limit: u64,
        #[serde(with = "hex_bytes")]
        data: Vec<u8>,
    },
}

impl UserTx {
    pub fn from(&self) -> Address {
        match self {
            UserTx::Transfer { from, .. } | UserTx::Store { from, .. } | UserTx::Withdraw { from, .. } => *from,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (ty, fields) = match self {
            UserTx::Transfer { from, to, value } => {
                (TX_TRANSFER, vec![Rlp::bytes(from.0.to_vec()), Rlp::bytes(to.0.to_vec()), Rlp::uint(*value)])
            }
            UserTx::Store { from, key, value } => {
                (TX_STORE, vec![Rlp::bytes(from.0.to_vec()), Rlp::bytes(key.0.to_vec()), Rlp::bytes(value.0.to_vec())])
            }
            UserTx::Withdraw { from, target, value, gas_limit, data } => (
                TX_WITHDRAW,
                vec![
                    Rlp::bytes(from.0.to_vec()),
                    Rlp::bytes(target.0.to_vec()),
                    Rlp::uint(*value),
                    Rlp::uint(*gas_limit as u128),
                    Rlp::bytes(data.clone()),
                ],
            ),
        };
        let mut out = vec![ty];
        out.extend(Rlp::List(fields).encode());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, OpError> {
        let (ty, body) = bytes.split_first().ok_or_else(|| OpError::MalformedTx("empty".into()))?;
        let item = Rlp::decode(body)?;
        let word = |r: &Rlp| -> Result<Word, OpError> {
            Ok(Word(r.as_bytes()?.try_into().map_err(|_| OpError::MalformedTx("expected 32-byte word".into()))?))
        };
        match *ty {
            TX_TRANSFER => {
                let f = item.as_fields(3)?;
                Ok(UserTx::Transfer { from: f[0].as_address()?, to: f[1].as_address()?, value: f[2].as_uint()? })
            }
            TX_STORE => {
                let f = item.as_fields(3)?;
                Ok(UserTx::Store { from: f[0].as_address()?, key: word(&f[1])?, value: word(&f[2])? })
            }
            TX_WITHDRAW => {
                let f = item.as_fields(5)?;
                Ok(UserTx::Withdraw {
                    from: f[0].as_address()?,
                    target: f[1].as_address()?,
                    value: f[2].as_uint()?,
                    gas_limit: f[3].as_u64()?,
                    data: f[4].as_bytes()?.to_vec(),
                })
            }
            t => Err(OpError::MalformedTx(format!("unknown transaction type {t:#04x}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L2Tx {
    Deposit(DepositedTx),
    User(UserTx),
}

impl L2Tx {
    pub fn encode(&self) -> Vec<u8> {
        match self {
            L2Tx::Deposit(d) => d.encode(),
            L2Tx::User(u) => u.encode(),
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, OpError> {
        match bytes.first() {
            Some(&super::deposit::DEPOSIT_TX_TYPE) => DepositedTx::decode(bytes).map(L2Tx::Deposit),
            _ => UserTx::decode(bytes).map(L2Tx::User),
        }
    }

    pub fn hash(&self) -> B256 {
        keccak256(self.encode())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct L2State {
    pub balances: BTreeMap<Address, u128>,
    pub nonces: BTreeMap<Address, u64>,
    pub storage: BTreeMap<Address, BTreeMap<Word, Word>>,
    /// Sent-message set of the message passer, in initiation order.
    pub withdrawals: Vec<WithdrawalTx>,
    pub message_nonce: u64,
    pub l1_attributes: Option<L1Attributes>,
}

fn creation_address(from: &Address, nonce: u64) -> Address {
    let h = keccak_concat([from.as_bytes(), &nonce.to_be_bytes()]);
    Address(h.0[12..].try_into().unwrap())
}

impl L2State {
    pub fn with_alloc(alloc: &BTreeMap<Address, u128>) -> Self {
        Self { balances: alloc.clone(), ..Default::default() }
    }

    pub fn balance(&self, a: &Address) -> u128 {
        self.balances.get(a).copied().unwrap_or(0)
    }

    pub fn nonce(&self, a: &Address) -> u64 {
        self.nonces.get(a).copied().unwrap_or(0)
    }

    pub fn slot(&self, a: &Address, key: &Word) -> Word {
        self.storage.get(a).and_then(|s| s.get(key)).copied().unwrap_or_default()
    }

    fn bump_nonce(&mut self, a: Address) {
        *self.nonces.entry(a).or_default() += 1;
    }

    fn debit(&mut self, a: &Address, amount: u128) -> Result<(), OpError> {
        let balance = self.balance(a);
        if balance < amount {
            return Err(OpError::InsufficientFunds { balance, needed: amount });
        }
        self.balances.insert(*a, balance - amount);
        Ok(())
    }

    fn credit(&mut self, a: Address, amount: u128) {
        let b = self.balances.entry(a).or_default();
        *b = b.saturating_add(amount);
    }

    pub fn is_sent(&self, withdrawal_hash: &B256) -> bool {
        self.withdrawals.iter().any(|w| w.hash() == *withdrawal_hash)
    }

    /// Root over the first `count` sent-message hashes; zero when empty.
    pub fn message_root_at(&self, count: usize) -> B256 {
        let hashes: Vec<B256> = self.withdrawals[..count].iter().map(WithdrawalTx::hash).collect();
        match MerkleTree::build(&hashes) {
            Ok(t) => t.root(),
            Err(_) => B256::ZERO,
        }
    }

    pub fn message_root(&self) -> B256 {
        self.message_root_at(self.withdrawals.len())
    }

    pub fn state_root(&self) -> B256 {
        #[derive(Serialize)]
        struct Commit<'a> {
            balances: &'a BTreeMap<Address, u128>,
            nonces: &'a BTreeMap<Address, u64>,
            storage: &'a BTreeMap<Address, BTreeMap<Word, Word>>,
            messages: B256,
            l1: &'a Option<L1Attributes>,
        }
        let c = Commit {
            balances: &self.balances,
            nonces: &self.nonces,
            storage: &self.storage,
            messages: self.message_root(),
            l1: &self.l1_attributes,
        };
        keccak256(serde_json::to_vec(&c).expect("state serializes"))
    }

    /// Applies a user transaction, leaving the state untouched on failure.
    pub fn apply_user(&mut self, tx: &UserTx) -> Result<(), OpError> {
        match tx {
            UserTx::Transfer { from, to, value } => {
                self.debit(from, *value)?;
                self.credit(*to, *value);
            }
            UserTx::Store { from, key, value } => {
                let s = self.storage.entry(*from).or_default();
                if value.is_zero() {
                    s.remove(key);
                } else {
                    s.insert(*key, *value);
                }
            }
            UserTx::Withdraw { from, target, value, gas_limit, data } => {
                initiate_withdrawal(self, *from, *target, *gas_limit, *value, data.clone())?;
                return Ok(());
            }
        }
        self.bump_nonce(tx.from());
        Ok(())
    }
}

/// Deposits always take effect: the mint sticks even when the value
/// transfer fails.
pub fn apply_deposit(state: &mut L2State, d: &DepositedTx) {
    if d.from == L1_ATTRIBUTES_DEPOSITOR && d.to == Some(L1_BLOCK_PREDEPLOY) {
        if let Ok(attrs) = DepositedTx::decode_attributes(&d.data) {
            state.l1_attributes = Some(attrs);
        }
        state.bump_nonce(d.from);
        return;
    }
    state.credit(d.from, d.mint);
    let target = d.to.unwrap_or_else(|| creation_address(&d.from, state.nonce(&d.from)));
    if state.debit(&d.from, d.value).is_ok() {
        state.credit(target, d.value);
    }
    state.bump_nonce(d.from);
}

/// Records a withdrawal in the sent-message set. The value leaves the
/// sender's L2 balance.
pub fn initiate_withdrawal(
    state: &mut L2State,
    sender: Address,
    target: Address,
    gas_limit: u64,
    value: u128,
    data: Vec<u8>,
) -> Result<WithdrawalTx, OpError> {
    state.debit(&sender, value)?;
    let w = WithdrawalTx { nonce: state.message_nonce, sender, target, value, gas_limit, data };
    state.message_nonce += 1;
    state.withdrawals.push(w.clone());
    state.bump_nonce(sender);
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct L2Block {
    pub number: u64,
    pub timestamp: u64,
    pub epoch: u64,
    pub sequence_number: u64,
    pub parent_hash: B256,
    pub hash: B256,
    pub transactions: Vec<L2Tx>,
    pub state_root: B256,
    pub message_root: B256,
    /// Size of the sent-message set after this block.
    pub message_count: usize,
}

impl L2Block {
    pub(crate) fn seal(
        number: u64,
        timestamp: u64,
        epoch: u64,
        sequence_number: u64,
        parent_hash: B256,
        transactions: Vec<L2Tx>,
        state: &L2State,
    ) -> Self {
        let state_root = state.state_root();
        let tx_root = keccak_concat(transactions.iter().map(|t| t.hash()).collect::<Vec<_>>().iter().map(|h| h.as_bytes()));
        let hash = keccak_concat([
            parent_hash.as_bytes(),
            &number.to_be_bytes(),
            &timestamp.to_be_bytes(),
            &epoch.to_be_bytes(),
            tx_root.as_bytes(),
            state_root.as_bytes(),
        ]);
        Self {
            number,
            timestamp,
            epoch,
            sequence_number,
            parent_hash,
            hash,
            transactions,
            state_root,
            message_root: state.message_root(),
            message_count: state.withdrawals.len(),
        }
    }

    pub fn output_root_proof(&self) -> OutputRootProof {
        OutputRootProof {
            version: B256::ZERO,
            state_root: self.state_root,
            message_passer_root: self.message_root,
            latest_blockhash: self.hash,
        }
    }
}

/// The four words hashed into an output root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRootProof {
    pub version: B256,
    pub state_root: B256,
    pub message_passer_root: B256,
    pub latest_blockhash: B256,
}

impl OutputRootProof {
    pub fn hash(&self) -> B256 {
        keccak_concat([
            self.version.as_bytes(),
            self.state_root.as_bytes(),
            self.message_passer_root.as_bytes(),
            self.latest_blockhash.as_bytes(),
        ])
    }
}

pub fn output_root(proof: &OutputRootProof) -> B256 {
    proof.hash()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct L2Chain {
    pub blocks: Vec<L2Block>,
    pub state: L2State,
}

impl L2Chain {
    pub fn head(&self) -> Option<&L2Block> {
        self.blocks.last()
    }

    pub fn block(&self, number: u64) -> Option<&L2Block> {
        self.blocks.get(number as usize)
    }

    /// Hash of the head block, or zero for an empty chain.
    pub fn hash(&self) -> B256 {
        self.head().map(|b| b.hash).unwrap_or(B256::ZERO)
    }

    pub fn output_root(&self, number: u64) -> Option<B256> {
        self.block(number).map(|b| b.output_root_proof().hash())
    }

    /// Inclusion proof of `withdrawal_hash` in the sent-message root of
    /// block `number`.
    pub fn withdrawal_proof(&self, number: u64, withdrawal_hash: &B256) -> Result<MerkleProof, OpError> {
        let block = self.block(number).ok_or(OpError::OutputNotFound(number))?;
        let hashes: Vec<B256> = self.state.withdrawals[..block.message_count].iter().map(WithdrawalTx::hash).collect();
        let index = hashes.iter().position(|h| h == withdrawal_hash).ok_or(OpError::InvalidWithdrawalProof)?;
        Ok(MerkleTree::build(&hashes)?.prove(index)?)
    }

    /// First block whose sent-message set contains the withdrawal.
    pub fn withdrawal_block(&self, withdrawal_hash: &B256) -> Option<u64> {
        let pos = self.state.withdrawals.iter().position(|w| w.hash() == *withdrawal_hash)?;
        self.blocks.iter().find(|b| b.message_count > pos).map(|b| b.number)
    }
}
