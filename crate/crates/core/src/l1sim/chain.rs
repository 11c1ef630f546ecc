use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::abi::AbiError;
use super::{GasSchedule, L1Error, StoreCost, StoreTransition, GWEI};
use crate::primitives::{hex_bytes, keccak256, keccak_concat, Address, Word, B256};

const MAX_CALL_DEPTH: usize = 64;

/// Handler failure; the transaction's effects are rolled back.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct Revert(pub String);

impl Revert {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl From<AbiError> for Revert {
    fn from(e: AbiError) -> Self {
        Self(e.to_string())
    }
}

/// Behavior of a native contract. Implementors also get [`Contract`] for
/// free when they are `Clone + Serialize + DeserializeOwned`.
pub trait Handler {
    fn call(&mut self, ctx: &mut CallContext<'_>, data: &[u8]) -> Result<Vec<u8>, Revert>;
}

pub trait Contract: Send {
    fn call(&mut self, ctx: &mut CallContext<'_>, data: &[u8]) -> Result<Vec<u8>, Revert>;
    fn clone_box(&self) -> Box<dyn Contract>;
    fn save(&self) -> serde_json::Value;
    fn load(&mut self, state: &serde_json::Value) -> Result<(), String>;
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

impl<T> Contract for T
where
    T: Handler + Clone + Serialize + DeserializeOwned + Send + 'static,
{
    fn call(&mut self, ctx: &mut CallContext<'_>, data: &[u8]) -> Result<Vec<u8>, Revert> {
        Handler::call(self, ctx, data)
    }

    fn clone_box(&self) -> Box<dyn Contract> {
        Box::new(self.clone())
    }

    fn save(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("contract state is plain data")
    }

    fn load(&mut self, state: &serde_json::Value) -> Result<(), String> {
        *self = T::deserialize(state).map_err(|e| e.to_string())?;
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

#[derive(Default)]
struct World {
    accounts: BTreeSet<Address>,
    balances: BTreeMap<Address, u128>,
    nonces: BTreeMap<Address, u64>,
    storage: BTreeMap<Address, BTreeMap<Word, Word>>,
    contracts: BTreeMap<Address, Box<dyn Contract>>,
}

impl Clone for World {
    fn clone(&self) -> Self {
        Self {
            accounts: self.accounts.clone(),
            balances: self.balances.clone(),
            nonces: self.nonces.clone(),
            storage: self.storage.clone(),
            contracts: self.contracts.iter().map(|(a, c)| (*a, c.clone_box())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct WorldDump {
    accounts: BTreeSet<Address>,
    balances: BTreeMap<Address, u128>,
    nonces: BTreeMap<Address, u64>,
    storage: BTreeMap<Address, BTreeMap<Word, Word>>,
    contracts: BTreeMap<Address, serde_json::Value>,
}

impl World {
    fn dump(&self) -> WorldDump {
        WorldDump {
            accounts: self.accounts.clone(),
            balances: self.balances.clone(),
            nonces: self.nonces.clone(),
            storage: self.storage.clone(),
            contracts: self.contracts.iter().map(|(a, c)| (*a, c.save())).collect(),
        }
    }

    fn balance(&self, a: &Address) -> u128 {
        self.balances.get(a).copied().unwrap_or(0)
    }

    fn move_value(&mut self, from: Address, to: Address, amount: u128) -> Result<(), Revert> {
        if amount == 0 {
            return Ok(());
        }
        let have = self.balance(&from);
        if have < amount {
            return Err(Revert::new("insufficient balance for transfer"));
        }
        self.balances.insert(from, have - amount);
        let dest = self.balance(&to);
        self.balances.insert(to, dest.checked_add(amount).ok_or_else(|| Revert::new("balance overflow"))?);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct BlockEnv {
    number: u64,
    timestamp: u64,
    basefee: u128,
}

struct Exec {
    world: World,
    warm: BTreeSet<(Address, Word)>,
    modified: BTreeSet<(Address, Word)>,
    logs: Vec<(Address, String, Vec<u8>)>,
    env: BlockEnv,
    schedule: GasSchedule,
    origin: Address,
    gas_limit: u64,
    gas_used: u64,
}

/// View of the chain handed to a contract for the duration of one call.
pub struct CallContext<'a> {
    exec: &'a mut Exec,
    address: Address,
    caller: Address,
    value: u128,
    depth: usize,
}

impl CallContext<'_> {
    pub fn address(&self) -> Address {
        self.address
    }

    pub fn caller(&self) -> Address {
        self.caller
    }

    pub fn origin(&self) -> Address {
        self.exec.origin
    }

    pub fn value(&self) -> u128 {
        self.value
    }

    /// Nested calls always come from a contract, which is checked out of
    /// the world while it runs.
    pub fn caller_is_contract(&self) -> bool {
        self.depth > 0 || self.is_contract(&self.caller)
    }

    pub fn is_contract(&self, a: &Address) -> bool {
        self.exec.world.contracts.contains_key(a) || *a == self.address
    }

    pub fn block_number(&self) -> u64 {
        self.exec.env.number
    }

    pub fn timestamp(&self) -> u64 {
        self.exec.env.timestamp
    }

    pub fn basefee(&self) -> u128 {
        self.exec.env.basefee
    }

    pub fn gas_used(&self) -> u64 {
        self.exec.gas_used
    }

    pub fn gas_left(&self) -> u64 {
        self.exec.gas_limit.saturating_sub(self.exec.gas_used)
    }

    pub fn charge(&mut self, gas: u64) -> Result<(), Revert> {
        let total = self.exec.gas_used.saturating_add(gas);
        if total > self.exec.gas_limit {
            self.exec.gas_used = self.exec.gas_limit;
            return Err(Revert::new("out of gas"));
        }
        self.exec.gas_used = total;
        Ok(())
    }

    pub fn sload(&self, slot: Word) -> Word {
        self.exec.world.storage.get(&self.address).and_then(|s| s.get(&slot)).copied().unwrap_or_default()
    }

    /// Writes a slot of the executing contract, charging the storage table.
    pub fn sstore(&mut self, slot: Word, value: Word) -> Result<StoreCost, Revert> {
        let key = (self.address, slot);
        let current = self.sload(slot);
        let transition =
            StoreTransition::classify(current.is_zero(), value.is_zero(), current == value, self.exec.modified.contains(&key));
        let cost = self.exec.schedule.sstore_gas(transition, !self.exec.warm.contains(&key));
        self.charge(cost.gas)?;
        self.exec.warm.insert(key);
        self.exec.modified.insert(key);
        let store = self.exec.world.storage.entry(self.address).or_default();
        if value.is_zero() {
            store.remove(&slot);
        } else {
            store.insert(slot, value);
        }
        Ok(cost)
    }

    pub fn emit(&mut self, name: &str, payload: Vec<u8>) {
        self.exec.logs.push((self.address, name.to_owned(), payload));
    }

    pub fn balance(&self, a: &Address) -> u128 {
        self.exec.world.balance(a)
    }

    /// Moves ether out of the executing contract.
    pub fn transfer(&mut self, to: Address, amount: u128) -> Result<(), Revert> {
        self.exec.world.move_value(self.address, to, amount)
    }

    /// Calls another contract, or pays an account. A failed callee is rolled
    /// back on its own and reported to the caller, which may carry on.
    pub fn call(&mut self, to: Address, data: &[u8], value: u128) -> Result<Vec<u8>, Revert> {
        if self.depth + 1 >= MAX_CALL_DEPTH {
            return Err(Revert::new("call depth exceeded"));
        }
        let saved_world = self.exec.world.clone();
        let saved_logs = self.exec.logs.len();
        let saved_modified = self.exec.modified.clone();
        let saved_warm = self.exec.warm.clone();
        let result = self.exec.world.move_value(self.address, to, value).and_then(|_| {
            match self.exec.world.contracts.remove(&to) {
                Some(mut callee) => {
                    let mut child =
                        CallContext { exec: &mut *self.exec, address: to, caller: self.address, value, depth: self.depth + 1 };
                    let out = callee.call(&mut child, data);
                    self.exec.world.contracts.insert(to, callee);
                    out
                }
                None if to == self.address => Err(Revert::new("reentrant call")),
                None => {
                    self.exec.world.accounts.insert(to);
                    Ok(Vec::new())
                }
            }
        });
        if result.is_err() {
            self.exec.world = saved_world;
            self.exec.logs.truncate(saved_logs);
            self.exec.modified = saved_modified;
            self.exec.warm = saved_warm;
        }
        result
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub from: Address,
    pub to: Address,
    pub value: u128,
    pub gas_limit: u64,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
    /// Assigned on submission.
    pub nonce: u64,
}

impl Transaction {
    pub const DEFAULT_GAS_LIMIT: u64 = 30_000_000;

    pub fn new(from: Address, to: Address, data: Vec<u8>) -> Self {
        Self { from, to, value: 0, gas_limit: Self::DEFAULT_GAS_LIMIT, data, nonce: 0 }
    }

    pub fn with_value(mut self, value: u128) -> Self {
        self.value = value;
        self
    }

    pub fn with_gas_limit(mut self, gas_limit: u64) -> Self {
        self.gas_limit = gas_limit;
        self
    }

    pub fn hash(&self) -> B256 {
        keccak_concat([
            self.from.as_bytes(),
            self.to.as_bytes(),
            &Word::from_u128(self.value).0,
            &self.gas_limit.to_be_bytes(),
            &self.nonce.to_be_bytes(),
            keccak256(&self.data).as_bytes(),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxStatus {
    Success,
    Reverted(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub address: Address,
    pub name: String,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
    pub block_number: u64,
    /// Position among the block's events.
    pub log_index: u64,
    pub tx_index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_hash: B256,
    pub block_number: u64,
    pub tx_index: u64,
    pub status: TxStatus,
    pub gas_used: u64,
    #[serde(with = "hex_bytes")]
    pub output: Vec<u8>,
    pub logs: Vec<Event>,
}

impl Receipt {
    pub fn succeeded(&self) -> bool {
        self.status == TxStatus::Success
    }

    pub fn revert_reason(&self) -> Option<&str> {
        match &self.status {
            TxStatus::Reverted(r) => Some(r),
            TxStatus::Success => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct L1Block {
    pub number: u64,
    pub timestamp: u64,
    pub basefee: u128,
    pub parent_hash: B256,
    pub hash: B256,
    pub gas_used: u64,
    pub transactions: Vec<Transaction>,
}

impl L1Block {
    fn seal(env: BlockEnv, parent_hash: B256, gas_used: u64, transactions: Vec<Transaction>) -> Self {
        let tx_hashes: Vec<B256> = transactions.iter().map(Transaction::hash).collect();
        let tx_root = keccak_concat(tx_hashes.iter().map(|h| h.as_bytes()));
        let hash = keccak_concat([
            &env.number.to_be_bytes()[..],
            &env.timestamp.to_be_bytes(),
            &env.basefee.to_be_bytes(),
            parent_hash.as_bytes(),
            &gas_used.to_be_bytes(),
            tx_root.as_bytes(),
        ]);
        Self { number: env.number, timestamp: env.timestamp, basefee: env.basefee, parent_hash, hash, gas_used, transactions }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub block_time: u64,
    pub genesis_timestamp: u64,
    /// Basefee of block `n` is entry `min(n, len − 1)`.
    pub basefees: Vec<u128>,
    pub gas: GasSchedule,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { block_time: 12, genesis_timestamp: 1_700_000_000, basefees: vec![10 * GWEI], gas: GasSchedule::default() }
    }
}

impl ChainConfig {
    fn basefee(&self, number: u64) -> u128 {
        match self.basefees.len() {
            0 => 0,
            n => self.basefees[(number as usize).min(n - 1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Pending {
    env: BlockEnv,
    transactions: Vec<Transaction>,
    gas_used: u64,
    log_count: u64,
}

/// Serializable snapshot of a chain. Contract code is not part of it; restore
/// into a chain with the same contracts deployed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDump {
    config: ChainConfig,
    blocks: Vec<L1Block>,
    receipts: Vec<Receipt>,
    events: Vec<Event>,
    world: WorldDump,
    warm: Vec<(Address, Word)>,
    pending: Pending,
}

/// Linear chain with one open block. Transactions execute immediately in
/// submission order against the open block; gas is accounted, not paid.
pub struct L1Chain {
    config: ChainConfig,
    blocks: Vec<L1Block>,
    receipts: Vec<Receipt>,
    events: Vec<Event>,
    world: World,
    warm: BTreeSet<(Address, Word)>,
    pending: Pending,
}

impl Default for L1Chain {
    fn default() -> Self {
        Self::new(ChainConfig::default())
    }
}

impl L1Chain {
    pub fn new(config: ChainConfig) -> Self {
        let genesis_env = BlockEnv { number: 0, timestamp: config.genesis_timestamp, basefee: config.basefee(0) };
        let genesis = L1Block::seal(genesis_env, B256::ZERO, 0, Vec::new());
        let pending = Pending {
            env: BlockEnv { number: 1, timestamp: genesis.timestamp + config.block_time, basefee: config.basefee(1) },
            transactions: Vec::new(),
            gas_used: 0,
            log_count: 0,
        };
        Self {
            config,
            blocks: vec![genesis],
            receipts: Vec::new(),
            events: Vec::new(),
            world: World::default(),
            warm: BTreeSet::new(),
            pending,
        }
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn create_account(&mut self, a: Address, balance: u128) -> Result<(), L1Error> {
        if self.world.contracts.contains_key(&a) {
            return Err(L1Error::AddressInUse(a));
        }
        self.world.accounts.insert(a);
        *self.world.balances.entry(a).or_default() += balance;
        Ok(())
    }

    pub fn deploy(&mut self, a: Address, contract: impl Contract + 'static) -> Result<(), L1Error> {
        if self.world.contracts.contains_key(&a) || self.world.accounts.contains(&a) {
            return Err(L1Error::AddressInUse(a));
        }
        self.world.contracts.insert(a, Box::new(contract));
        Ok(())
    }

    pub fn contract<T: 'static>(&self, a: &Address) -> Option<&T> {
        self.world.contracts.get(a)?.as_any().downcast_ref()
    }

    pub fn contract_mut<T: 'static>(&mut self, a: &Address) -> Option<&mut T> {
        self.world.contracts.get_mut(a)?.as_any_mut().downcast_mut()
    }

    pub fn is_contract(&self, a: &Address) -> bool {
        self.world.contracts.contains_key(a)
    }

    pub fn balance(&self, a: &Address) -> u128 {
        self.world.balance(a)
    }

    pub fn storage(&self, a: &Address, slot: Word) -> Word {
        self.world.storage.get(a).and_then(|s| s.get(&slot)).copied().unwrap_or_default()
    }

    pub fn submit_tx(&mut self, from: Address, to: Address, data: Vec<u8>, value: u128) -> Result<Receipt, L1Error> {
        self.submit(Transaction::new(from, to, data).with_value(value))
    }

    /// Executes `tx` in the open block. Errors mean the transaction is not
    /// includable; handler failures give a reverted receipt instead.
    pub fn submit(&mut self, mut tx: Transaction) -> Result<Receipt, L1Error> {
        if !self.world.accounts.contains(&tx.from) {
            return Err(L1Error::UnknownAddress(tx.from));
        }
        if !self.world.accounts.contains(&tx.to) && !self.world.contracts.contains_key(&tx.to) {
            return Err(L1Error::UnknownAddress(tx.to));
        }
        let balance = self.world.balance(&tx.from);
        if balance < tx.value {
            return Err(L1Error::InsufficientBalance { balance, value: tx.value });
        }
        tx.nonce = self.world.nonces.get(&tx.from).copied().unwrap_or(0);
        let tx_hash = tx.hash();
        let tx_index = self.pending.transactions.len() as u64;

        let saved = self.world.clone();
        let mut exec = Exec {
            world: std::mem::take(&mut self.world),
            warm: std::mem::take(&mut self.warm),
            modified: BTreeSet::new(),
            logs: Vec::new(),
            env: self.pending.env,
            schedule: self.config.gas.clone(),
            origin: tx.from,
            gas_limit: tx.gas_limit,
            gas_used: 0,
        };
        let saved_warm = exec.warm.clone();
        let intrinsic = exec.schedule.tx_base + exec.schedule.calldata_gas(&tx.data);
        let result = {
            let mut ctx = CallContext { exec: &mut exec, address: tx.to, caller: tx.from, value: tx.value, depth: 0 };
            ctx.charge(intrinsic).and_then(|_| {
                ctx.exec.world.move_value(tx.from, tx.to, tx.value)?;
                match ctx.exec.world.contracts.remove(&tx.to) {
                    Some(mut c) => {
                        let out = c.call(&mut ctx, &tx.data);
                        ctx.exec.world.contracts.insert(tx.to, c);
                        out
                    }
                    None => Ok(Vec::new()),
                }
            })
        };
        let gas_used = exec.gas_used;
        let (status, output, logs) = match result {
            Ok(out) => {
                self.world = exec.world;
                self.warm = exec.warm;
                let logs: Vec<Event> = exec
                    .logs
                    .into_iter()
                    .map(|(address, name, data)| {
                        let log_index = self.pending.log_count;
                        self.pending.log_count += 1;
                        Event { address, name, data, block_number: self.pending.env.number, log_index, tx_index }
                    })
                    .collect();
                (TxStatus::Success, out, logs)
            }
            Err(r) => {
                self.world = saved;
                self.warm = saved_warm;
                (TxStatus::Reverted(r.0), Vec::new(), Vec::new())
            }
        };
        *self.world.nonces.entry(tx.from).or_default() += 1;
        self.events.extend(logs.iter().cloned());
        self.pending.gas_used += gas_used;
        self.pending.transactions.push(tx);
        let receipt = Receipt { tx_hash, block_number: self.pending.env.number, tx_index, status, gas_used, output, logs };
        self.receipts.push(receipt.clone());
        Ok(receipt)
    }

    /// Seals the open block and opens the next one `block_time` later.
    pub fn mine_block(&mut self) -> &L1Block {
        let next_number = self.pending.env.number + 1;
        let next = Pending {
            env: BlockEnv {
                number: next_number,
                timestamp: self.pending.env.timestamp + self.config.block_time,
                basefee: self.config.basefee(next_number),
            },
            transactions: Vec::new(),
            gas_used: 0,
            log_count: 0,
        };
        let done = std::mem::replace(&mut self.pending, next);
        let parent = self.head().hash;
        self.blocks.push(L1Block::seal(done.env, parent, done.gas_used, done.transactions));
        self.warm.clear();
        self.blocks.last().unwrap()
    }

    pub fn mine_blocks(&mut self, n: u64) {
        for _ in 0..n {
            self.mine_block();
        }
    }

    /// Moves the open block's timestamp; only allowed before it holds any
    /// transaction.
    pub fn set_next_timestamp(&mut self, timestamp: u64) -> Result<(), L1Error> {
        let head = self.head().timestamp;
        if timestamp < head || !self.pending.transactions.is_empty() {
            return Err(L1Error::TimestampRegression { requested: timestamp, head: self.pending.env.timestamp });
        }
        self.pending.env.timestamp = timestamp;
        Ok(())
    }

    pub fn head(&self) -> &L1Block {
        self.blocks.last().unwrap()
    }

    pub fn block(&self, number: u64) -> Option<&L1Block> {
        self.blocks.get(number as usize)
    }

    pub fn blocks(&self) -> &[L1Block] {
        &self.blocks
    }

    pub fn pending_number(&self) -> u64 {
        self.pending.env.number
    }

    pub fn pending_timestamp(&self) -> u64 {
        self.pending.env.timestamp
    }

    pub fn receipts(&self) -> &[Receipt] {
        &self.receipts
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, block_number: u64, log_index: u64) -> Option<&Event> {
        self.events.iter().find(|e| e.block_number == block_number && e.log_index == log_index)
    }

    pub fn events_in_block(&self, block_number: u64) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.block_number == block_number)
    }

    /// Commitment to balances, nonces, storage and contract state.
    pub fn state_root(&self) -> B256 {
        keccak256(serde_json::to_vec(&self.world.dump()).expect("world dump serializes"))
    }

    pub fn dump(&self) -> ChainDump {
        ChainDump {
            config: self.config.clone(),
            blocks: self.blocks.clone(),
            receipts: self.receipts.clone(),
            events: self.events.clone(),
            world: self.world.dump(),
            warm: self.warm.iter().copied().collect(),
            pending: self.pending.clone(),
        }
    }

    pub fn restore(&mut self, dump: &ChainDump) -> Result<(), L1Error> {
        let have: BTreeSet<_> = self.world.contracts.keys().collect();
        let want: BTreeSet<_> = dump.world.contracts.keys().collect();
        if have != want {
            return Err(L1Error::BadDump("deployed contracts differ from the dump".into()));
        }
        let mut world = self.world.clone();
        for (a, state) in &dump.world.contracts {
            world.contracts.get_mut(a).unwrap().load(state).map_err(L1Error::BadDump)?;
        }
        world.accounts = dump.world.accounts.clone();
        world.balances = dump.world.balances.clone();
        world.nonces = dump.world.nonces.clone();
        world.storage = dump.world.storage.clone();
        self.world = world;
        self.config = dump.config.clone();
        self.blocks = dump.blocks.clone();
        self.receipts = dump.receipts.clone();
        self.events = dump.events.clone();
        self.warm = dump.warm.iter().copied().collect();
        self.pending = dump.pending.clone();
        Ok(())
    }
}
