//! L1 side of the validity rollup: the core contract tracking the proven
//! state root and message counters, the ETH bridge, the sequencer that
//! batches L2 blocks into proofs, and state reconstruction from calldata.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::diff::{bytes_to_words, decode_state_diff, words_to_bytes, StateDiff};
use super::l2::{Effects, StarkL2, StarkState, StarkTx};
use super::messaging::{
    l1_to_l2_hash, l2_to_l1_hash, messages_digest, selector_from_name, withdraw_payload, L1ToL2Message, L2ToL1Message,
};
use super::settle::{trace_transition, verify_transition, Statement, TransitionProver, ValidityProof, VkRecord};
use super::ValidityError;
use crate::l1sim::abi::{selector, Decoder, Encoder};
use crate::l1sim::{CallContext, Handler, L1Chain, Revert};
use crate::primitives::{Address, B256, Word};
use crate::snark::ProofEncoding;

pub const LOG_MESSAGE_TO_L2: &str = "LogMessageToL2";
pub const LOG_MESSAGE_TO_L1: &str = "LogMessageToL1";
pub const CONSUMED_MESSAGE_TO_L1: &str = "ConsumedMessageToL1";
pub const LOG_STATE_UPDATE: &str = "LogStateUpdate";
pub const LOG_DEPOSIT: &str = "LogDeposit";
pub const LOG_WITHDRAWAL: &str = "LogWithdrawal";

/// Address of the ETH bridge contract on L2.
pub const L2_ETH_BRIDGE: Word = Word([
    0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x0e, 0x7b,
]);

fn encode_words(mut e: Encoder, words: &[Word]) -> Encoder {
    e = e.u64(words.len() as u64);
    for w in words {
        e = e.word(*w);
    }
    e
}

fn decode_words(d: &mut Decoder<'_>) -> Result<Vec<Word>, Revert> {
    let n = d.u64()?;
    (0..n).map(|_| d.word().map_err(Revert::from)).collect()
}

/// Everything one `updateState` call carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settlement {
    pub proof: ValidityProof,
    pub diff: Vec<Word>,
    pub sent: Vec<L2ToL1Message>,
    /// Hashes of the L1→L2 messages the batch delivered.
    pub consumed: Vec<B256>,
}

impl Settlement {
    pub fn calldata(&self) -> Vec<u8> {
        let p = &self.proof;
        let mut e = Encoder::call("updateState")
            .b256(p.old_root)
            .b256(p.new_root)
            .b256(p.trace_digest)
            .u64(p.output)
            .bytes(p.snark.p.as_bytes())
            .bytes(p.snark.p_prime.as_bytes())
            .bytes(p.snark.h.as_bytes())
            .bool(p.snark.shifted)
            .bytes(&words_to_bytes(&self.diff))
            .u64(self.sent.len() as u64);
        for m in &self.sent {
            e = encode_words(e.word(m.from).address(m.to), &m.payload);
        }
        e = e.u64(self.consumed.len() as u64);
        for h in &self.consumed {
            e = e.b256(*h);
        }
        e.finish()
    }

    fn decode_args(d: &mut Decoder<'_>) -> Result<Self, Revert> {
        let text = |d: &mut Decoder<'_>| -> Result<String, Revert> {
            String::from_utf8(d.bytes()?).map_err(|_| Revert::new("proof element is not text"))
        };
        let (old_root, new_root, trace_digest, output) = (d.b256()?, d.b256()?, d.b256()?, d.u64()?);
        let snark = ProofEncoding { p: text(d)?, p_prime: text(d)?, h: text(d)?, shifted: d.bool()? };
        let diff = bytes_to_words(&d.bytes()?)?;
        let sent = (0..d.u64()?)
            .map(|_| Ok(L2ToL1Message { from: d.word()?, to: d.address()?, payload: decode_words(d)? }))
            .collect::<Result<_, Revert>>()?;
        let consumed = (0..d.u64()?).map(|_| d.b256().map_err(Revert::from)).collect::<Result<_, _>>()?;
        Ok(Settlement { proof: ValidityProof { old_root, new_root, trace_digest, output, snark }, diff, sent, consumed })
    }

    /// Parses `updateState` calldata; `None` for any other call.
    pub fn from_calldata(data: &[u8]) -> Option<Self> {
        let (sel, mut d) = Decoder::call(data).ok()?;
        if sel != selector("updateState") {
            return None;
        }
        let s = Self::decode_args(&mut d).ok()?;
        d.finish().ok()?;
        Some(s)
    }
}

/// Proven state root, its append-only history, and both message counters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarknetCore {
    pub operator: Address,
    pub vk: VkRecord,
    pub state_root: B256,
    pub state_number: u64,
    pub root_history: Vec<B256>,
    pub l1_to_l2: BTreeMap<B256, u64>,
    pub l2_to_l1: BTreeMap<B256, u64>,
    /// Escrowed message fees, paid to the operator when the message is
    /// delivered, whatever it cost on L2.
    pub fees: BTreeMap<B256, u128>,
    pub nonce: u64,
}

impl StarknetCore {
    pub fn new(operator: Address, vk: VkRecord, genesis_root: B256) -> Self {
        Self {
            operator,
            vk,
            state_root: genesis_root,
            state_number: 0,
            root_history: vec![genesis_root],
            l1_to_l2: BTreeMap::new(),
            l2_to_l1: BTreeMap::new(),
            fees: BTreeMap::new(),
            nonce: 0,
        }
    }

    pub fn l1_to_l2_count(&self, h: &B256) -> u64 {
        self.l1_to_l2.get(h).copied().unwrap_or(0)
    }

    pub fn l2_to_l1_count(&self, h: &B256) -> u64 {
        self.l2_to_l1.get(h).copied().unwrap_or(0)
    }

    pub fn send_calldata(to: Word, selector: Word, payload: &[Word]) -> Vec<u8> {
        encode_words(Encoder::call("sendMessageToL2").word(to).word(selector), payload).finish()
    }

    pub fn consume_calldata(from: Word, payload: &[Word]) -> Vec<u8> {
        encode_words(Encoder::call("consumeMessageFromL2").word(from), payload).finish()
    }

    fn send(&mut self, ctx: &mut CallContext<'_>, to: Word, sel: Word, payload: Vec<Word>) -> B256 {
        let from = ctx.caller();
        let nonce = self.nonce;
        self.nonce += 1;
        let h = l1_to_l2_hash(&from, &to, &sel, &payload, nonce);
        *self.l1_to_l2.entry(h).or_default() += 1;
        *self.fees.entry(h).or_default() += ctx.value();
        let data = encode_words(Encoder::new().address(from).word(to).word(sel).u64(nonce).u128(ctx.value()), &payload).finish();
        ctx.emit(LOG_MESSAGE_TO_L2, data);
        h
    }

    fn consume(&mut self, ctx: &mut CallContext<'_>, from: Word, payload: Vec<Word>) -> Result<B256, Revert> {
        let to = ctx.caller();
        let h = l2_to_l1_hash(&from, &to, &payload);
        match self.l2_to_l1.get_mut(&h) {
            Some(n) if *n > 0 => *n -= 1,
            _ => return Err(ValidityError::InvalidMessageToConsume.into()),
        }
        ctx.emit(CONSUMED_MESSAGE_TO_L1, encode_words(Encoder::new().word(from).address(to), &payload).finish());
        Ok(h)
    }

    /// Verifies the proof, then applies the root and every counter change;
    /// any failure reverts all of it.
    fn update_state(&mut self, ctx: &mut CallContext<'_>, s: Settlement) -> Result<(), Revert> {
        if ctx.caller() != self.operator {
            return Err(ValidityError::Unauthorized(ctx.caller()).into());
        }
        let diff = decode_state_diff(&s.diff)?;
        let st = Statement {
            old_root: self.state_root,
            new_root: s.proof.new_root,
            diff_digest: diff.digest(),
            trace_digest: s.proof.trace_digest,
            messages_digest: messages_digest(&s.sent, &s.consumed),
        };
        verify_transition(&self.vk, &s.proof, &st)?;
        for h in &s.consumed {
            match self.l1_to_l2.get_mut(h) {
                Some(n) if *n > 0 => *n -= 1,
                _ => return Err(ValidityError::UnknownL1Message(*h).into()),
            }
            let fee = self.fees.remove(h).unwrap_or(0);
            ctx.transfer(self.operator, fee)?;
        }
        for m in &s.sent {
            *self.l2_to_l1.entry(m.hash()).or_default() += 1;
            ctx.emit(LOG_MESSAGE_TO_L1, encode_words(Encoder::new().word(m.from).address(m.to), &m.payload).finish());
        }
        self.state_root = s.proof.new_root;
        self.state_number += 1;
        self.root_history.push(self.state_root);
        ctx.emit(LOG_STATE_UPDATE, Encoder::new().b256(self.state_root).u64(self.state_number).finish());
        Ok(())
    }
}

impl Handler for StarknetCore {
    fn call(&mut self, ctx: &mut CallContext<'_>, data: &[u8]) -> Result<Vec<u8>, Revert> {
        let (sel, mut d) = Decoder::call(data)?;
        if sel == selector("sendMessageToL2") {
            let (to, s) = (d.word()?, d.word()?);
            let payload = decode_words(&mut d)?;
            d.finish()?;
            Ok(Encoder::new().b256(self.send(ctx, to, s, payload)).finish())
        } else if sel == selector("consumeMessageFromL2") {
            let from = d.word()?;
            let payload = decode_words(&mut d)?;
            d.finish()?;
            Ok(Encoder::new().b256(self.consume(ctx, from, payload)?).finish())
        } else if sel == selector("updateState") {
            let s = Settlement::decode_args(&mut d)?;
            d.finish()?;
            self.update_state(ctx, s)?;
            Ok(Vec::new())
        } else {
            Err(Revert::new("unknown function selector"))
        }
    }
}

/// L1 half of the ETH bridge: locks deposits and pays out proven
/// withdrawals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EthBridge {
    pub core: Address,
    pub l2_bridge: Word,
}

impl EthBridge {
    /// `value = amount + message fee`.
    pub fn deposit_calldata(user: Word, amount: u128) -> Vec<u8> {
        Encoder::call("deposit").word(user).u128(amount).finish()
    }

    pub fn withdraw_calldata(recipient: Address, amount: u128) -> Vec<u8> {
        Encoder::call("withdraw").address(recipient).u128(amount).finish()
    }
}

impl Handler for EthBridge {
    fn call(&mut self, ctx: &mut CallContext<'_>, data: &[u8]) -> Result<Vec<u8>, Revert> {
        let (sel, mut d) = Decoder::call(data)?;
        if sel == selector("deposit") {
            let (user, amount) = (d.word()?, d.u128()?);
            d.finish()?;
            let fee = ctx.value().checked_sub(amount).ok_or_else(|| Revert::new("value below deposit amount"))?;
            let payload = [user, Word::from_u128(amount)];
            let call = StarknetCore::send_calldata(self.l2_bridge, selector_from_name("deposit")?, &payload);
            let out = ctx.call(self.core, &call, fee)?;
            ctx.emit(LOG_DEPOSIT, Encoder::new().address(ctx.caller()).word(user).u128(amount).finish());
            Ok(out)
        } else if sel == selector("withdraw") {
            let (recipient, amount) = (d.address()?, d.u128()?);
            d.finish()?;
            let call = StarknetCore::consume_calldata(self.l2_bridge, &withdraw_payload(&recipient, amount));
            ctx.call(self.core, &call, 0)?;
            ctx.transfer(recipient, amount)?;
            ctx.emit(LOG_WITHDRAWAL, Encoder::new().address(recipient).u128(amount).finish());
            Ok(Vec::new())
        } else {
            Err(Revert::new("unknown function selector"))
        }
    }
}

impl From<ValidityError> for Revert {
    fn from(e: ValidityError) -> Self {
        Revert(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityAddresses {
    pub core: Address,
    pub bridge: Address,
    pub operator: Address,
}

impl Default for ValidityAddresses {
    fn default() -> Self {
        Self {
            core: Address::from_label("starknet-core"),
            bridge: Address::from_label("starkgate-eth"),
            operator: Address::from_label("starknet-operator"),
        }
    }
}

/// Deploys the core and bridge contracts with the genesis L2 state root.
/// The operator account must already exist.
pub fn deploy(chain: &mut L1Chain, addrs: ValidityAddresses, vk: VkRecord) -> Result<StarkL2, ValidityError> {
    let l2 = StarkL2::new(L2_ETH_BRIDGE, addrs.bridge);
    chain.deploy(addrs.core, StarknetCore::new(addrs.operator, vk, l2.state.root()))?;
    chain.deploy(addrs.bridge, EthBridge { core: addrs.core, l2_bridge: L2_ETH_BRIDGE })?;
    Ok(l2)
}

/// Submits `s` from the operator; returns the new proven root.
pub fn settle(chain: &mut L1Chain, core: Address, operator: Address, s: &Settlement) -> Result<B256, ValidityError> {
    let r = chain.submit_tx(operator, core, s.calldata(), 0)?;
    if let Some(reason) = r.revert_reason() {
        return Err(ValidityError::Reverted(reason.to_owned()));
    }
    Ok(s.proof.new_root)
}

/// Every L1→L2 message the core contract has logged, with its fee.
pub fn messages_to_l2(chain: &L1Chain, core: Address) -> Vec<(L1ToL2Message, u128)> {
    chain
        .events()
        .iter()
        .filter(|e| e.address == core && e.name == LOG_MESSAGE_TO_L2)
        .filter_map(|e| {
            let mut d = Decoder::new(&e.data);
            let (from, to, selector, nonce, fee) = (d.address().ok()?, d.word().ok()?, d.word().ok()?, d.u64().ok()?, d.u128().ok()?);
            let payload = decode_words(&mut d).ok()?;
            Some((L1ToL2Message { from, to, selector, payload, nonce }, fee))
        })
        .collect()
}

/// Rebuilds L2 state by applying, in order, the diffs of every successful
/// `updateState` in the mined chain.
pub fn reconstruct_state(chain: &L1Chain, core: Address, genesis: &StarkState) -> Result<StarkState, ValidityError> {
    let ok: BTreeSet<(u64, u64)> =
        chain.receipts().iter().filter(|r| r.succeeded()).map(|r| (r.block_number, r.tx_index)).collect();
    let mut state = genesis.clone();
    for b in chain.blocks() {
        for (i, tx) in b.transactions.iter().enumerate() {
            if tx.to != core || !ok.contains(&(b.number, i as u64)) {
                continue;
            }
            if let Some(s) = Settlement::from_calldata(&tx.data) {
                state.apply(&decode_state_diff(&s.diff)?);
            }
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofCadence {
    /// A proof after every `n` L2 blocks.
    Blocks(u64),
    /// A proof once `n` seconds have passed since the last one.
    Interval(u64),
}

impl Default for ProofCadence {
    fn default() -> Self {
        ProofCadence::Blocks(10)
    }
}

/// Orders L2 transactions, accumulates their effects since the last
/// settlement, and proves the batch.
#[derive(Debug, Clone)]
pub struct Sequencer {
    pub l2: StarkL2,
    pub cadence: ProofCadence,
    settled: StarkState,
    pending: Effects,
    pending_blocks: u64,
    last_proof_at: u64,
    delivered: BTreeSet<u64>,
}

impl Sequencer {
    pub fn new(l2: StarkL2, cadence: ProofCadence, now: u64) -> Self {
        Self {
            settled: l2.state.clone(),
            l2,
            cadence,
            pending: Effects::default(),
            pending_blocks: 0,
            last_proof_at: now,
            delivered: BTreeSet::new(),
        }
    }

    pub fn settled_state(&self) -> &StarkState {
        &self.settled
    }

    pub fn pending(&self) -> &Effects {
        &self.pending
    }

    /// Handler transactions for L1 messages not yet delivered.
    pub fn poll_l1(&mut self, chain: &L1Chain, core: Address) -> Vec<StarkTx> {
        let mut txs = Vec::new();
        for (m, _) in messages_to_l2(chain, core) {
            if self.delivered.insert(m.nonce) {
                txs.push(StarkTx::L1Handler(m));
            }
        }
        txs
    }

    /// Executes one L2 block; failed transactions are dropped.
    pub fn produce_block(&mut self, txs: &[StarkTx]) -> Vec<Result<(), ValidityError>> {
        let results = txs
            .iter()
            .map(|tx| {
                let fx = self.l2.execute(tx)?;
                self.pending.merge(&fx);
                Ok(())
            })
            .collect();
        self.pending_blocks += 1;
        results
    }

    pub fn due(&self, now: u64) -> bool {
        match self.cadence {
            ProofCadence::Blocks(n) => self.pending_blocks >= n,
            ProofCadence::Interval(s) => now >= self.last_proof_at + s && self.pending_blocks > 0,
        }
    }

    /// Runs the transition program over the pending batch and proves it.
    pub fn build_settlement(&self, prover: &TransitionProver) -> Result<Settlement, ValidityError> {
        let diff: &StateDiff = &self.pending.diff;
        let trace = trace_transition(prover.field(), &self.settled, diff)?;
        let proof = prover.prove_transition(&self.settled, diff, &trace, &self.pending.sent, &self.pending.consumed)?;
        Ok(Settlement { proof, diff: diff.encode(), sent: self.pending.sent.clone(), consumed: self.pending.consumed.clone() })
    }

    /// Marks the pending batch as proven on L1.
    pub fn confirm(&mut self, now: u64) {
        self.settled = self.l2.state.clone();
        self.pending = Effects::default();
        self.pending_blocks = 0;
        self.last_proof_at = now;
    }

    /// Proves and settles the pending batch.
    pub fn settle(&mut self, chain: &mut L1Chain, core: Address, operator: Address, prover: &TransitionProver) -> Result<B256, ValidityError> {
        let s = self.build_settlement(prover)?;
        let root = settle(chain, core, operator, &s)?;
        self.confirm(chain.pending_timestamp());
        Ok(root)
    }
}
