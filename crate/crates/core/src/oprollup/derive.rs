use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::channel::{build_channel, split_frames, Batch, ChannelBank, ChannelId, Frame};
use super::deposit::{DepositedTx, DEPOSIT_EVENT};
use super::l2::{apply_deposit, L2Block, L2Chain, L2State, L2Tx, UserTx};
use super::OpError;
use crate::l1sim::{l1_attributes, L1Chain, Receipt, Transaction};
use crate::primitives::{Address, B256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollupConfig {
    /// Sequencing window `w`: epoch `n` reads L1 blocks `[n, n + w)`.
    pub window: u64,
    pub batcher: Address,
    pub batch_inbox: Address,
    pub portal: Address,
    pub max_frame_bytes: usize,
    pub genesis_alloc: BTreeMap<Address, u128>,
}

impl Default for RollupConfig {
    fn default() -> Self {
        Self {
            window: 4,
            batcher: Address::from_label("batcher"),
            batch_inbox: Address::from_label("batch-inbox"),
            portal: Address::from_label("portal"),
            max_frame_bytes: 1_200,
            genesis_alloc: BTreeMap::new(),
        }
    }
}

struct Arrived {
    inclusion_block: u64,
    batch: Batch,
}

fn collect_deposits(l1: &L1Chain, cfg: &RollupConfig) -> BTreeMap<u64, Vec<DepositedTx>> {
    let head = l1.head().number;
    let mut out: BTreeMap<u64, Vec<DepositedTx>> = BTreeMap::new();
    for e in l1.events() {
        if e.block_number > head || e.address != cfg.portal || e.name != DEPOSIT_EVENT {
            continue;
        }
        let hash = l1.block(e.block_number).expect("event of a sealed block").hash;
        if let Ok(d) = DepositedTx::from_event(e, &hash) {
            out.entry(e.block_number).or_default().push(d);
        }
    }
    out
}

/// Batches in arrival order, tagged with the L1 block that completed their
/// channel.
fn collect_batches(l1: &L1Chain, cfg: &RollupConfig) -> Vec<Arrived> {
    let mut bank = ChannelBank::new();
    let mut out = Vec::new();
    for block in l1.blocks() {
        for tx in &block.transactions {
            if tx.from != cfg.batcher || tx.to != cfg.batch_inbox {
                continue;
            }
            for frame in Frame::decode_all(&tx.data).0 {
                if let Some((_, batches)) = bank.add(frame) {
                    out.extend(batches.into_iter().map(|batch| Arrived { inclusion_block: block.number, batch }));
                }
            }
        }
    }
    out
}

/// Builds the L2 chain from L1 alone. Only epochs whose sequencing window
/// has closed are emitted; invalid batches and transactions are skipped.
pub fn derive(l1: &L1Chain, cfg: &RollupConfig) -> L2Chain {
    let w = cfg.window.max(1);
    let head = l1.head().number;
    let deposits = collect_deposits(l1, cfg);
    let arrived = collect_batches(l1, cfg);
    let mut state = L2State::with_alloc(&cfg.genesis_alloc);
    let mut blocks: Vec<L2Block> = Vec::new();

    for n in (0..=head).take_while(|n| n + w <= head + 1) {
        let epoch = l1.block(n).unwrap();
        let epoch_end = l1.block(n + 1).map(|b| b.timestamp).unwrap_or(epoch.timestamp + l1.config().block_time);
        let mut valid: Vec<&Batch> = arrived
            .iter()
            .filter(|a| {
                let b = &a.batch;
                b.epoch_number == n
                    && b.epoch_hash == epoch.hash
                    && (n..n + w).contains(&a.inclusion_block)
                    && b.timestamp >= epoch.timestamp
                    && b.timestamp < epoch_end.max(epoch.timestamp + 1)
            })
            .map(|a| &a.batch)
            .collect();
        // stable, so arrival order breaks timestamp ties
        valid.sort_by_key(|b| b.timestamp);

        let mut slots: Vec<(u64, Vec<&[u8]>)> = vec![(epoch.timestamp, Vec::new())];
        for b in valid {
            if slots.last().unwrap().0 != b.timestamp {
                slots.push((b.timestamp, Vec::new()));
            }
            slots.last_mut().unwrap().1.extend(b.tx_list.iter().map(Vec::as_slice));
        }

        for (seq, (timestamp, raw_txs)) in slots.into_iter().enumerate() {
            let mut txs = Vec::new();
            let attrs = DepositedTx::l1_attributes(&l1_attributes(epoch, seq as u64));
            apply_deposit(&mut state, &attrs);
            txs.push(L2Tx::Deposit(attrs));
            if seq == 0 {
                for d in deposits.get(&n).into_iter().flatten() {
                    apply_deposit(&mut state, d);
                    txs.push(L2Tx::Deposit(d.clone()));
                }
            }
            for raw in raw_txs {
                if let Ok(L2Tx::User(u)) = L2Tx::decode(raw) {
                    if state.apply_user(&u).is_ok() {
                        txs.push(L2Tx::User(u));
                    }
                }
            }
            let parent = blocks.last().map(|b| b.hash).unwrap_or(B256::ZERO);
            blocks.push(L2Block::seal(blocks.len() as u64, timestamp, n, seq as u64, parent, txs, &state));
        }
    }
    L2Chain { blocks, state }
}

/// Sequencer-side publisher: packs batches into a channel and posts one
/// frame per L1 transaction to the batch inbox.
pub struct Batcher {
    cfg: RollupConfig,
    rng: ChaCha20Rng,
}

impl Batcher {
    pub fn new(cfg: RollupConfig, seed: u64) -> Self {
        Self { cfg, rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    /// Batch for `epoch` at `timestamp`; `parent_hash` is left zero since
    /// derivation rebuilds block hashes itself.
    pub fn batch(l1: &L1Chain, epoch: u64, timestamp: u64, txs: &[UserTx]) -> Option<Batch> {
        Some(Batch {
            epoch_number: epoch,
            epoch_hash: l1.block(epoch)?.hash,
            parent_hash: B256::ZERO,
            timestamp,
            tx_list: txs.iter().map(UserTx::encode).collect(),
        })
    }

    pub fn frames(&mut self, l1: &L1Chain, batches: &[Batch]) -> Result<Vec<Frame>, OpError> {
        let mut random = [0u8; 8];
        self.rng.fill_bytes(&mut random);
        let channel = build_channel(batches, ChannelId { random, timestamp: l1.pending_timestamp() });
        split_frames(&channel, self.cfg.max_frame_bytes)
    }

    pub fn post_frames(&self, l1: &mut L1Chain, frames: &[Frame]) -> Result<Vec<Receipt>, OpError> {
        frames
            .iter()
            .map(|f| Ok(l1.submit(Transaction::new(self.cfg.batcher, self.cfg.batch_inbox, f.encode()))?))
            .collect()
    }

    pub fn publish(&mut self, l1: &mut L1Chain, batches: &[Batch]) -> Result<Vec<Receipt>, OpError> {
        let frames = self.frames(l1, batches)?;
        self.post_frames(l1, &frames)
    }
}
