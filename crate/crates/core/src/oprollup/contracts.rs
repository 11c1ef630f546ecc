//! L1 side of the optimistic rollup: the Portal, the output oracle and the
//! dispute contract. Each contract keeps its logic in plain methods that
//! return [`OpError`]; the [`Handler`] impls only decode calldata.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::deposit::{alias_address, deposit_burn, DepositRequest, DEPOSIT_EVENT, DEPOSIT_VERSION, MAX_GUARANTEED_GAS_PER_BLOCK};
use super::dispute::{DisputeGame, Party};
use super::l2::{L2Block, OutputRootProof, WithdrawalTx};
use super::vm::{decode_proof, encode_proof, fold_machine, fold_steps, PreimageOracle, StepWitness, Trace, VmState};
use super::{OpError, DEFAULT_DISPUTE_PERIOD};
use crate::l1sim::abi::{selector, Decoder, Encoder};
use crate::l1sim::{CallContext, Handler, L1Chain, Revert, GWEI};
use crate::merkle::{verify_inclusion, MerkleProof};
use crate::primitives::{Address, Word, B256};

pub const WITHDRAWAL_FINALIZED_EVENT: &str = "WithdrawalFinalized";
pub const OUTPUT_PROPOSED_EVENT: &str = "OutputProposed";

/// Proposer's commitment to the execution behind an output root: the
/// transition program run from `initial` for `length` steps ends in
/// `final_state`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceClaim {
    pub initial: B256,
    pub length: u64,
    pub final_state: B256,
}

impl TraceClaim {
    pub fn of(trace: &Trace) -> Self {
        Self { initial: trace.state(0).unwrap().hash(), length: trace.length(), final_state: trace.final_state().hash() }
    }
}

/// Input the transition program folds for a block.
pub fn transition_input(block: &L2Block) -> Vec<u8> {
    let mut input = block.output_root_proof().hash().0.to_vec();
    for tx in &block.transactions {
        input.extend_from_slice(&tx.hash().0);
    }
    input
}

/// Honest execution trace for `block`.
pub fn transition_trace(block: &L2Block) -> Result<Trace, OpError> {
    let input = transition_input(block);
    let steps = fold_steps(input.len().div_ceil(8) as u64);
    let mut preimages = PreimageOracle::new();
    let machine = fold_machine(&input, &mut preimages)?;
    Trace::run(machine, steps, preimages)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputProposal {
    pub output_root: B256,
    pub l2_block_number: u64,
    pub timestamp: u64,
    pub proposer: Address,
    pub stake: u128,
    pub challenged: bool,
    pub trace: TraceClaim,
}

impl OutputProposal {
    fn encode(&self, e: Encoder) -> Encoder {
        e.b256(self.output_root)
            .u64(self.l2_block_number)
            .u64(self.timestamp)
            .address(self.proposer)
            .u128(self.stake)
            .bool(self.challenged)
            .b256(self.trace.initial)
            .u64(self.trace.length)
            .b256(self.trace.final_state)
    }

    pub fn decode(data: &[u8]) -> Result<Self, OpError> {
        let mut d = Decoder::new(data);
        let p = Self {
            output_root: d.b256()?,
            l2_block_number: d.u64()?,
            timestamp: d.u64()?,
            proposer: d.address()?,
            stake: d.u128()?,
            challenged: d.bool()?,
            trace: TraceClaim { initial: d.b256()?, length: d.u64()?, final_state: d.b256()? },
        };
        d.finish()?;
        Ok(p)
    }

    pub fn finalized(&self, now: u64, dispute_period: u64) -> bool {
        !self.challenged && now >= self.timestamp.saturating_add(dispute_period)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpParams {
    pub proposers: Vec<Address>,
    pub min_stake: u128,
    pub dispute_period: u64,
    /// At most `rate_limit` proposals in any `rate_window` consecutive L1 blocks.
    pub rate_limit: usize,
    pub rate_window: u64,
    pub l2_basefee: u128,
    /// Gas kept back beyond the withdrawal's own limit at finalization.
    pub finalize_gas_buffer: u64,
}

impl Default for OpParams {
    fn default() -> Self {
        Self {
            proposers: vec![Address::from_label("proposer")],
            min_stake: GWEI * 1_000_000,
            dispute_period: DEFAULT_DISPUTE_PERIOD,
            rate_limit: 10,
            rate_window: 100,
            l2_basefee: GWEI,
            finalize_gas_buffer: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpAddresses {
    pub portal: Address,
    pub oracle: Address,
    pub dispute: Address,
}

impl Default for OpAddresses {
    fn default() -> Self {
        Self {
            portal: Address::from_label("portal"),
            oracle: Address::from_label("l2-output-oracle"),
            dispute: Address::from_label("dispute-game-factory"),
        }
    }
}

/// Deploys the three contracts at their default addresses.
pub fn deploy(chain: &mut L1Chain, params: OpParams) -> Result<OpAddresses, OpError> {
    let addrs = OpAddresses::default();
    chain.deploy(
        addrs.oracle,
        OutputOracle {
            proposers: params.proposers.iter().copied().collect(),
            min_stake: params.min_stake,
            rate_limit: params.rate_limit,
            rate_window: params.rate_window,
            dispute: addrs.dispute,
            proposals: BTreeMap::new(),
            recent: VecDeque::new(),
        },
    )?;
    chain.deploy(
        addrs.portal,
        Portal {
            oracle: addrs.oracle,
            dispute_period: params.dispute_period,
            l2_basefee: params.l2_basefee,
            finalize_gas_buffer: params.finalize_gas_buffer,
            gas_block: 0,
            gas_used: 0,
        },
    )?;
    chain.deploy(
        addrs.dispute,
        DisputeContract {
            oracle: addrs.oracle,
            dispute_period: params.dispute_period,
            games: Vec::new(),
            preimages: PreimageOracle::new(),
        },
    )?;
    Ok(addrs)
}

fn revert(e: OpError) -> Revert {
    e.into()
}

fn unknown_selector() -> Revert {
    Revert::new("unknown function selector")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputOracle {
    pub proposers: BTreeSet<Address>,
    pub min_stake: u128,
    pub rate_limit: usize,
    pub rate_window: u64,
    pub dispute: Address,
    pub proposals: BTreeMap<u64, OutputProposal>,
    /// L1 block numbers of recent proposals.
    recent: VecDeque<u64>,
}

impl OutputOracle {
    pub fn propose_calldata(output_root: B256, l2_block_number: u64, trace: &TraceClaim) -> Vec<u8> {
        Encoder::call("proposeL2Output")
            .b256(output_root)
            .u64(l2_block_number)
            .b256(trace.initial)
            .u64(trace.length)
            .b256(trace.final_state)
            .finish()
    }

    pub fn get_calldata(l2_block_number: u64) -> Vec<u8> {
        Encoder::call("getL2Output").u64(l2_block_number).finish()
    }

    pub fn proposal(&self, l2_block_number: u64) -> Option<&OutputProposal> {
        self.proposals.get(&l2_block_number)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn propose(
        &mut self,
        proposer: Address,
        stake: u128,
        l1_block: u64,
        now: u64,
        output_root: B256,
        l2_block_number: u64,
        trace: TraceClaim,
    ) -> Result<&OutputProposal, OpError> {
        if !self.proposers.contains(&proposer) {
            return Err(OpError::NotProposer);
        }
        if stake < self.min_stake {
            return Err(OpError::StakeTooLow { got: stake, min: self.min_stake });
        }
        if self.proposals.contains_key(&l2_block_number) {
            return Err(OpError::OutputExists(l2_block_number));
        }
        while self.recent.front().is_some_and(|b| b + self.rate_window <= l1_block) {
            self.recent.pop_front();
        }
        if self.recent.len() >= self.rate_limit {
            return Err(OpError::ProposalRateLimited);
        }
        self.recent.push_back(l1_block);
        let p = OutputProposal { output_root, l2_block_number, timestamp: now, proposer, stake, challenged: false, trace };
        Ok(self.proposals.entry(l2_block_number).or_insert(p))
    }

    fn only_dispute(&self, caller: Address) -> Result<(), OpError> {
        if caller != self.dispute {
            return Err(OpError::Unauthorized(caller));
        }
        Ok(())
    }

    fn proposal_mut(&mut self, n: u64) -> Result<&mut OutputProposal, OpError> {
        self.proposals.get_mut(&n).ok_or(OpError::OutputNotFound(n))
    }
}

impl Handler for OutputOracle {
    fn call(&mut self, ctx: &mut CallContext<'_>, data: &[u8]) -> Result<Vec<u8>, Revert> {
        let (sel, mut d) = Decoder::call(data)?;
        if sel == selector("proposeL2Output") {
            let (root, n) = (d.b256()?, d.u64()?);
            let trace = TraceClaim { initial: d.b256()?, length: d.u64()?, final_state: d.b256()? };
            d.finish()?;
            let p = self
                .propose(ctx.caller(), ctx.value(), ctx.block_number(), ctx.timestamp(), root, n, trace)
                .map_err(revert)?;
            let payload = p.encode(Encoder::new()).finish();
            ctx.emit(OUTPUT_PROPOSED_EVENT, payload);
            Ok(Vec::new())
        } else if sel == selector("getL2Output") {
            let n = d.u64()?;
            d.finish()?;
            let p = self.proposal(n).ok_or(OpError::OutputNotFound(n)).map_err(revert)?;
            Ok(p.encode(Encoder::new()).finish())
        } else if sel == selector("setChallenged") {
            let (n, flag) = (d.u64()?, d.bool()?);
            d.finish()?;
            self.only_dispute(ctx.caller()).map_err(revert)?;
            self.proposal_mut(n).map_err(revert)?.challenged = flag;
            Ok(Vec::new())
        } else if sel == selector("slash") {
            let (n, recipient) = (d.u64()?, d.address()?);
            d.finish()?;
            self.only_dispute(ctx.caller()).map_err(revert)?;
            let p = self.proposals.remove(&n).ok_or(OpError::OutputNotFound(n)).map_err(revert)?;
            ctx.transfer(recipient, p.stake)?;
            Ok(Vec::new())
        } else {
            Err(unknown_selector())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Portal {
    pub oracle: Address,
    pub dispute_period: u64,
    pub l2_basefee: u128,
    pub finalize_gas_buffer: u64,
    /// Guaranteed gas handed out in L1 block `gas_block`.
    gas_block: u64,
    gas_used: u64,
}

/// Storage slot marking a withdrawal as finalized.
fn finalized_slot(withdrawal_hash: &B256) -> Word {
    Word(withdrawal_hash.0)
}

impl Portal {
    pub fn finalize_calldata(
        w: &WithdrawalTx,
        l2_block_number: u64,
        root_proof: &OutputRootProof,
        withdrawal_proof: &MerkleProof,
    ) -> Vec<u8> {
        let e = Encoder::call("finalizeWithdrawalTransaction")
            .u64(w.nonce)
            .address(w.sender)
            .address(w.target)
            .u128(w.value)
            .u64(w.gas_limit)
            .bytes(&w.data)
            .u64(l2_block_number)
            .b256(root_proof.version)
            .b256(root_proof.state_root)
            .b256(root_proof.message_passer_root)
            .b256(root_proof.latest_blockhash);
        encode_proof(e, withdrawal_proof).finish()
    }

    pub fn is_finalized(chain: &L1Chain, portal: &Address, withdrawal_hash: &B256) -> bool {
        !chain.storage(portal, finalized_slot(withdrawal_hash)).is_zero()
    }

    fn deposit(&mut self, ctx: &mut CallContext<'_>, req: DepositRequest) -> Result<(), Revert> {
        if req.is_creation && req.to != Address::ZERO {
            return Err(revert(OpError::MustSendToZero));
        }
        if self.gas_block != ctx.block_number() {
            self.gas_block = ctx.block_number();
            self.gas_used = 0;
        }
        let used = self.gas_used.saturating_add(req.gas_limit);
        if used > MAX_GUARANTEED_GAS_PER_BLOCK {
            return Err(revert(OpError::GuaranteedGasExhausted));
        }
        self.gas_used = used;
        ctx.charge(deposit_burn(req.gas_limit, self.l2_basefee, ctx.basefee(), ctx.gas_used()))?;
        let from = if ctx.caller_is_contract() { alias_address(&ctx.caller()) } else { ctx.caller() };
        let payload =
            Encoder::new().address(from).address(req.to).u64(DEPOSIT_VERSION).bytes(&req.opaque(ctx.value())).finish();
        ctx.emit(DEPOSIT_EVENT, payload);
        Ok(())
    }

    fn finalize(&mut self, ctx: &mut CallContext<'_>, d: &mut Decoder<'_>) -> Result<(), Revert> {
        let w = WithdrawalTx {
            nonce: d.u64()?,
            sender: d.address()?,
            target: d.address()?,
            value: d.u128()?,
            gas_limit: d.u64()?,
            data: d.bytes()?,
        };
        let l2_block_number = d.u64()?;
        let root_proof = OutputRootProof {
            version: d.b256()?,
            state_root: d.b256()?,
            message_passer_root: d.b256()?,
            latest_blockhash: d.b256()?,
        };
        let proof = decode_proof(d).map_err(revert)?;
        if w.target == ctx.address() {
            return Err(revert(OpError::TargetIsPortal));
        }
        let raw = ctx.call(self.oracle, &OutputOracle::get_calldata(l2_block_number), 0)?;
        let proposal = OutputProposal::decode(&raw).map_err(revert)?;
        if !proposal.finalized(ctx.timestamp(), self.dispute_period) {
            return Err(revert(OpError::NotFinalized));
        }
        if root_proof.hash() != proposal.output_root {
            return Err(revert(OpError::InvalidOutputRootProof));
        }
        let hash = w.hash();
        if !verify_inclusion(&root_proof.message_passer_root, hash.as_bytes(), &proof) {
            return Err(revert(OpError::InvalidWithdrawalProof));
        }
        if !ctx.sload(finalized_slot(&hash)).is_zero() {
            return Err(revert(OpError::AlreadyFinalized));
        }
        ctx.sstore(finalized_slot(&hash), Word::from_u64(1))?;
        if ctx.gas_left() < w.gas_limit.saturating_add(self.finalize_gas_buffer) {
            return Err(revert(OpError::InsufficientGas));
        }
        let success = ctx.call(w.target, &w.data, w.value).is_ok();
        ctx.emit(WITHDRAWAL_FINALIZED_EVENT, Encoder::new().b256(hash).bool(success).finish());
        Ok(())
    }
}

impl Handler for Portal {
    fn call(&mut self, ctx: &mut CallContext<'_>, data: &[u8]) -> Result<Vec<u8>, Revert> {
        let (sel, mut d) = Decoder::call(data)?;
        if sel == selector("depositTransaction") {
            let req = DepositRequest::decode(&mut d).map_err(revert)?;
            d.finish()?;
            self.deposit(ctx, req)?;
        } else if sel == selector("finalizeWithdrawalTransaction") {
            self.finalize(ctx, &mut d)?;
            d.finish()?;
        } else if sel == selector("donate") {
            d.finish()?;
        } else {
            return Err(unknown_selector());
        }
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRecord {
    pub l2_block_number: u64,
    pub game: DisputeGame,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeContract {
    pub oracle: Address,
    pub dispute_period: u64,
    pub games: Vec<GameRecord>,
    pub preimages: PreimageOracle,
}

impl DisputeContract {
    pub fn challenge_calldata(l2_block_number: u64, final_state: B256) -> Vec<u8> {
        Encoder::call("challenge").u64(l2_block_number).b256(final_state).finish()
    }

    pub fn bisect_calldata(game: u64, hash: B256) -> Vec<u8> {
        Encoder::call("bisect").u64(game).b256(hash).finish()
    }

    pub fn step_calldata(game: u64, pre: &VmState, witness: &StepWitness) -> Vec<u8> {
        witness.encode(pre.encode(Encoder::call("step").u64(game))).finish()
    }

    pub fn timeout_calldata(game: u64) -> Vec<u8> {
        Encoder::call("timeout").u64(game).finish()
    }

    pub fn add_preimage_calldata(data: &[u8]) -> Vec<u8> {
        Encoder::call("addPreimage").bytes(data).finish()
    }

    pub fn game(&self, id: u64) -> Option<&DisputeGame> {
        self.games.get(id as usize).map(|g| &g.game)
    }

    fn record(&mut self, id: u64) -> Result<&mut GameRecord, OpError> {
        self.games.get_mut(id as usize).ok_or(OpError::UnknownGame(id))
    }

    fn settle(&mut self, ctx: &mut CallContext<'_>, id: u64, winner: Party) -> Result<(), Revert> {
        let rec = self.record(id).map_err(revert)?;
        let (n, challenger) = (rec.l2_block_number, rec.game.challenger);
        let data = match winner {
            Party::Challenger => Encoder::call("slash").u64(n).address(challenger).finish(),
            Party::Defender => Encoder::call("setChallenged").u64(n).bool(false).finish(),
        };
        ctx.call(self.oracle, &data, 0)?;
        ctx.emit("GameResolved", Encoder::new().u64(id).bool(winner == Party::Challenger).finish());
        Ok(())
    }

    fn challenge(&mut self, ctx: &mut CallContext<'_>, n: u64, final_state: B256) -> Result<Vec<u8>, Revert> {
        let raw = ctx.call(self.oracle, &OutputOracle::get_calldata(n), 0)?;
        let p = OutputProposal::decode(&raw).map_err(revert)?;
        if p.challenged || p.finalized(ctx.timestamp(), self.dispute_period) {
            return Err(Revert::new("proposal cannot be challenged"));
        }
        let game = DisputeGame::open(
            ctx.caller(),
            p.proposer,
            p.trace.initial,
            p.trace.final_state,
            final_state,
            p.trace.length,
            ctx.timestamp() + self.dispute_period,
        )
        .map_err(revert)?;
        ctx.call(self.oracle, &Encoder::call("setChallenged").u64(n).bool(true).finish(), 0)?;
        let id = self.games.len() as u64;
        self.games.push(GameRecord { l2_block_number: n, game });
        ctx.emit("GameCreated", Encoder::new().u64(id).u64(n).finish());
        Ok(Encoder::new().u64(id).finish())
    }
}

impl Handler for DisputeContract {
    fn call(&mut self, ctx: &mut CallContext<'_>, data: &[u8]) -> Result<Vec<u8>, Revert> {
        let (sel, mut d) = Decoder::call(data)?;
        if sel == selector("challenge") {
            let (n, h) = (d.u64()?, d.b256()?);
            d.finish()?;
            return self.challenge(ctx, n, h);
        } else if sel == selector("addPreimage") {
            let bytes = d.bytes()?;
            d.finish()?;
            self.preimages.register(bytes);
        } else if sel == selector("bisect") {
            let (id, h) = (d.u64()?, d.b256()?);
            d.finish()?;
            let caller = ctx.caller();
            let game = &mut self.record(id).map_err(revert)?.game;
            let party = game.party_of(&caller).ok_or(OpError::Unauthorized(caller)).map_err(revert)?;
            game.bisect(party, h).map_err(revert)?;
        } else if sel == selector("step") {
            let id = d.u64()?;
            let pre = VmState::decode(&mut d).map_err(revert)?;
            let witness = StepWitness::decode(&mut d).map_err(revert)?;
            d.finish()?;
            let preimages = &self.preimages;
            let rec = self.games.get_mut(id as usize).ok_or(OpError::UnknownGame(id)).map_err(revert)?;
            let winner = rec.game.step(&pre, &witness, preimages).map_err(revert)?;
            self.settle(ctx, id, winner)?;
        } else if sel == selector("timeout") {
            let id = d.u64()?;
            d.finish()?;
            let now = ctx.timestamp();
            let winner = self.record(id).map_err(revert)?.game.timeout(now).map_err(revert)?;
            self.settle(ctx, id, winner)?;
        } else {
            return Err(unknown_selector());
        }
        Ok(Vec::new())
    }
}
