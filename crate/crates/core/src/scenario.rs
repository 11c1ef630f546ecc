//! Seeded end-to-end runs of either rollup over one workload, producing a
//! report that is a pure function of the config.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costbench::{da_cost_comparison, CostReport, DaScenario};
use crate::l1sim::{ChainConfig, L1Chain, Receipt, ETHER, GWEI};
use crate::oprollup::{
    self, transition_input, transition_trace, Batcher, DepositRequest, DisputeContract, FaultyTrace, L2Chain, OpAddresses,
    OpParams, OutputOracle, Party, Portal, RollupConfig, TraceClaim, TraceSource, UserTx,
};
use crate::primitives::{keccak256, keccak_concat, Address, B256, Word};
use crate::validityrollup::{
    self, address_word, balance_key, reconstruct_state, EthBridge, ProofCadence, Sequencer, StarkTx,
    TransitionProver, ValidityAddresses, L2_ETH_BRIDGE,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fee attached to each L1→L2 message on the validity stack.
const MESSAGE_FEE: u128 = 1_000 * GWEI;
const USER_FUNDS: u128 = 1_000 * ETHER;
const MAX_WAIT_BLOCKS: u64 = 100_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    fn at(path: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainParams {
    pub block_time: u64,
    /// Basefee path in gwei, one entry per block, the last one repeating.
    pub basefee_gwei: Vec<u64>,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self { block_time: 12, basefee_gwei: vec![10] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RollupKind {
    Optimistic,
    Validity,
}

/// Parameters of both stacks; only those of `kind` are used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RollupParams {
    pub kind: RollupKind,
    pub window: u64,
    pub dispute_period: u64,
    pub max_frame_bytes: usize,
    pub proof_cadence: ProofCadence,
}

impl Default for RollupParams {
    fn default() -> Self {
        let cfg = RollupConfig::default();
        Self {
            kind: RollupKind::Optimistic,
            window: cfg.window,
            dispute_period: OpParams::default().dispute_period,
            max_frame_bytes: cfg.max_frame_bytes,
            proof_cadence: ProofCadence::default(),
        }
    }
}

impl RollupParams {
    pub fn optimistic() -> Self {
        Self::default()
    }

    pub fn validity() -> Self {
        Self { kind: RollupKind::Validity, ..Self::default() }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            RollupKind::Optimistic => "optimistic",
            RollupKind::Validity => "validity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Workload {
    pub users: u32,
    pub deposits: u32,
    pub transfers: u32,
    pub withdrawals: u32,
    /// An invalid state claim is submitted before the honest one.
    pub planted_fraud: bool,
}

impl Default for Workload {
    fn default() -> Self {
        Self { users: 4, deposits: 6, transfers: 8, withdrawals: 3, planted_fraud: false }
    }
}

impl Workload {
    pub fn empty() -> Self {
        Self { users: 0, deposits: 0, transfers: 0, withdrawals: 0, planted_fraud: false }
    }

    pub fn is_empty(&self) -> bool {
        self.deposits == 0 && self.transfers == 0 && self.withdrawals == 0 && !self.planted_fraud
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default)]
    pub chain: ChainParams,
    pub rollup: RollupParams,
    #[serde(default)]
    pub workload: Workload,
}

impl ScenarioConfig {
    pub fn new(seed: u64, rollup: RollupParams) -> Self {
        Self { seed, chain: ChainParams::default(), rollup, workload: Workload::default() }
    }

    /// Same seed, chain and workload on the other stack.
    pub fn twin(&self, rollup: RollupParams) -> Self {
        Self { rollup, ..self.clone() }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::at(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> B256 {
        keccak256(serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.chain.block_time == 0 {
            return Err(ConfigError::at("chain.block_time", "must be positive"));
        }
        let r = &self.rollup;
        match r.kind {
            RollupKind::Optimistic => {
                if r.window == 0 {
                    return Err(ConfigError::at("rollup.window", "must be positive"));
                }
                if r.dispute_period == 0 {
                    return Err(ConfigError::at("rollup.dispute_period", "must be positive"));
                }
                if r.max_frame_bytes < 64 {
                    return Err(ConfigError::at("rollup.max_frame_bytes", "must be at least 64"));
                }
            }
            RollupKind::Validity => {
                if matches!(r.proof_cadence, ProofCadence::Blocks(0) | ProofCadence::Interval(0)) {
                    return Err(ConfigError::at("rollup.proof_cadence", "must be positive"));
                }
            }
        }
        let w = &self.workload;
        if w.users == 0 && (w.deposits > 0 || w.transfers > 0 || w.withdrawals > 0) {
            return Err(ConfigError::at("workload.users", "transactions need at least one user"));
        }
        if w.deposits == 0 && (w.transfers > 0 || w.withdrawals > 0) {
            return Err(ConfigError::at("workload.deposits", "transfers and withdrawals need funded users"));
        }
        Ok(())
    }
}

/// Independent stream for one named consumer of the run seed.
pub fn substream(seed: u64, name: &str) -> ChaCha20Rng {
    let h = keccak_concat([&seed.to_be_bytes()[..], name.as_bytes()]);
    ChaCha20Rng::from_seed(h.0)
}

/// Stack-independent list of user actions, valid by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub users: Vec<Address>,
    pub deposits: Vec<(usize, u128)>,
    pub transfers: Vec<(usize, usize, u128)>,
    pub withdrawals: Vec<(usize, u128)>,
    pub final_balances: Vec<u128>,
}

impl Plan {
    pub fn generate(seed: u64, w: &Workload) -> Self {
        let mut rng = substream(seed, "workload");
        let users: Vec<Address> = (0..w.users).map(|i| Address::from_label(&format!("user-{i}"))).collect();
        let mut bal = vec![0u128; users.len()];
        let deposits: Vec<(usize, u128)> = (0..w.deposits)
            .map(|_| {
                let u = rng.gen_range(0..users.len());
                let amount = rng.gen_range(1..=10_000u128) * ETHER / 1_000;
                bal[u] += amount;
                (u, amount)
            })
            .collect();
        let pick_funded = |rng: &mut ChaCha20Rng, bal: &[u128]| {
            let funded: Vec<usize> = (0..bal.len()).filter(|i| bal[*i] > 1).collect();
            funded[rng.gen_range(0..funded.len())]
        };
        let transfers = (0..w.transfers)
            .map(|_| {
                let from = pick_funded(&mut rng, &bal);
                let to = rng.gen_range(0..users.len());
                let amount = rng.gen_range(1..=bal[from] / 2);
                bal[from] -= amount;
                bal[to] += amount;
                (from, to, amount)
            })
            .collect();
        let withdrawals = (0..w.withdrawals)
            .map(|_| {
                let u = pick_funded(&mut rng, &bal);
                let amount = rng.gen_range(1..=bal[u] / 2);
                bal[u] -= amount;
                (u, amount)
            })
            .collect();
        Self { users, deposits, transfers, withdrawals, final_balances: bal }
    }

    fn cost_scenario(&self) -> Option<DaScenario> {
        let writes: Vec<(Word, Word)> = self
            .users
            .iter()
            .zip(&self.final_balances)
            .filter(|(_, b)| **b > 0)
            .map(|(u, b)| (balance_key(&address_word(u)), Word::from_u128(*b)))
            .collect();
        (!writes.is_empty()).then(|| DaScenario::new("run balances", L2_ETH_BRIDGE, writes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub l1_block: u64,
    pub timestamp: u64,
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeOutcome {
    pub l2_block: u64,
    pub winner: String,
    pub rounds: u32,
    pub stake_slashed: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithdrawalLatency {
    pub user: Address,
    pub amount: u128,
    pub initiated_at: u64,
    pub finalized_at: u64,
    pub finalized_block: u64,
}

impl WithdrawalLatency {
    pub fn latency(&self) -> u64 {
        self.finalized_at - self.initiated_at
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config_hash: B256,
    pub rollup: String,
    pub timeline: Vec<TimelineEntry>,
    pub gas: BTreeMap<String, u64>,
    pub disputes: Vec<DisputeOutcome>,
    pub withdrawals: Vec<WithdrawalLatency>,
    pub costs: Option<CostReport>,
    pub violations: Vec<String>,
}

impl RunReport {
    pub fn total_gas(&self) -> u64 {
        self.gas.values().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn hash(&self) -> B256 {
        keccak256(self.to_json())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "rollsim {} | {} rollup | config {}\n",
            self.version,
            self.rollup,
            hex::encode(&self.config_hash.0[..8])
        );
        for e in &self.timeline {
            s += &format!("  [block {:>5} t={}] {}\n", e.l1_block, e.timestamp, e.event);
        }
        for (k, v) in &self.gas {
            s += &format!("  gas {k:<12} {v:>12}\n");
        }
        s += &format!("  gas {:<12} {:>12}\n", "total", self.total_gas());
        for d in &self.disputes {
            s += &format!("  dispute on L2 block {}: {} wins, rounds={}, slashed={}\n", d.l2_block, d.winner, d.rounds, d.stake_slashed);
        }
        for w in &self.withdrawals {
            s += &format!("  withdrawal {} wei: latency {} s\n", w.amount, w.latency());
        }
        if let Some(c) = &self.costs {
            s += &c.to_text();
        }
        for v in &self.violations {
            s += &format!("  VIOLATION: {v}\n");
        }
        s
    }
}

struct Recorder<'a> {
    cfg: &'a ScenarioConfig,
    timeline: Vec<TimelineEntry>,
    gas: BTreeMap<String, u64>,
    violations: Vec<String>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        Self { cfg, timeline: Vec::new(), gas: BTreeMap::new(), violations: Vec::new() }
    }

    fn log(&mut self, l1: &L1Chain, event: impl Into<String>) {
        self.timeline.push(TimelineEntry { l1_block: l1.pending_number(), timestamp: l1.pending_timestamp(), event: event.into() });
    }

    fn tx(&mut self, category: &str, r: &Receipt) {
        *self.gas.entry(category.into()).or_default() += r.gas_used;
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.violations.push(what.into());
        }
    }

    fn finish(self, disputes: Vec<DisputeOutcome>, withdrawals: Vec<WithdrawalLatency>, costs: Option<CostReport>) -> RunReport {
        RunReport {
            version: VERSION.into(),
            config_hash: self.cfg.hash(),
            rollup: self.cfg.rollup.name().into(),
            timeline: self.timeline,
            gas: self.gas,
            disputes,
            withdrawals,
            costs,
            violations: self.violations,
        }
    }
}

fn chain_for(cfg: &ScenarioConfig) -> L1Chain {
    L1Chain::new(ChainConfig {
        block_time: cfg.chain.block_time,
        basefees: cfg.chain.basefee_gwei.iter().map(|g| *g as u128 * GWEI).collect(),
        ..ChainConfig::default()
    })
}

/// Executes the scenario. Errors are infrastructure failures; broken
/// protocol expectations land in `violations`.
pub fn run(cfg: &ScenarioConfig) -> Result<RunReport, ScenarioError> {
    cfg.validate()?;
    let plan = Plan::generate(cfg.seed, &cfg.workload);
    let mut rec = Recorder::new(cfg);
    if cfg.workload.is_empty() {
        return Ok(rec.finish(Vec::new(), Vec::new(), None));
    }
    let costs = plan.cost_scenario().map(|s| da_cost_comparison(&s)).transpose()?;
    let r = &cfg.rollup;
    let (disputes, withdrawals) = match r.kind {
        RollupKind::Optimistic => run_optimistic(cfg, &plan, &mut rec, r.window, r.dispute_period, r.max_frame_bytes)?,
        RollupKind::Validity => (Vec::new(), run_validity(cfg, &plan, &mut rec, r.proof_cadence)?),
    };
    Ok(rec.finish(disputes, withdrawals, costs))
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    L1(#[from] crate::l1sim::L1Error),
    #[error(transparent)]
    Op(#[from] oprollup::OpError),
    #[error(transparent)]
    Validity(#[from] validityrollup::ValidityError),
    #[error(transparent)]
    Cost(#[from] crate::costbench::CostError),
    #[error("{0}")]
    Stuck(String),
}

struct OpWorld {
    l1: L1Chain,
    addrs: OpAddresses,
    params: OpParams,
    proposer: Address,
    challenger: Address,
}

impl OpWorld {
    fn propose(&mut self, rec: &mut Recorder, root: B256, n: u64, claim: &TraceClaim) -> Result<Receipt, ScenarioError> {
        let r = self.l1.submit_tx(self.proposer, self.addrs.oracle, OutputOracle::propose_calldata(root, n, claim), self.params.min_stake)?;
        rec.tx("proposal", &r);
        Ok(r)
    }

    fn oracle(&self) -> &OutputOracle {
        self.l1.contract::<OutputOracle>(&self.addrs.oracle).expect("oracle deployed")
    }

    fn dispute(&self) -> &DisputeContract {
        self.l1.contract::<DisputeContract>(&self.addrs.dispute).expect("dispute contract deployed")
    }
}

fn run_optimistic(
    cfg: &ScenarioConfig,
    plan: &Plan,
    rec: &mut Recorder,
    window: u64,
    dispute_period: u64,
    max_frame_bytes: usize,
) -> Result<(Vec<DisputeOutcome>, Vec<WithdrawalLatency>), ScenarioError> {
    let mut l1 = chain_for(cfg);
    let rcfg = RollupConfig { window, max_frame_bytes, ..RollupConfig::default() };
    let params = OpParams { dispute_period, ..OpParams::default() };
    let proposer = params.proposers[0];
    let challenger = Address::from_label("challenger");
    for a in plan.users.iter().chain([&proposer, &challenger]) {
        l1.create_account(*a, USER_FUNDS)?;
    }
    l1.create_account(rcfg.batcher, ETHER)?;
    l1.create_account(rcfg.batch_inbox, 0)?;
    let addrs = oprollup::deploy(&mut l1, params.clone())?;
    let mut w = OpWorld { l1, addrs, params, proposer, challenger };
    let mut batcher = Batcher::new(rcfg.clone(), substream(cfg.seed, "channel-ids").gen());

    for (u, amount) in &plan.deposits {
        let user = plan.users[*u];
        let r = w.l1.submit_tx(user, w.addrs.portal, DepositRequest::transfer(user, 0).calldata(), *amount)?;
        rec.tx("deposit", &r);
        rec.check(r.succeeded(), format!("deposit reverted: {:?}", r.revert_reason()));
        rec.log(&w.l1, format!("deposit {} wei for user-{u}", amount));
    }
    w.l1.mine_block();

    let mut txs: Vec<UserTx> = plan
        .transfers
        .iter()
        .map(|(f, t, v)| UserTx::Transfer { from: plan.users[*f], to: plan.users[*t], value: *v })
        .collect();
    txs.extend(plan.withdrawals.iter().map(|(u, v)| UserTx::Withdraw {
        from: plan.users[*u],
        target: plan.users[*u],
        value: *v,
        gas_limit: 100_000,
        data: Vec::new(),
    }));
    let initiated_at = w.l1.pending_timestamp();
    if !txs.is_empty() {
        let epoch = w.l1.head().number;
        let ts = w.l1.head().timestamp + 2;
        let batch = Batcher::batch(&w.l1, epoch, ts, &txs).ok_or_else(|| ScenarioError::Stuck("no batch for epoch".into()))?;
        for r in batcher.publish(&mut w.l1, &[batch])? {
            rec.tx("batch", &r);
            rec.check(r.succeeded(), "batch frame reverted");
        }
        rec.log(&w.l1, format!("batch with {} L2 transactions", txs.len()));
    }
    w.l1.mine_block();
    w.l1.mine_blocks(window);
    let l2: L2Chain = oprollup::derive(&w.l1, &rcfg);
    for (i, u) in plan.users.iter().enumerate() {
        rec.check(l2.state.balance(u) == plan.final_balances[i], format!("L2 balance of user-{i} diverges from plan"));
    }

    let n = l2
        .state
        .withdrawals
        .first()
        .and_then(|wtx| l2.withdrawal_block(&wtx.hash()))
        .unwrap_or_else(|| l2.head().map_or(0, |b| b.number));
    let block = l2.block(n).ok_or_else(|| ScenarioError::Stuck(format!("L2 block {n} missing")))?;
    let honest = transition_trace(block)?;
    let len = honest.length();
    let honest_claim = TraceClaim::of(&honest);
    let root = l2.output_root(n).expect("block exists");

    let mut disputes = Vec::new();
    if cfg.workload.planted_fraud {
        let mut rng = substream(cfg.seed, "fraud");
        let fault = rng.gen_range(1..len.max(2));
        let faulty = FaultyTrace { honest: &honest, from: fault };
        let claim = TraceClaim { initial: honest.state_hash(0), length: len, final_state: faulty.state_hash(len) };
        let bad_root = keccak_concat([root.as_bytes(), b"planted".as_slice()]);
        let r = w.propose(rec, bad_root, n, &claim)?;
        rec.check(r.succeeded(), "fraudulent proposal was not accepted for dispute");
        rec.log(&w.l1, format!("invalid output root proposed for L2 block {n}"));
        w.l1.mine_block();
        disputes.push(play_on_chain(&mut w, rec, n, &transition_input(block), &honest, &faulty)?);
    }

    let r = w.propose(rec, root, n, &honest_claim)?;
    rec.check(r.succeeded(), format!("honest proposal reverted: {:?}", r.revert_reason()));
    rec.log(&w.l1, format!("output root proposed for L2 block {n}"));
    w.l1.mine_block();
    let t0 = w.oracle().proposal(n).map_or(0, |p| p.timestamp);

    let mut latencies = Vec::new();
    let final_at = t0 + dispute_period;
    for (i, wtx) in l2.state.withdrawals.iter().enumerate() {
        let proof = l2.withdrawal_proof(n, &wtx.hash())?;
        let data = Portal::finalize_calldata(wtx, n, &block.output_root_proof(), &proof);
        if i == 0 {
            w.l1.set_next_timestamp(final_at - 1)?;
            let early = w.l1.submit_tx(wtx.target, w.addrs.portal, data.clone(), 0)?;
            rec.tx("finalize", &early);
            rec.check(early.revert_reason() == Some("proposal is not yet finalized"), "withdrawal finalized before the dispute period ended");
            rec.log(&w.l1, "early finalization rejected: proposal is not yet finalized");
            w.l1.mine_block();
            w.l1.set_next_timestamp(final_at)?;
        }
        let before = w.l1.balance(&wtx.target);
        let r = w.l1.submit_tx(wtx.target, w.addrs.portal, data, 0)?;
        rec.tx("finalize", &r);
        rec.check(r.succeeded(), format!("withdrawal finalization reverted: {:?}", r.revert_reason()));
        rec.check(w.l1.balance(&wtx.target) == before + wtx.value, "withdrawal paid the wrong amount");
        rec.log(&w.l1, format!("withdrawal of {} wei finalized", wtx.value));
        latencies.push(WithdrawalLatency {
            user: wtx.target,
            amount: wtx.value,
            initiated_at,
            finalized_at: w.l1.pending_timestamp(),
            finalized_block: w.l1.pending_number(),
        });
    }
    w.l1.mine_block();
    Ok((disputes, latencies))
}

fn play_on_chain(
    w: &mut OpWorld,
    rec: &mut Recorder,
    n: u64,
    block_input: &[u8],
    honest: &oprollup::vm::Trace,
    faulty: &FaultyTrace<'_>,
) -> Result<DisputeOutcome, ScenarioError> {
    let dc = w.addrs.dispute;
    let len = honest.length();
    let id = w.dispute().games.len() as u64;
    let r = w.l1.submit_tx(w.challenger, dc, DisputeContract::add_preimage_calldata(block_input), 0)?;
    rec.tx("dispute", &r);
    let before = w.l1.balance(&w.challenger);
    let r = w.l1.submit_tx(w.challenger, dc, DisputeContract::challenge_calldata(n, honest.state_hash(len)), 0)?;
    rec.tx("dispute", &r);
    rec.check(r.succeeded(), format!("challenge reverted: {:?}", r.revert_reason()));
    rec.log(&w.l1, format!("challenge opened against L2 block {n}"));
    w.l1.mine_block();
    for _ in 0..2 * 64 + 2 {
        let g = w.dispute().game(id).expect("game opened").clone();
        let (from, data) = match g.turn() {
            None => break,
            Some(Party::Defender) => (w.proposer, DisputeContract::bisect_calldata(id, faulty.state_hash(g.midpoint()))),
            Some(Party::Challenger) if g.hi - g.lo > 1 => {
                (w.challenger, DisputeContract::bisect_calldata(id, honest.state_hash(g.midpoint())))
            }
            Some(Party::Challenger) => {
                let (pre, witness) = honest.step_proof(g.lo)?;
                (w.challenger, DisputeContract::step_calldata(id, &pre, &witness))
            }
        };
        let r = w.l1.submit_tx(from, dc, data, 0)?;
        rec.tx("dispute", &r);
        rec.check(r.succeeded(), format!("dispute move reverted: {:?}", r.revert_reason()));
        w.l1.mine_block();
    }
    let g = w.dispute().game(id).expect("game opened").clone();
    let winner = g.winner();
    rec.check(winner == Some(Party::Challenger), "honest challenger did not win");
    rec.check(w.oracle().proposal(n).is_none(), "fraudulent proposal survived its dispute");
    let slashed = w.l1.balance(&w.challenger).saturating_sub(before);
    rec.check(slashed == w.params.min_stake, "proposer stake was not awarded to the challenger");
    let winner = winner.map_or("none".into(), |p| format!("{p:?}").to_lowercase());
    rec.log(&w.l1, format!("dispute resolved after {} rounds: {winner} wins", g.rounds));
    Ok(DisputeOutcome {
        l2_block: n,
        winner,
        rounds: g.rounds,
        stake_slashed: slashed,
    })
}

fn run_validity(
    cfg: &ScenarioConfig,
    plan: &Plan,
    rec: &mut Recorder,
    cadence: ProofCadence,
) -> Result<Vec<WithdrawalLatency>, ScenarioError> {
    let mut l1 = chain_for(cfg);
    let addrs = ValidityAddresses::default();
    for u in &plan.users {
        l1.create_account(*u, USER_FUNDS)?;
    }
    l1.create_account(addrs.operator, ETHER)?;
    let prover = TransitionProver::setup(&mut substream(cfg.seed, "prover"))?;
    let l2 = validityrollup::deploy(&mut l1, addrs, prover.verifying_key())?;
    let genesis = l2.state.clone();
    let mut seq = Sequencer::new(l2, cadence, l1.pending_timestamp());

    for (u, amount) in &plan.deposits {
        let user = plan.users[*u];
        let r = l1.submit_tx(user, addrs.bridge, EthBridge::deposit_calldata(address_word(&user), *amount), amount + MESSAGE_FEE)?;
        rec.tx("deposit", &r);
        rec.check(r.succeeded(), format!("deposit reverted: {:?}", r.revert_reason()));
        rec.log(&l1, format!("deposit {} wei for user-{u}", amount));
    }
    l1.mine_block();

    let mut txs = seq.poll_l1(&l1, addrs.core);
    txs.extend(plan.transfers.iter().map(|(f, t, v)| StarkTx::Transfer {
        from: address_word(&plan.users[*f]),
        to: address_word(&plan.users[*t]),
        amount: *v,
    }));
    txs.extend(plan.withdrawals.iter().map(|(u, v)| StarkTx::Withdraw {
        user: address_word(&plan.users[*u]),
        recipient: plan.users[*u],
        amount: *v,
    }));
    let initiated_at = l1.pending_timestamp();
    let failed = seq.produce_block(&txs).into_iter().filter(Result::is_err).count();
    rec.check(failed == 0, format!("{failed} L2 transactions failed"));
    rec.log(&l1, format!("L2 block with {} transactions", txs.len()));
    for (i, u) in plan.users.iter().enumerate() {
        rec.check(seq.l2.balance(&address_word(u)) == plan.final_balances[i], format!("L2 balance of user-{i} diverges from plan"));
    }

    if let Some((u, v)) = plan.withdrawals.first() {
        let user = plan.users[*u];
        let r = l1.submit_tx(user, addrs.bridge, EthBridge::withdraw_calldata(user, *v), 0)?;
        rec.tx("withdraw", &r);
        rec.check(r.revert_reason() == Some("INVALID_MESSAGE_TO_CONSUME"), "withdrawal consumed before settlement");
        rec.log(&l1, "early withdrawal rejected: INVALID_MESSAGE_TO_CONSUME");
    }

    let mut waited = 0;
    while !seq.due(l1.pending_timestamp()) {
        l1.mine_block();
        seq.produce_block(&[]);
        waited += 1;
        if waited > MAX_WAIT_BLOCKS {
            return Err(ScenarioError::Stuck("proof cadence never came due".into()));
        }
    }

    if cfg.workload.planted_fraud {
        let mut bad = seq.build_settlement(&prover)?;
        bad.proof.new_root = keccak_concat([bad.proof.new_root.as_bytes(), b"planted".as_slice()]);
        let before = l1.contract::<validityrollup::StarknetCore>(&addrs.core).expect("core deployed").state_root;
        let r = l1.submit_tx(addrs.operator, addrs.core, bad.calldata(), 0)?;
        rec.tx("settlement", &r);
        rec.check(!r.succeeded(), "invalid state update was accepted");
        let after = l1.contract::<validityrollup::StarknetCore>(&addrs.core).expect("core deployed").state_root;
        rec.check(before == after, "rejected state update changed the root");
        rec.log(&l1, format!("invalid state update rejected: {}", r.revert_reason().unwrap_or("")));
    }

    let s = seq.build_settlement(&prover)?;
    let r = l1.submit_tx(addrs.operator, addrs.core, s.calldata(), 0)?;
    rec.tx("settlement", &r);
    rec.check(r.succeeded(), format!("settlement reverted: {:?}", r.revert_reason()));
    if r.succeeded() {
        seq.confirm(l1.pending_timestamp());
    }
    let settled_block = l1.pending_number();
    rec.log(&l1, format!("state update proven, root {}", hex::encode(&s.proof.new_root.0[..8])));
    l1.mine_block();

    let mut latencies = Vec::new();
    for (u, v) in &plan.withdrawals {
        let user = plan.users[*u];
        let before = l1.balance(&user);
        let r = l1.submit_tx(user, addrs.bridge, EthBridge::withdraw_calldata(user, *v), 0)?;
        rec.tx("withdraw", &r);
        rec.check(r.succeeded(), format!("withdrawal reverted: {:?}", r.revert_reason()));
        rec.check(l1.balance(&user) == before + v, "withdrawal paid the wrong amount");
        rec.check(r.block_number == settled_block + 1, "withdrawal not consumable in the block after settlement");
        rec.log(&l1, format!("withdrawal of {v} wei consumed"));
        latencies.push(WithdrawalLatency {
            user,
            amount: *v,
            initiated_at,
            finalized_at: l1.pending_timestamp(),
            finalized_block: l1.pending_number(),
        });
    }
    l1.mine_block();
    let rebuilt = reconstruct_state(&l1, addrs.core, &genesis)?;
    rec.check(&rebuilt == seq.settled_state(), "state rebuilt from calldata differs from the sequencer");
    Ok(latencies)
}
