use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use rollsim::l1sim::{L1Chain, Receipt, ETHER, GWEI};
use rollsim::primitives::{Address, B256, Word};
use rollsim::validityrollup::{
    deploy, selector_from_name, l2_to_l1_hash, reconstruct_state, settle, withdraw_payload, EthBridge, ProofCadence, Sequencer,
    Settlement, StarknetCore, StarkState, StarkTx, TransitionProver, ValidityAddresses, ValidityError,
    CONSUMED_MESSAGE_TO_L1, L1ToL2Message, L2ToL1Message, L2_ETH_BRIDGE, LOG_STATE_UPDATE, LOG_WITHDRAWAL,
};

const FEE: u128 = 1_000 * GWEI;

struct World {
    l1: L1Chain,
    addrs: ValidityAddresses,
    prover: TransitionProver,
    seq: Sequencer,
    genesis: StarkState,
    alice: Address,
    bob: Address,
}

impl World {
    fn new() -> Self {
        let mut l1 = L1Chain::default();
        let addrs = ValidityAddresses::default();
        let [alice, bob] = ["alice", "bob"].map(Address::from_label);
        l1.create_account(alice, 100 * ETHER).unwrap();
        l1.create_account(bob, 0).unwrap();
        l1.create_account(addrs.operator, ETHER).unwrap();
        let prover = TransitionProver::setup(&mut ChaCha20Rng::seed_from_u64(21)).unwrap();
        let l2 = deploy(&mut l1, addrs, prover.verifying_key()).unwrap();
        let genesis = l2.state.clone();
        let seq = Sequencer::new(l2, ProofCadence::Blocks(1), l1.pending_timestamp());
        Self { l1, addrs, prover, seq, genesis, alice, bob }
    }

    fn core(&self) -> &StarknetCore {
        self.l1.contract::<StarknetCore>(&self.addrs.core).unwrap()
    }

    fn deposit(&mut self, user: Word, amount: u128) -> Receipt {
        self.l1.submit_tx(self.alice, self.addrs.bridge, EthBridge::deposit_calldata(user, amount), amount + FEE).unwrap()
    }

    /// Delivers pending L1 messages plus `txs` in one L2 block.
    fn l2_block(&mut self, txs: &[StarkTx]) {
        let mut all = self.seq.poll_l1(&self.l1, self.addrs.core);
        all.extend_from_slice(txs);
        for r in self.seq.produce_block(&all) {
            r.unwrap();
        }
    }

    fn settle(&mut self) -> Result<B256, ValidityError> {
        self.seq.settle(&mut self.l1, self.addrs.core, self.addrs.operator, &self.prover)
    }

    fn withdraw(&mut self, recipient: Address, amount: u128) -> Receipt {
        self.l1.submit_tx(self.bob, self.addrs.bridge, EthBridge::withdraw_calldata(recipient, amount), 0).unwrap()
    }
}

fn user() -> Word {
    Word::from_u64(0xa11ce)
}

#[test]
fn deposit_reaches_l2_and_fee_goes_to_operator() {
    let mut w = World::new();
    let r = w.deposit(user(), 2 * ETHER);
    assert!(r.succeeded(), "{:?}", r.revert_reason());
    assert_eq!(w.l1.balance(&w.addrs.bridge), 2 * ETHER);
    assert_eq!(w.l1.balance(&w.addrs.core), FEE);
    w.l1.mine_block();
    w.l2_block(&[]);
    assert_eq!(w.seq.l2.balance(&user()), 2 * ETHER);
    let operator_before = w.l1.balance(&w.addrs.operator);
    let hash = w.seq.pending().consumed[0];
    assert_eq!(w.core().l1_to_l2_count(&hash), 1);
    w.settle().unwrap();
    assert_eq!(w.core().l1_to_l2_count(&hash), 0);
    assert_eq!(w.l1.balance(&w.addrs.operator), operator_before + FEE);
    assert_eq!(w.l1.balance(&w.addrs.core), 0);
    assert_eq!(w.core().state_root, w.seq.l2.state.root());
}

#[test]
fn identical_sends_get_distinct_hashes() {
    let mut w = World::new();
    w.deposit(user(), 5);
    w.deposit(user(), 5);
    w.l1.mine_block();
    let txs = w.seq.poll_l1(&w.l1, w.addrs.core);
    assert_eq!(txs.len(), 2);
    let hashes: Vec<B256> = txs
        .iter()
        .map(|t| match t {
            StarkTx::L1Handler(m) => m.hash(),
            _ => unreachable!(),
        })
        .collect();
    assert_ne!(hashes[0], hashes[1]);
    for h in &hashes {
        assert_eq!(w.core().l1_to_l2_count(h), 1);
    }
    assert_eq!(w.core().l1_to_l2_count(&B256::from_u64(1)), 0);
    assert!(w.seq.poll_l1(&w.l1, w.addrs.core).is_empty());
}

#[test]
fn withdrawal_consumable_right_after_settlement() {
    let mut w = World::new();
    w.deposit(user(), 3 * ETHER);
    w.l1.mine_block();
    w.l2_block(&[]);
    w.settle().unwrap();
    w.l1.mine_block();

    let bob = w.bob;
    w.l2_block(&[StarkTx::Withdraw { user: user(), recipient: bob, amount: ETHER }]);
    let early = w.withdraw(bob, ETHER);
    assert_eq!(early.revert_reason(), Some("INVALID_MESSAGE_TO_CONSUME"));
    w.l1.mine_block();

    w.settle().unwrap();
    let settled_in = w.l1.pending_number();
    w.l1.mine_block();
    let r = w.withdraw(bob, ETHER);
    assert!(r.succeeded(), "{:?}", r.revert_reason());
    assert_eq!(r.block_number, settled_in + 1);
    assert_eq!(w.l1.balance(&bob), ETHER);
    let names: Vec<&str> = r.logs.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names, [CONSUMED_MESSAGE_TO_L1, LOG_WITHDRAWAL]);

    let again = w.withdraw(bob, ETHER);
    assert_eq!(again.revert_reason(), Some("INVALID_MESSAGE_TO_CONSUME"));
    let h = l2_to_l1_hash(&L2_ETH_BRIDGE, &w.addrs.bridge, &withdraw_payload(&bob, ETHER));
    assert_eq!(w.core().l2_to_l1_count(&h), 0);
}

#[test]
fn tampered_settlements_are_rejected() {
    let mut w = World::new();
    w.deposit(user(), ETHER);
    w.l1.mine_block();
    w.l2_block(&[]);
    let honest = w.seq.build_settlement(&w.prover).unwrap();
    let before = w.core().clone();

    let mut diff = honest.clone();
    let last = diff.diff.len() - 1;
    diff.diff[last] = Word::from_u128(1_000 * ETHER);
    let mut root = honest.clone();
    root.proof.new_root = B256::from_u64(7);
    let mut forged = honest.clone();
    forged.proof.snark.p_prime = forged.proof.snark.h.clone();
    let mut msgs = honest.clone();
    msgs.consumed.clear();
    let mut unknown = honest.clone();
    unknown.consumed.push(B256::from_u64(99));

    for (bad, want) in [
        (diff, ValidityError::StateMismatch),
        (root, ValidityError::StateMismatch),
        (forged, ValidityError::ProofRejected),
        (msgs, ValidityError::StateMismatch),
        (unknown, ValidityError::StateMismatch),
    ] {
        let err = settle(&mut w.l1, w.addrs.core, w.addrs.operator, &bad).unwrap_err();
        assert_eq!(err, ValidityError::Reverted(want.to_string()));
        assert_eq!(*w.core(), before);
    }
    let stranger = settle(&mut w.l1, w.addrs.core, w.alice, &honest).unwrap_err();
    assert!(matches!(stranger, ValidityError::Reverted(r) if r.contains("not authorized")));
    settle(&mut w.l1, w.addrs.core, w.addrs.operator, &honest).unwrap();
}

#[test]
fn settling_an_unlogged_message_reverts_everything() {
    let mut w = World::new();
    w.deposit(user(), ETHER);
    w.l1.mine_block();
    let ghost = L1ToL2Message {
        from: w.addrs.bridge,
        to: L2_ETH_BRIDGE,
        selector: selector_from_name("deposit").unwrap(),
        payload: vec![user(), Word::from_u128(ETHER)],
        nonce: 999,
    };
    w.l2_block(&[StarkTx::L1Handler(ghost.clone())]);
    assert_eq!(w.seq.l2.balance(&user()), 2 * ETHER);
    let before = w.core().clone();
    let operator = w.l1.balance(&w.addrs.operator);
    let err = w.settle().unwrap_err();
    assert_eq!(err, ValidityError::Reverted(ValidityError::UnknownL1Message(ghost.hash()).to_string()));
    assert_eq!(*w.core(), before);
    assert_eq!(w.l1.balance(&w.addrs.operator), operator);
    assert_eq!(w.seq.settled_state(), &w.genesis);
}

#[test]
fn root_history_is_append_only_and_matches_full_node() {
    let mut w = World::new();
    let mut roots = vec![w.core().state_root];
    for i in 0..4u64 {
        w.deposit(Word::from_u64(i + 1), (i + 1) as u128 * ETHER);
        w.l1.mine_block();
        let t = StarkTx::Transfer { from: Word::from_u64(i + 1), to: user(), amount: 1 };
        w.l2_block(&[t]);
        roots.push(w.settle().unwrap());
        w.l1.mine_block();
        assert_eq!(w.core().root_history, roots);
        let rebuilt = reconstruct_state(&w.l1, w.addrs.core, &w.genesis).unwrap();
        assert_eq!(rebuilt, w.seq.l2.state);
        assert_eq!(rebuilt.root(), w.core().state_root);
    }
    let updates = w.l1.events().iter().filter(|e| e.name == LOG_STATE_UPDATE).count();
    assert_eq!(updates, 4);
}

#[test]
fn cadence() {
    let mut w = World::new();
    w.seq.cadence = ProofCadence::Blocks(3);
    for _ in 0..2 {
        w.l2_block(&[]);
        assert!(!w.seq.due(0));
    }
    w.l2_block(&[]);
    assert!(w.seq.due(0));
    let t0 = w.l1.pending_timestamp();
    w.settle().unwrap();
    w.seq.cadence = ProofCadence::Interval(36_000);
    assert!(!w.seq.due(t0 + 36_000));
    w.l2_block(&[]);
    assert!(!w.seq.due(t0 + 35_999));
    assert!(w.seq.due(t0 + 36_000));
}

#[test]
fn failed_l2_transactions_leave_no_trace() {
    let mut w = World::new();
    let mut results = w.seq.produce_block(&[StarkTx::Withdraw { user: user(), recipient: w.bob, amount: 1 }]);
    assert_eq!(results.pop().unwrap(), Err(ValidityError::InsufficientL2Balance));
    assert!(w.seq.pending().diff.is_empty());
    assert!(w.seq.pending().sent.is_empty());
}

#[derive(Debug, Clone)]
enum Action {
    Deposit(u64, u32),
    Withdraw(u64, u32),
    Settle,
    Tamper(u8),
    Consume(u32),
}

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        (0u64..3, 1u32..1000).prop_map(|(u, a)| Action::Deposit(u, a)),
        (0u64..3, 1u32..1000).prop_map(|(u, a)| Action::Withdraw(u, a)),
        Just(Action::Settle),
        (0u8..4).prop_map(Action::Tamper),
        (1u32..1000).prop_map(Action::Consume),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn settlement_is_atomic_and_counters_conserve(actions in prop::collection::vec(action(), 1..16)) {
        let mut w = World::new();
        let bob = w.bob;
        let mut withdrawn: Vec<u128> = Vec::new();
        for a in actions {
            match a {
                Action::Deposit(u, amount) => {
                    prop_assert!(w.deposit(Word::from_u64(u + 1), amount as u128).succeeded());
                    w.l1.mine_block();
                    w.l2_block(&[]);
                }
                Action::Withdraw(u, amount) => {
                    let tx = StarkTx::Withdraw { user: Word::from_u64(u + 1), recipient: bob, amount: amount as u128 };
                    let ok = w.seq.produce_block(&[tx]).pop().unwrap().is_ok();
                    if ok {
                        withdrawn.push(amount as u128);
                    }
                }
                Action::Settle => {
                    w.settle().unwrap();
                    w.l1.mine_block();
                }
                Action::Tamper(kind) => {
                    let mut s: Settlement = w.seq.build_settlement(&w.prover).unwrap();
                    match kind {
                        0 => s.consumed.push(B256::from_u64(5)),
                        1 => s.proof.output ^= 1,
                        2 => s.sent.push(s.sent.first().cloned().unwrap_or_else(|| L2ToL1Message {
                            from: L2_ETH_BRIDGE,
                            to: bob,
                            payload: withdraw_payload(&bob, 1),
                        })),
                        _ => s.proof.snark.h = s.proof.snark.p.clone(),
                    }
                    let before = w.core().clone();
                    let balances = (w.l1.balance(&w.addrs.core), w.l1.balance(&w.addrs.operator));
                    prop_assert!(settle(&mut w.l1, w.addrs.core, w.addrs.operator, &s).is_err());
                    prop_assert_eq!(w.core(), &before);
                    prop_assert_eq!((w.l1.balance(&w.addrs.core), w.l1.balance(&w.addrs.operator)), balances);
                }
                Action::Consume(amount) => {
                    let r = w.withdraw(bob, amount as u128);
                    if r.succeeded() {
                        let i = withdrawn.iter().position(|x| *x == amount as u128);
                        prop_assert!(i.is_some());
                        withdrawn.remove(i.unwrap());
                    }
                    w.l1.mine_block();
                }
            }
            for n in w.core().l1_to_l2.values() {
                prop_assert!(*n <= 1);
            }
            let history = &w.core().root_history;
            prop_assert_eq!(history.last(), Some(&w.core().state_root));
        }
        let rebuilt = reconstruct_state(&w.l1, w.addrs.core, &w.genesis).unwrap();
        prop_assert_eq!(rebuilt, w.seq.settled_state().clone());
    }
}
