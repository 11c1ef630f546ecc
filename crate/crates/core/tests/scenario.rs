use rollsim::scenario::{run, RollupParams, ScenarioConfig, Workload};

fn twins(seed: u64, fraud: bool) -> (ScenarioConfig, ScenarioConfig) {
    let mut op = ScenarioConfig::new(seed, RollupParams::optimistic());
    op.workload.planted_fraud = fraud;
    let validity = op.twin(RollupParams::validity());
    (op, validity)
}

#[test]
fn twin_withdrawal_latencies() {
    let (op, va) = twins(11, false);
    let (a, b) = (run(&op).unwrap(), run(&va).unwrap());
    assert!(a.violations.is_empty(), "{:?}", a.violations);
    assert!(b.violations.is_empty(), "{:?}", b.violations);
    assert_eq!(a.withdrawals.len(), 3);
    assert_eq!(b.withdrawals.len(), 3);
    let period = op.rollup.dispute_period;
    for w in &a.withdrawals {
        assert!(w.latency() >= period, "{}", w.latency());
    }
    for w in &b.withdrawals {
        assert!(w.latency() < 3600, "{}", w.latency());
    }
    let amounts = |r: &rollsim::scenario::RunReport| r.withdrawals.iter().map(|w| w.amount).collect::<Vec<_>>();
    assert_eq!(amounts(&a), amounts(&b));
    assert_eq!(a.costs, b.costs);
    assert!(a.timeline.iter().any(|e| e.event.contains("proposal is not yet finalized")));
    assert!(b.timeline.iter().any(|e| e.event.contains("INVALID_MESSAGE_TO_CONSUME")));
}

#[test]
fn planted_fraud_is_caught() {
    let (op, va) = twins(5, true);
    let a = run(&op).unwrap();
    assert!(a.violations.is_empty(), "{:?}", a.violations);
    assert_eq!(a.disputes.len(), 1);
    assert_eq!(a.disputes[0].winner, "challenger");
    assert!(a.disputes[0].stake_slashed > 0);
    assert_eq!(a.withdrawals.len(), 3);
    let b = run(&va).unwrap();
    assert!(b.violations.is_empty(), "{:?}", b.violations);
    assert!(b.timeline.iter().any(|e| e.event.starts_with("invalid state update rejected")));
}

#[test]
fn reports_are_reproducible() {
    for cfg in [twins(2, true).0, twins(2, true).1] {
        let first = run(&cfg).unwrap();
        for _ in 0..2 {
            assert_eq!(run(&cfg).unwrap().to_json(), first.to_json());
        }
        assert_eq!(first.config_hash, cfg.hash());
    }
    let other = run(&twins(3, true).1).unwrap();
    assert_ne!(other.hash(), run(&twins(2, true).1).unwrap().hash());
}

#[test]
fn empty_workload_on_both_stacks() {
    for rollup in [RollupParams::optimistic(), RollupParams::validity()] {
        let mut cfg = ScenarioConfig::new(1, rollup);
        cfg.workload = Workload::empty();
        let r = run(&cfg).unwrap();
        assert!(r.timeline.is_empty());
        assert_eq!(r.total_gas(), 0);
    }
}

#[test]
fn deposits_only() {
    for rollup in [RollupParams::optimistic(), RollupParams::validity()] {
        let mut cfg = ScenarioConfig::new(8, rollup);
        cfg.workload = Workload { users: 2, deposits: 3, transfers: 0, withdrawals: 0, planted_fraud: false };
        let r = run(&cfg).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(r.withdrawals.is_empty());
    }
}
