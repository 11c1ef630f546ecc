//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use rollsim::algebra::{Field, FieldElement, Group, Polynomial};
use rollsim::costbench::{
    amortized_proof_cost, bloom_params, compression_stats, da_cost_comparison, fixture_corpus, format_gas, BloomFilter,
    DaScenario, Membership, PAPER_DIFF_GAS,
};
use rollsim::l1sim::{censorship_expected_value, sstore_gas, CensorshipModel, StoreTransition};
use rollsim::oprollup::{
    build_channel, play, reassemble, split_frames, synthetic_trace, Batch, ChannelId, DisputeGame, FaultyTrace, Frame, Party,
    TraceSource,
};
use rollsim::primitives::{Address, Word, B256};
use rollsim::proofs::{
    freivalds_verify, schnorr_extract, schnorr_round_with, schnorr_simulate, schnorr_verify, Matrix, SchnorrGroup,
    SchnorrKeyPair, Transcript,
};
use rollsim::scenario::{run, RollupParams, RunReport, ScenarioConfig, TimelineEntry};
use rollsim::snark::{
    assemble, build_qap, compile_r1cs, flatten, forge_without_kea, prove, prove_unchecked, roots_check, setup, verify,
    witness, FlatOp, FlatProgram, Operand, Statement,
};
use rollsim::validityrollup::{
    aggregate_recursive, decode_state_diff, diff_calldata_gas, encode_state_diff, nondeterministic_accept, run_program,
    sample_diff_words, sqrt_hint, sqrt_program, words_to_bytes, Deployment, PolyLogModel, RunConfig, StateDiff,
    ValidityError,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("QAP worked example", Some(Duration::from_secs(1)), qap_worked_example),
        ("SNARK soundness and completeness", Some(Duration::from_secs(30)), snark_soundness),
        ("Schnorr vector, extractor and simulator", Some(Duration::from_secs(1)), schnorr),
        ("Freivalds", Some(Duration::from_secs(30)), freivalds),
        ("Bisection dispute", Some(Duration::from_secs(60)), bisection),
        ("Withdrawal timing", None, withdrawal_timing),
        ("Censorship expected value", Some(Duration::from_millis(1)), censorship),
        ("Data-availability round trips", Some(Duration::from_secs(10)), round_trips),
        ("Cost figures", None, cost_figures),
        ("Bloom filter", Some(Duration::from_secs(60)), bloom),
        ("Recursion model", Some(Duration::from_secs(1)), recursion),
        ("Algebraic machine", Some(Duration::from_secs(5)), cairo),
        ("Determinism", None, determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > *b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2}. {name}: {detail} [{elapsed:.2?}]", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn join(v: &[FieldElement]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn qap_worked_example() -> Outcome {
    let group = Group::default();
    let f = group.scalar_field();
    let program = flatten("x**3 + 8").map_err(|e| e.to_string())?;
    let r1cs = compile_r1cs(&program, f).map_err(|e| e.to_string())?;
    let qap = build_qap(&r1cs).map_err(|e| e.to_string())?;
    let poly = |c: [(i64, i64); 3]| Polynomial::new(f, c.iter().map(|(n, d)| f.ratio(*n, *d).unwrap()).collect());
    let zero = [(0, 1); 3];
    let a2 = [(3, 1), (-5, 2), (1, 2)];
    let a3 = [(-3, 1), (4, 1), (-1, 1)];
    let a4 = [(1, 1), (-3, 2), (1, 2)];
    let expected = [
        ("A", &qap.a, [[(8, 1), (-12, 1), (4, 1)], a2, a3, a4, zero]),
        ("B", &qap.b, [[(1, 1), (-3, 2), (1, 2)], [(0, 1), (3, 2), (-1, 2)], zero, zero, zero]),
        ("C", &qap.c, [zero, zero, a2, a3, a4]),
    ];
    let mut checked = 0;
    for (name, polys, want) in expected {
        ensure!(polys.len() == 5, "{name} has {} polynomials", polys.len());
        for (i, w) in want.iter().enumerate() {
            ensure!(polys[i] == poly(*w), "{name}{} = {}", i + 1, polys[i]);
            checked += 1;
        }
    }
    ensure!(qap.a[1].to_string() == "1/2x^2 - 5/2x + 3", "A2 displays as {}", qap.a[1]);
    ensure!(qap.z == Polynomial::from_i64s(f, &[-6, 11, -6, 1]), "Z = {}", qap.z);
    let s = witness(&program, f, &[f.elem(3)]).map_err(|e| e.to_string())?;
    let want_s: Vec<_> = [1, 3, 9, 27, 35].iter().map(|v| f.elem(*v)).collect();
    ensure!(s == want_s, "witness [{}]", join(&s));
    let (p, h) = assemble(&qap, &s).map_err(|e| e.to_string())?;
    ensure!(p == Polynomial::from_i64s(f, &[36, -6, -74, 54, -10]), "P = {p}");
    ensure!(h == Polynomial::from_i64s(f, &[-6, -10]), "H = {h}");
    ensure!(&h * &qap.z == p, "H * Z != P");
    Ok(format!("{checked} polynomials, P = {p}, Z = {}, H = {h}, s = [{}]", qap.z, join(&s)))
}

/// Straight-line program over `x, y` with up to `max_gates` gates.
fn random_program(rng: &mut impl Rng, max_gates: usize) -> FlatProgram {
    let inputs = vec!["x".to_owned(), "y".to_owned()];
    let mut vars = inputs.clone();
    let gates = rng.gen_range(1..=max_gates);
    let mut statements = Vec::new();
    for g in 0..gates {
        let mut operand = || {
            if rng.gen_bool(0.25) {
                Operand::Const(rng.gen_range(-9..10))
            } else {
                Operand::Var(vars[rng.gen_range(0..vars.len())].clone())
            }
        };
        let (lhs, rhs) = (operand(), operand());
        let op = [FlatOp::Add, FlatOp::Sub, FlatOp::Mul][rng.gen_range(0..3)];
        let target = if g + 1 == gates { "out".to_owned() } else { format!("t{g}") };
        vars.push(target.clone());
        statements.push(Statement { target, lhs, op, rhs });
    }
    FlatProgram { inputs, output: "out".into(), statements }
}

fn snark_soundness() -> Outcome {
    let group = Group::default();
    let field = group.scalar_field();
    let mut rng = rng(0xACCE);
    let g = group.generator();
    let (mut accepted, mut rejected, mut forged) = (0, 0, 0);
    while accepted < 100 || rejected < 100 {
        let fp = random_program(&mut rng, 6);
        let r1cs = compile_r1cs(&fp, field).map_err(|e| e.to_string())?;
        let qap = build_qap(&r1cs).map_err(|e| e.to_string())?;
        let crs = setup(&qap, group, &mut rng).map_err(|e| e.to_string())?;
        let s = witness(&fp, field, &[field.random(&mut rng), field.random(&mut rng)]).map_err(|e| e.to_string())?;
        let proof = prove(&crs, &qap, &s).map_err(|e| e.to_string())?;
        if accepted < 100 {
            ensure!(verify(&crs.vk, &proof), "honest proof rejected for\n{fp}");
            accepted += 1;
        }
        if rejected < 100 {
            let bad = if rng.gen_bool(0.5) {
                let mut bad = proof;
                let shift = g.pow_clear(field.random_nonzero(&mut rng));
                match rng.gen_range(0..3) {
                    0 => bad.p = bad.p.mul(&shift),
                    1 => bad.p_prime = bad.p_prime.mul(&shift),
                    _ => bad.h = bad.h.mul(&shift),
                }
                bad
            } else {
                let mut w = s.clone();
                let i = rng.gen_range(1..w.len());
                w[i] += field.random_nonzero(&mut rng);
                if r1cs.is_satisfied(&w) {
                    continue;
                }
                prove_unchecked(&crs, &qap, &w).map_err(|e| e.to_string())?
            };
            ensure!(!verify(&crs.vk, &bad), "mutated proof accepted for\n{fp}");
            rejected += 1;
        }
        let forgery = forge_without_kea(&crs.vk, &mut rng);
        ensure!(roots_check(&crs.vk, &forgery), "forgery fails the roots check");
        ensure!(!verify(&crs.vk, &forgery), "forgery passes full verification");
        forged += 1;
    }
    Ok(format!("{accepted} honest accepted, {rejected} mutations rejected, {forged} forgeries pass roots check only"))
}

fn transcript_values(t: &Transcript) -> Vec<u64> {
    t.messages().iter().map(|m| u64::from_be_bytes(m.hex.as_slice().try_into().unwrap())).collect()
}

fn schnorr() -> Outcome {
    let group = SchnorrGroup::new(23, 11, 2).map_err(|e| e.to_string())?;
    let keys = SchnorrKeyPair::from_secret(&group, 7);
    let t = schnorr_round_with(&group, &keys, 3, 4);
    let v = transcript_values(&t);
    ensure!(v == [8, 4, 9], "transcript (h, c, s) = {v:?}");
    let lhs = group.exp(v[2]);
    let rhs = (0..v[1]).fold(v[0], |acc, _| acc * keys.public % group.p);
    ensure!(lhs == 6 && rhs == 6, "g^s = {lhs}, PK^c h = {rhs}");
    ensure!(schnorr_verify(&group, keys.public, &t) == Ok(true), "hand vector rejected");
    let t2 = schnorr_round_with(&group, &keys, 3, 9);
    let a = schnorr_extract(&group, &t, &t2).map_err(|e| e.to_string())?;
    ensure!(a == 7, "extracted {a}");
    let mut rng = rng(0x5C);
    let mut sims = 0;
    for g in [SchnorrGroup::small(), SchnorrGroup::large()] {
        for _ in 0..50 {
            let pk = SchnorrKeyPair::generate(&g, &mut rng).public;
            let c = rng.gen_range(0..g.q);
            let sim = schnorr_simulate(&g, pk, c, &mut rng);
            ensure!(schnorr_verify(&g, pk, &sim) == Ok(true), "simulated transcript rejected");
            sims += 1;
        }
    }
    Ok(format!("s = 9, both sides 6, extracted a = {a}, {sims} simulated transcripts verify"))
}

fn freivalds() -> Outcome {
    let field = Field::default();
    ensure!(field.modulus() >= (1 << 61) - 1, "field too small");
    let mut rng = rng(0xF4);
    let n = 8;
    let mut false_rejects = 0;
    let mut false_accepts = 0;
    for _ in 0..1000 {
        let a = Matrix::random(field, n, &mut rng);
        let b = Matrix::random(field, n, &mut rng);
        let c = a.mul(&b).map_err(|e| e.to_string())?;
        if !freivalds_verify(&a, &b, &c, 10, &mut rng).map_err(|e| e.to_string())? {
            false_rejects += 1;
        }
        let mut bad = c.clone();
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        bad.set(i, j, bad.get(i, j) + field.random_nonzero(&mut rng));
        if freivalds_verify(&a, &b, &bad, 10, &mut rng).map_err(|e| e.to_string())? {
            false_accepts += 1;
        }
    }
    ensure!(false_rejects == 0 && false_accepts == 0, "{false_rejects} false rejects, {false_accepts} false accepts");
    Ok(format!("{n}x{n} over p = 2^61 - 1: 0 false rejects, 0 false accepts in 1000 + 1000 trials"))
}

fn bisection() -> Outcome {
    let steps = 4096;
    let honest = synthetic_trace(steps).map_err(|e| e.to_string())?;
    let deadline = 1000;
    let open = |d: &dyn TraceSource, c: &dyn TraceSource| {
        DisputeGame::open(
            Address::from_label("challenger"),
            Address::from_label("defender"),
            honest.state_hash(0),
            d.state_hash(steps),
            c.state_hash(steps),
            steps,
            deadline,
        )
        .map_err(|e| e.to_string())
    };
    let positions: Vec<u64> = (0..64).map(|i| 1 + i * (steps - 1) / 63).collect();
    let mut max_rounds = 0;
    for &fault in &positions {
        let bad = FaultyTrace { honest: &honest, from: fault };
        for (d, c, want) in [
            (&bad as &dyn TraceSource, &honest as &dyn TraceSource, Party::Challenger),
            (&honest as &dyn TraceSource, &bad as &dyn TraceSource, Party::Defender),
        ] {
            let mut game = open(d, c)?;
            let winner = play(&mut game, d, c, &honest).map_err(|e| e.to_string())?;
            ensure!(winner == want, "fault {fault}: {winner:?} won, expected {want:?}");
            ensure!(game.rounds <= 13, "fault {fault}: {} rounds", game.rounds);
            max_rounds = max_rounds.max(game.rounds);
        }
    }
    let bad = FaultyTrace { honest: &honest, from: 1000 };
    let mut game = open(&bad, &honest)?;
    ensure!(game.timeout(deadline - 1).is_err(), "timeout accepted before the deadline");
    let w = game.timeout(deadline).map_err(|e| e.to_string())?;
    ensure!(w == Party::Challenger, "silent defender: {w:?} won");
    let mut game = open(&honest, &bad)?;
    game.bisect(Party::Defender, honest.state_hash(game.midpoint())).map_err(|e| e.to_string())?;
    let w = game.timeout(deadline).map_err(|e| e.to_string())?;
    ensure!(w == Party::Defender, "silent challenger: {w:?} won");
    Ok(format!("64 fault positions x 2 roles, honest side always wins, max {max_rounds} rounds; timeouts award the opponent"))
}

/// Positions of entries whose event starts with each prefix, in order.
fn ordered<'a>(timeline: &'a [TimelineEntry], prefixes: &[&str]) -> Result<Vec<&'a TimelineEntry>, String> {
    let mut out = Vec::new();
    let mut from = 0;
    for p in prefixes {
        let i = timeline[from..]
            .iter()
            .position(|e| e.event.starts_with(p))
            .ok_or_else(|| format!("no \"{p}\" after entry {from}"))?;
        out.push(&timeline[from + i]);
        from += i + 1;
    }
    Ok(out)
}

fn withdrawal_timing() -> Outcome {
    let op_cfg = ScenarioConfig::new(11, RollupParams::optimistic());
    let va_cfg = op_cfg.twin(RollupParams::validity());
    let period = op_cfg.rollup.dispute_period;
    let op = run(&op_cfg).map_err(|e| e.to_string())?;
    let va = run(&va_cfg).map_err(|e| e.to_string())?;
    ensure!(op.violations.is_empty(), "optimistic violations: {:?}", op.violations);
    ensure!(va.violations.is_empty(), "validity violations: {:?}", va.violations);

    let e = ordered(
        &op.timeline,
        &["deposit", "batch", "output root proposed", "early finalization rejected: proposal is not yet finalized", "withdrawal"],
    )?;
    let proposed = e[2].timestamp;
    ensure!(e[3].timestamp == proposed + period - 1, "early attempt at +{}", e[3].timestamp - proposed);
    ensure!(e[4].timestamp == proposed + period, "finalized at +{}", e[4].timestamp - proposed);

    let e = ordered(
        &va.timeline,
        &["deposit", "L2 block", "early withdrawal rejected: INVALID_MESSAGE_TO_CONSUME", "state update proven", "withdrawal"],
    )?;
    let settled = e[3].l1_block;
    let consumed: Vec<_> = va.timeline.iter().filter(|t| t.event.ends_with("wei consumed")).collect();
    ensure!(consumed.len() == va.withdrawals.len() && !consumed.is_empty(), "{} withdrawals consumed", consumed.len());
    ensure!(consumed.iter().all(|t| t.l1_block == settled + 1), "consumed outside block {}", settled + 1);
    Ok(format!(
        "optimistic: rejected at period - 1 s, finalized at period ({period} s); validity: settled in block {settled}, consumed in {}",
        settled + 1
    ))
}

fn censorship() -> Outcome {
    let model = CensorshipModel::new(1e6, 0.99, 1800).map_err(|e| e.to_string())?;
    let ev = censorship_expected_value(&model);
    ensure!((ev - 0.01391).abs() <= 1e-4, "EV = {ev}");
    Ok(format!("EV = {ev:.5} ether"))
}

fn random_batch(rng: &mut ChaCha20Rng) -> Batch {
    let mut b256 = || {
        let mut b = [0u8; 32];
        rng.fill_bytes(&mut b);
        B256(b)
    };
    let (epoch_hash, parent_hash) = (b256(), b256());
    let txs = rng.gen_range(0..6);
    Batch {
        epoch_number: rng.gen_range(0..1 << 40),
        epoch_hash,
        parent_hash,
        timestamp: rng.gen(),
        tx_list: (0..txs)
            .map(|_| {
                let mut t = vec![0u8; rng.gen_range(0..300)];
                rng.fill_bytes(&mut t);
                t
            })
            .collect(),
    }
}

fn random_word(rng: &mut ChaCha20Rng) -> Word {
    if rng.gen_bool(0.5) {
        Word::from_u64(rng.gen_range(0..16))
    } else {
        let mut w = [0u8; 32];
        rng.fill_bytes(&mut w);
        Word(w)
    }
}

fn random_diff(rng: &mut ChaCha20Rng) -> StateDiff {
    let mut d = StateDiff::new();
    for _ in 0..rng.gen_range(0..3) {
        let args = (0..rng.gen_range(0..4)).map(|_| random_word(rng)).collect();
        d.deploy(Deployment { address: random_word(rng), contract_hash: random_word(rng), constructor_args: args });
    }
    for _ in 0..rng.gen_range(0..20) {
        let (c, k, v) = (Word::from_u64(rng.gen_range(0..4)), random_word(rng), random_word(rng));
        d.write(c, k, v);
    }
    d
}

fn round_trips() -> Outcome {
    let mut rng = rng(0xDA);
    let mut frames_total = 0;
    for _ in 0..500 {
        let batches: Vec<Batch> = (0..rng.gen_range(0..6)).map(|_| random_batch(&mut rng)).collect();
        let id = ChannelId { random: rng.gen(), timestamp: rng.gen() };
        let channel = build_channel(&batches, id);
        let mut frames = split_frames(&channel, rng.gen_range(1..400)).map_err(|e| e.to_string())?;
        frames_total += frames.len();
        frames.shuffle(&mut rng);
        let mut received = Vec::new();
        let mut rest = frames.as_slice();
        while !rest.is_empty() {
            let take = rng.gen_range(1..=rest.len());
            let data: Vec<u8> = rest[..take].iter().flat_map(Frame::encode).collect();
            let (decoded, err) = Frame::decode_all(&data);
            ensure!(err.is_none(), "frame decode: {err:?}");
            received.extend(decoded);
            rest = &rest[take..];
        }
        let got = reassemble(&received).map_err(|e| e.to_string())?;
        ensure!(got == batches, "batch set differs after reassembly");
    }
    for _ in 0..100 {
        let d = random_diff(&mut rng);
        let back = decode_state_diff(&encode_state_diff(&d)).map_err(|e| e.to_string())?;
        ensure!(back == d, "state diff differs after round trip");
    }
    let words = sample_diff_words();
    let sample = decode_state_diff(&words).map_err(|e| e.to_string())?;
    ensure!(words_to_bytes(&encode_state_diff(&sample)) == words_to_bytes(&words), "sample does not re-encode identically");
    Ok(format!("500 channels ({frames_total} frames), 100 state diffs, sample vector byte-identical"))
}

fn cost_figures() -> Outcome {
    let table = [
        (StoreTransition::ZeroToNonzero, true, 22_100),
        (StoreTransition::ZeroToNonzero, false, 20_000),
        (StoreTransition::NonzeroToNonzero, true, 5_000),
        (StoreTransition::NonzeroToNonzero, false, 2_900),
        (StoreTransition::Modified, true, 100),
        (StoreTransition::Modified, false, 100),
    ];
    for (t, cold, gas) in table {
        let c = sstore_gas(t, cold);
        ensure!(c.gas == gas && !c.refund, "{t:?} cold={cold}: {c:?}");
    }
    for cold in [true, false] {
        let to_zero = sstore_gas(StoreTransition::ToZero, cold);
        let prev = sstore_gas(StoreTransition::NonzeroToNonzero, cold);
        ensure!(to_zero.gas == prev.gas && to_zero.refund, "to-zero cold={cold}: {to_zero:?}");
    }
    let ten = da_cost_comparison(&DaScenario::distinct(10)).map_err(|e| e.to_string())?;
    ensure!(ten.l1_gas == 221_000, "10 cold writes cost {}", ten.l1_gas);
    let per_tx = amortized_proof_cost(267_830, 200).map_err(|e| e.to_string())?;
    ensure!(format_gas(per_tx) == "1339.15" && per_tx == 1339.15, "amortized {per_tx}");
    let diff_gas = diff_calldata_gas(&sample_diff_words());
    let off = (diff_gas as f64 - PAPER_DIFF_GAS as f64).abs() / PAPER_DIFF_GAS as f64;
    ensure!(off <= 0.25, "sample diff gas {diff_gas} vs {PAPER_DIFF_GAS}");
    let sample = da_cost_comparison(&DaScenario::sample()).map_err(|e| e.to_string())?;
    ensure!(sample.diff_gas == diff_gas && sample.l1_gas == 221_000, "sample report {} / {}", sample.diff_gas, sample.l1_gas);
    let corpus = fixture_corpus();
    let single = compression_stats(&corpus, 1).map_err(|e| e.to_string())?;
    let grouped = compression_stats(&corpus, 10).map_err(|e| e.to_string())?;
    ensure!(
        grouped.compressed_gas() <= single.compressed_gas() && single.compressed_gas() <= single.raw_gas(),
        "grouped {} single {} raw {}",
        grouped.compressed_gas(),
        single.compressed_gas(),
        single.raw_gas()
    );
    Ok(format!(
        "table exact, 221000, {}, sample diff {diff_gas} gas vs {PAPER_DIFF_GAS} ({:+.2}%), compression {} <= {} <= {}",
        format_gas(per_tx),
        100.0 * off,
        grouped.compressed_gas(),
        single.compressed_gas(),
        single.raw_gas()
    ))
}

fn bloom() -> Outcome {
    let a = bloom_params(1000, 0.01).map_err(|e| e.to_string())?;
    let b = bloom_params(1000, 0.001).map_err(|e| e.to_string())?;
    ensure!(a == (9585, 6) && b == (14377, 9), "params {a:?} {b:?}");
    let mut f = BloomFilter::new(a.0, a.1, 0xB1).map_err(|e| e.to_string())?;
    for i in 0u64..1000 {
        f.insert(&i.to_be_bytes());
    }
    let queries = 100_000u64;
    let hits = (0..queries).filter(|i| f.query(&(1 << 32 | i).to_be_bytes()) == Membership::MaybePresent).count();
    let rate = hits as f64 / queries as f64;
    ensure!((0.005..=0.02).contains(&rate), "fp rate {rate}");
    let mut big = BloomFilter::for_capacity(500_000, 0.01, 0xB2).map_err(|e| e.to_string())?;
    let mut misses = 0;
    for i in 0u64..500_000 {
        let e = i.wrapping_mul(0x9E37_79B9_7F4A_7C15).to_be_bytes();
        big.insert(&e);
        if big.query(&e) != Membership::MaybePresent {
            misses += 1;
        }
    }
    ensure!(misses == 0, "{misses} false negatives");
    Ok(format!("(9585, 6), (14377, 9), fp rate {rate:.4} over 1e5 absent queries, 0 false negatives over 1e6 ops"))
}

fn recursion() -> Outcome {
    let agg = aggregate_recursive(&[1.0; 1024], &PolyLogModel::default()).map_err(|e| e.to_string())?;
    ensure!(agg.t_tree <= 10.0, "t_tree = {}", agg.t_tree);
    ensure!(agg.t_sequential == 1024.0, "t_sequential = {}", agg.t_sequential);
    ensure!(agg.level_times.windows(2).all(|w| w[1] <= w[0]), "levels {:?}", agg.level_times);
    ensure!(agg.tree.leaves() == 1024, "{} leaves", agg.tree.leaves());
    Ok(format!("t_tree = {}, t_sequential = {}, {} levels non-increasing", agg.t_tree, agg.t_sequential, agg.level_times.len()))
}

fn cairo() -> Outcome {
    let field = Field::default();
    let cfg = RunConfig::default();
    let mut accepted = None;
    for (negate, want) in [(false, field.elem(5)), (true, -field.elem(5))] {
        let p = sqrt_program(field, 25).with_hint(2, sqrt_hint(negate));
        let out = run_program(&p, field, &cfg).map_err(|e| e.to_string())?;
        let t = &out.trace;
        ensure!(t.memory.get(t.states[1].ap) == Some(want), "root cell {:?}", t.memory.get(t.states[1].ap));
        ensure!(t.accepted(), "trace rejected");
        ensure!(nondeterministic_accept(&out.public, &t.memory, &t.states), "public input rejected");
        accepted.get_or_insert(out);
    }
    match run_program(&sqrt_program(field, 25).drop_hints(), field, &cfg) {
        Err(ValidityError::InsufficientHints { .. }) => {}
        other => return Err(format!("without hint: {other:?}")),
    }
    let out = accepted.unwrap();
    let root_addr = out.trace.states[1].ap;
    let cells: Vec<FieldElement> = out.trace.memory.iter().map(|(a, _)| a).collect();
    let mut rng = rng(0xCA);
    let mut done = 0;
    while done < 100 {
        let mut t = out.trace.clone();
        let delta = field.random_nonzero(&mut rng);
        if rng.gen_bool(0.5) {
            let addr = cells[rng.gen_range(0..cells.len())];
            let v = t.memory.get(addr).unwrap() + delta;
            if addr == root_addr && v == -field.elem(5) {
                continue;
            }
            t.memory.force(addr, v);
        } else {
            let s = &mut t.states[rng.gen_range(0..out.trace.states.len())];
            match rng.gen_range(0..3) {
                0 => s.pc += delta,
                1 => s.ap += delta,
                _ => s.fp += delta,
            }
        }
        // The public memory pins the bytecode; without it, a mutation of an
        // unused operand field is a valid run of a different program.
        ensure!(!nondeterministic_accept(&out.public, &t.memory, &t.states), "mutation {done} accepted: {:?}", t.states);
        done += 1;
    }
    Ok("root 5 and -5 accepted, InsufficientHints without hint, 100 mutations rejected".into())
}

fn determinism() -> Outcome {
    let mut op = ScenarioConfig::new(42, RollupParams::optimistic());
    op.workload.planted_fraud = true;
    let va = op.twin(RollupParams::validity());
    for cfg in [&op, &va] {
        let reports: Vec<RunReport> = (0..5).map(|_| run(cfg)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let first = reports[0].to_json();
        let same = reports.iter().filter(|r| r.to_json() == first).count();
        ensure!(same == 5, "{}: {same}/5 identical", cfg.rollup.name());
    }
    Ok("5/5 byte-identical reports on both stacks".into())
}
