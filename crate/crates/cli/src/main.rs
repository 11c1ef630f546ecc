use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use rollsim::algebra::Group;
use rollsim::costbench::{
    amortized_proof_cost, bloom_params, compression_stats, da_cost_comparison, fixture_corpus, format_gas, fp_rate,
    BloomFilter, DaScenario, Membership,
};
use rollsim::oprollup::{play, synthetic_trace, DisputeGame, FaultyTrace, Party, TraceSource};
use rollsim::primitives::Address;
use rollsim::scenario::{run, RollupKind, RollupParams, ScenarioConfig};
use rollsim::snark::{assemble, build_qap, compile_r1cs, flatten, prove, setup, verify, witness};

#[derive(Parser)]
#[command(name = "rollsim", version, about = "Deterministic rollup simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario on the optimistic stack.
    SimulateOp(SimArgs),
    /// Run a scenario on the validity stack.
    SimulateValidity(SimArgs),
    /// Play a bisection game against a trace that goes wrong at `--fault`.
    DisputeDemo {
        #[arg(long, default_value_t = 1024)]
        steps: u64,
        #[arg(long, default_value_t = 600)]
        fault: u64,
        /// The challenger lies instead of the defender.
        #[arg(long)]
        honest_defender: bool,
        /// The lying side stops responding; the game ends by timeout.
        #[arg(long)]
        timeout: bool,
    },
    /// Walk the x^3 + 8 circuit through R1CS, QAP and a proof.
    SnarkDemo {
        #[arg(long, default_value_t = 3)]
        input: i64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Data-availability and compression cost comparison.
    CostReport {
        #[arg(long)]
        json: bool,
    },
    /// Bloom filter sizing, optionally checked by simulation.
    BloomCalc {
        #[arg(short = 'n', long)]
        n: u64,
        #[arg(short = 'p', long)]
        p: f64,
        /// Measure the false-positive rate over this many absent queries.
        #[arg(long, requires = "seed")]
        simulate: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct SimArgs {
    /// Scenario config (JSON).
    #[arg(long, env = "ROLLSIM_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Submit an invalid state claim before the honest one.
    #[arg(long)]
    fraud: bool,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::SimulateOp(a) => simulate(a, RollupKind::Optimistic),
        Command::SimulateValidity(a) => simulate(a, RollupKind::Validity),
        Command::DisputeDemo { steps, fault, honest_defender, timeout } => dispute_demo(steps, fault, honest_defender, timeout),
        Command::SnarkDemo { input, seed } => snark_demo(input, seed),
        Command::CostReport { json } => cost_report(json),
        Command::BloomCalc { n, p, simulate, seed } => bloom_calc(n, p, simulate, seed),
    }
}

fn simulate(a: SimArgs, kind: RollupKind) -> Result<ExitCode> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioConfig::from_json(&text)?
        }
        None => ScenarioConfig::new(a.seed, RollupParams::default()),
    };
    cfg.seed = a.seed;
    cfg.rollup.kind = kind;
    cfg.workload.planted_fraud |= a.fraud;
    let report = run(&cfg)?;
    if a.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
        println!("report hash {}", report.hash());
    }
    Ok(if report.violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn dispute_demo(steps: u64, fault: u64, honest_defender: bool, timeout: bool) -> Result<ExitCode> {
    if fault == 0 || fault > steps {
        bail!("--fault must be in 1..={steps}");
    }
    let honest = synthetic_trace(steps)?;
    let bad = FaultyTrace { honest: &honest, from: fault };
    let (d, c): (&dyn TraceSource, &dyn TraceSource) = if honest_defender { (&honest, &bad) } else { (&bad, &honest) };
    let deadline = 7 * 86_400;
    let mut game = DisputeGame::open(
        Address::from_label("challenger"),
        Address::from_label("defender"),
        honest.state_hash(0),
        d.state_hash(steps),
        c.state_hash(steps),
        steps,
        deadline,
    )?;
    let winner = if timeout {
        if honest_defender {
            bail!("--timeout models a silent defender; drop --honest-defender");
        }
        game.timeout(deadline)?
    } else {
        play(&mut game, d, c, &honest)?
    };
    let name = match winner {
        Party::Challenger => "challenger",
        Party::Defender => "defender",
    };
    println!("{name} wins, rounds={}", game.rounds);
    let expected = if honest_defender { Party::Defender } else { Party::Challenger };
    Ok(if winner == expected { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn snark_demo(input: i64, seed: u64) -> Result<ExitCode> {
    let group = Group::default();
    let field = group.scalar_field();
    let program = flatten("x**3 + 8")?;
    println!("flattened:\n{program}");
    let r1cs = compile_r1cs(&program, field)?;
    println!("variables: {:?}", r1cs.variables);
    for (i, k) in r1cs.constraints.iter().enumerate() {
        let show = |v: &[rollsim::algebra::FieldElement]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        println!("constraint {}: a=[{}] b=[{}] c=[{}]", i + 1, show(&k.a), show(&k.b), show(&k.c));
    }
    let qap = build_qap(&r1cs)?;
    for (name, polys) in [("A", &qap.a), ("B", &qap.b), ("C", &qap.c)] {
        for (i, p) in polys.iter().enumerate() {
            println!("{name}{}(x) = {p}", i + 1);
        }
    }
    println!("Z(x) = {}", qap.z);
    let s = witness(&program, field, &[field.from_i64(input)])?;
    println!("s = [{}]", s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "));
    let (p, h) = assemble(&qap, &s)?;
    println!("P(x) = {p}");
    println!("H(x) = {h}");
    let crs = setup(&qap, group, &mut ChaCha20Rng::seed_from_u64(seed))?;
    let proof = prove(&crs, &qap, &s)?;
    let ok = verify(&crs.vk, &proof);
    println!("verified: {ok}");
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cost_report(json: bool) -> Result<ExitCode> {
    let reports = [DaScenario::sample(), DaScenario::distinct(10), DaScenario::overwrite(10)]
        .iter()
        .map(da_cost_comparison)
        .collect::<Result<Vec<_>, _>>()?;
    let corpus = fixture_corpus();
    let single = compression_stats(&corpus, 1)?;
    let grouped = compression_stats(&corpus, 10)?;
    let per_tx = amortized_proof_cost(267_830, 200)?;
    if json {
        let out = serde_json::json!({
            "da": reports.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
            "compression": {
                "raw_gas": single.raw_gas(),
                "single_batch_gas": single.compressed_gas(),
                "grouped_gas": grouped.compressed_gas(),
                "single_byte_ratio": single.byte_ratio(),
                "grouped_byte_ratio": grouped.byte_ratio(),
            },
            "proof_gas_per_tx": format_gas(per_tx),
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        for r in &reports {
            println!("{}", r.to_text());
        }
        println!("compression over {} fixture batches", corpus.len());
        println!("  raw calldata gas        {:>10}", single.raw_gas());
        println!("  one batch per channel   {:>10}  ({:.2}% of bytes)", single.compressed_gas(), 100.0 * single.byte_ratio());
        println!("  ten batches per channel {:>10}  ({:.2}% of bytes)", grouped.compressed_gas(), 100.0 * grouped.byte_ratio());
        println!("proof gas per tx (267830 / 200): {}", format_gas(per_tx));
    }
    Ok(ExitCode::SUCCESS)
}

fn bloom_calc(n: u64, p: f64, simulate: Option<u64>, seed: Option<u64>) -> Result<ExitCode> {
    let (m, k) = bloom_params(n, p)?;
    println!("m={m} k={k}");
    println!("expected fp rate={:.5}", fp_rate(m, k, n));
    if let Some(queries) = simulate {
        let seed = seed.context("--simulate needs --seed")?;
        let mut f = BloomFilter::new(m, k, seed)?;
        for i in 0..n {
            f.insert(&i.to_be_bytes());
        }
        let hits = (0..queries).filter(|i| f.query(&(u64::MAX - i).to_be_bytes()) == Membership::MaybePresent).count();
        println!("observed fp rate={:.5} over {queries} queries", hits as f64 / queries.max(1) as f64);
    }
    Ok(ExitCode::SUCCESS)
}
