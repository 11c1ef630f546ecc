//! Validity rollup: state-diff calldata, L1↔L2 message counters and the
//! handler dispatch, the algebraic machine with its hint-driven runner,
//! proof settlement on L1, and the recursive-aggregation timing model.

pub mod cairo;
mod core;
mod diff;
mod l2;
mod messaging;
mod recursion;
mod settle;

use thiserror::Error;

use crate::l1sim::abi::AbiError;
use crate::l1sim::L1Error;
use crate::primitives::{Address, B256, Word};
use crate::snark::SnarkError;

pub use self::core::{
    deploy, messages_to_l2, reconstruct_state, settle, EthBridge, ProofCadence, Sequencer, Settlement, StarknetCore,
    ValidityAddresses, CONSUMED_MESSAGE_TO_L1, L2_ETH_BRIDGE, LOG_DEPOSIT, LOG_MESSAGE_TO_L1, LOG_MESSAGE_TO_L2,
    LOG_STATE_UPDATE, LOG_WITHDRAWAL,
};
pub use cairo::{
    cairo_step_valid, deterministic_accept, nondeterministic_accept, run_program, sqrt_hint, sqrt_program, CairoProgram,
    CairoState, ExecutionTrace, PartialMemory, PublicInput, RunConfig, RunOutput,
};
pub use diff::{
    bytes_to_words, decode_state_diff, diff_calldata_gas, encode_state_diff, format_words, parse_words, sample_diff_words,
    words_to_bytes, ContractUpdates, Deployment, StateDiff, SAMPLE_DIFF,
};
pub use l2::{balance_key, ContractState, Effects, StarkL2, StarkState, StarkTx};
pub use messaging::{
    address_word, l1_to_l2_hash, l2_to_l1_hash, messages_digest, selector_from_name, withdraw_payload, word_address, Direction,
    L1ToL2Message, L2Message, L2ToL1Message, STARK_PRIME, TRANSFER_FROM_STARKNET,
};
pub use recursion::{aggregate_recursive, Aggregation, AggregationNode, PolyLogModel, ProverModel};
pub use settle::{
    trace_transition, transition_updates, verify_transition, Statement, TransitionProver, ValidityProof, VkRecord,
    COMMITMENT_BASE,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidityError {
    #[error("malformed state diff: {0}")]
    MalformedDiff(String),
    #[error("selector name is empty")]
    EmptyName,
    #[error("invalid instruction {0:#x}")]
    InvalidInstruction(u64),
    #[error("memory undefined at {addr}")]
    InvalidAccess { addr: u64 },
    #[error("memory contradiction at {addr}")]
    MemoryContradiction { addr: u64 },
    #[error("insufficient hints at pc {pc}")]
    InsufficientHints { pc: u64 },
    #[error("no halt within {0} steps")]
    StepLimit(u64),
    #[error("program bounds [{start}, {end}) outside bytecode of length {len}")]
    BadProgramBounds { start: usize, end: usize, len: usize },
    #[error("trace rejected: {0}")]
    TraceRejected(String),
    #[error("validity proof rejected")]
    ProofRejected,
    #[error("state update does not match the proven statement")]
    StateMismatch,
    #[error("no handler for selector {selector} on contract {contract}")]
    NoHandler { contract: Word, selector: Word },
    #[error("handler assertion failed: {0}")]
    HandlerAssertion(String),
    #[error("insufficient L2 balance")]
    InsufficientL2Balance,
    #[error("aggregation needs at least one leaf")]
    NoLeaves,
    #[error("INVALID_MESSAGE_TO_CONSUME")]
    InvalidMessageToConsume,
    #[error("L1 to L2 message {0} is not pending")]
    UnknownL1Message(B256),
    #[error("caller {0} is not authorized")]
    Unauthorized(Address),
    #[error("L1 transaction reverted: {0}")]
    Reverted(String),
    #[error(transparent)]
    Snark(#[from] SnarkError),
    #[error(transparent)]
    L1(#[from] L1Error),
    #[error(transparent)]
    Abi(#[from] AbiError),
}
