//! Optimistic rollup: Portal deposits, batch publication through channels
//! and frames, derivation of the L2 chain from L1, output proposals with a
//! dispute period, fast withdrawals, and the bisection game over a
//! Merkleized step machine.

mod channel;
mod contracts;
mod deposit;
mod derive;
mod dispute;
mod fast;
mod l2;
pub mod rlp;
pub mod vm;

use thiserror::Error;

use crate::l1sim::abi::AbiError;
use crate::l1sim::{L1Error, Revert};
use crate::merkle::MerkleError;
use crate::primitives::{Address, B256};

pub use channel::{build_channel, reassemble, split_frames, Batch, Channel, ChannelBank, ChannelId, Frame};
pub use contracts::{
    deploy, transition_input, transition_trace, DisputeContract, GameRecord, OpAddresses, OpParams, OutputOracle,
    OutputProposal, Portal, TraceClaim, OUTPUT_PROPOSED_EVENT, WITHDRAWAL_FINALIZED_EVENT,
};
pub use deposit::{
    alias_address, deposit_burn, source_hash, unalias_address, DepositRequest, DepositedTx, ALIAS_OFFSET,
    DEPOSIT_TX_TYPE, MAX_GUARANTEED_GAS_PER_BLOCK,
};
pub use derive::{derive, Batcher, RollupConfig};
pub use dispute::{play, synthetic_trace, DisputeGame, FaultyTrace, GamePhase, Party, TraceSource};
pub use fast::{Attestation, FastBridge, FastOracle, Loan};
pub use l2::{
    apply_deposit, initiate_withdrawal, output_root, L2Block, L2Chain, L2State, L2Tx, OutputRootProof, UserTx, WithdrawalTx, L1_ATTRIBUTES_DEPOSITOR,
    L1_BLOCK_PREDEPLOY, MESSAGE_PASSER,
};

pub const DAY: u64 = 86_400;
pub const DEFAULT_DISPUTE_PERIOD: u64 = 7 * DAY;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpError {
    #[error("must send to address(0) when creating a contract")]
    MustSendToZero,
    #[error("guaranteed gas for this L1 block exhausted")]
    GuaranteedGasExhausted,
    #[error("channel incomplete")]
    ChannelIncomplete,
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("malformed L2 transaction: {0}")]
    MalformedTx(String),
    #[error(transparent)]
    Rlp(#[from] rlp::RlpError),
    #[error("caller is not a proposer")]
    NotProposer,
    #[error("stake {got} below minimum {min}")]
    StakeTooLow { got: u128, min: u128 },
    #[error("proposal rate limit reached")]
    ProposalRateLimited,
    #[error("output already proposed for L2 block {0}")]
    OutputExists(u64),
    #[error("no output proposal for L2 block {0}")]
    OutputNotFound(u64),
    #[error("insufficient funds: balance {balance}, needed {needed}")]
    InsufficientFunds { balance: u128, needed: u128 },
    #[error("you cannot send messages to the portal contract")]
    TargetIsPortal,
    #[error("proposal is not yet finalized")]
    NotFinalized,
    #[error("invalid output root proof")]
    InvalidOutputRootProof,
    #[error("invalid withdrawal inclusion proof")]
    InvalidWithdrawalProof,
    #[error("withdrawal has already been finalized")]
    AlreadyFinalized,
    #[error("insufficient gas to finalize withdrawal")]
    InsufficientGas,
    #[error("untrusted oracle")]
    UntrustedOracle,
    #[error("attestation does not match the withdrawal")]
    AttestationMismatch,
    #[error("insufficient liquidity")]
    InsufficientLiquidity,
    #[error("not your turn")]
    NotYourTurn,
    #[error("bad step proof: {0}")]
    BadStepProof(String),
    #[error("illegal instruction {0:#018x}")]
    IllegalInstruction(u64),
    #[error("preimage unavailable for {0}")]
    PreimageUnavailable(B256),
    #[error("preimage does not hash to its key")]
    PreimageMismatch,
    #[error("game already resolved")]
    GameResolved,
    #[error("deadline not reached")]
    DeadlineNotReached,
    #[error("claims agree, nothing to dispute")]
    NoDisagreement,
    #[error("unknown dispute game {0}")]
    UnknownGame(u64),
    #[error("trace must have at least one step")]
    EmptyTrace,
    #[error("caller {0} is not authorized")]
    Unauthorized(Address),
    #[error("L1 transaction reverted: {0}")]
    Reverted(String),
    #[error(transparent)]
    L1(#[from] L1Error),
    #[error(transparent)]
    Abi(#[from] AbiError),
    #[error(transparent)]
    Merkle(#[from] MerkleError),
}

impl From<OpError> for Revert {
    fn from(e: OpError) -> Self {
        Revert(e.to_string())
    }
}
