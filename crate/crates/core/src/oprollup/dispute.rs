use serde::{Deserialize, Serialize};

use super::vm::{fold_machine, vm_step, PreimageOracle, StepWitness, Trace, VmState};
use super::OpError;
use crate::primitives::{keccak_concat, Address, B256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Challenger,
    Defender,
}

impl Party {
    pub fn opponent(self) -> Party {
        match self {
            Party::Challenger => Party::Defender,
            Party::Defender => Party::Challenger,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GamePhase {
    /// Defender commits to the state hash at the midpoint.
    AwaitDefender,
    /// Challenger answers with its own hash at the midpoint.
    AwaitChallenger { defender_mid: B256 },
    /// `hi − lo = 1`: one instruction is executed on chain.
    AwaitStep,
    Resolved(Party),
}

/// Bisection over the state hashes of two claimed executions.
///
/// Invariant: both parties agree on the hash at `lo` and disagree at `hi`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeGame {
    pub challenger: Address,
    pub defender: Address,
    pub trace_length: u64,
    pub lo: u64,
    pub hi: u64,
    pub lo_hash: B256,
    pub hi_defender: B256,
    pub hi_challenger: B256,
    pub phase: GamePhase,
    pub deadline: u64,
    pub rounds: u32,
}

impl DisputeGame {
    /// Both parties start from `initial`; they disagree about the state
    /// after `trace_length` steps.
    #[allow(clippy::too_many_arguments)]
    pub fn open(
        challenger: Address,
        defender: Address,
        initial: B256,
        defender_final: B256,
        challenger_final: B256,
        trace_length: u64,
        deadline: u64,
    ) -> Result<Self, OpError> {
        if trace_length == 0 {
            return Err(OpError::EmptyTrace);
        }
        if defender_final == challenger_final {
            return Err(OpError::NoDisagreement);
        }
        let phase = if trace_length == 1 { GamePhase::AwaitStep } else { GamePhase::AwaitDefender };
        Ok(Self {
            challenger,
            defender,
            trace_length,
            lo: 0,
            hi: trace_length,
            lo_hash: initial,
            hi_defender: defender_final,
            hi_challenger: challenger_final,
            phase,
            deadline,
            rounds: 0,
        })
    }

    pub fn midpoint(&self) -> u64 {
        self.lo + (self.hi - self.lo) / 2
    }

    /// Party expected to move next; `None` once resolved.
    pub fn turn(&self) -> Option<Party> {
        match self.phase {
            GamePhase::AwaitDefender => Some(Party::Defender),
            GamePhase::AwaitChallenger { .. } | GamePhase::AwaitStep => Some(Party::Challenger),
            GamePhase::Resolved(_) => None,
        }
    }

    pub fn winner(&self) -> Option<Party> {
        match self.phase {
            GamePhase::Resolved(p) => Some(p),
            _ => None,
        }
    }

    pub fn party_of(&self, a: &Address) -> Option<Party> {
        if *a == self.challenger {
            Some(Party::Challenger)
        } else if *a == self.defender {
            Some(Party::Defender)
        } else {
            None
        }
    }

    pub fn bisect(&mut self, party: Party, hash: B256) -> Result<(), OpError> {
        match (self.phase, party) {
            (GamePhase::Resolved(_), _) => Err(OpError::GameResolved),
            (GamePhase::AwaitDefender, Party::Defender) => {
                self.phase = GamePhase::AwaitChallenger { defender_mid: hash };
                Ok(())
            }
            (GamePhase::AwaitChallenger { defender_mid }, Party::Challenger) => {
                let mid = self.midpoint();
                if hash == defender_mid {
                    self.lo = mid;
                    self.lo_hash = hash;
                } else {
                    self.hi = mid;
                    self.hi_defender = defender_mid;
                    self.hi_challenger = hash;
                }
                self.rounds += 1;
                self.phase = if self.hi - self.lo == 1 { GamePhase::AwaitStep } else { GamePhase::AwaitDefender };
                Ok(())
            }
            _ => Err(OpError::NotYourTurn),
        }
    }

    /// Executes step `lo → lo + 1` from the agreed pre-state. The defender
    /// wins iff the result reproduces its claim at `hi`.
    pub fn step(&mut self, pre: &VmState, witness: &StepWitness, preimages: &PreimageOracle) -> Result<Party, OpError> {
        match self.phase {
            GamePhase::Resolved(_) => return Err(OpError::GameResolved),
            GamePhase::AwaitStep => {}
            _ => return Err(OpError::NotYourTurn),
        }
        if pre.hash() != self.lo_hash {
            return Err(OpError::BadStepProof("pre-state does not match the agreed state".into()));
        }
        let post = vm_step(pre, witness, preimages)?;
        let winner = if post.hash() == self.hi_defender { Party::Defender } else { Party::Challenger };
        self.phase = GamePhase::Resolved(winner);
        Ok(winner)
    }

    /// Awards the game against the party that failed to move in time.
    pub fn timeout(&mut self, now: u64) -> Result<Party, OpError> {
        let silent = self.turn().ok_or(OpError::GameResolved)?;
        if now < self.deadline {
            return Err(OpError::DeadlineNotReached);
        }
        let winner = silent.opponent();
        self.phase = GamePhase::Resolved(winner);
        Ok(winner)
    }
}

/// State hashes a participant claims for an execution.
pub trait TraceSource {
    fn state_hash(&self, step: u64) -> B256;
}

impl TraceSource for Trace {
    fn state_hash(&self, step: u64) -> B256 {
        self.state(step.min(self.length())).expect("clamped step").hash()
    }
}

/// A trace that is honest before `from` and wrong from there on.
pub struct FaultyTrace<'a> {
    pub honest: &'a Trace,
    pub from: u64,
}

impl TraceSource for FaultyTrace<'_> {
    fn state_hash(&self, step: u64) -> B256 {
        let h = self.honest.state_hash(step);
        if step >= self.from {
            keccak_concat([h.as_bytes(), b"fault".as_slice()])
        } else {
            h
        }
    }
}

/// Honest fold trace padded to exactly `steps` steps, for games that are
/// not about any particular L2 block.
pub fn synthetic_trace(steps: u64) -> Result<Trace, OpError> {
    let words = (steps.saturating_sub(4) / 7).max(1);
    let input: Vec<u8> = (0..words * 8).map(|i| (i * 13 % 251) as u8).collect();
    let mut pre = PreimageOracle::new();
    Trace::run(fold_machine(&input, &mut pre)?, steps, pre)
}

/// Plays a game to completion between two responsive participants; the
/// step is proven from `prover`, which must share the agreed prefix.
pub fn play(
    game: &mut DisputeGame,
    defender: &dyn TraceSource,
    challenger: &dyn TraceSource,
    prover: &Trace,
) -> Result<Party, OpError> {
    loop {
        match game.phase {
            GamePhase::Resolved(p) => return Ok(p),
            GamePhase::AwaitDefender => game.bisect(Party::Defender, defender.state_hash(game.midpoint()))?,
            GamePhase::AwaitChallenger { .. } => game.bisect(Party::Challenger, challenger.state_hash(game.midpoint()))?,
            GamePhase::AwaitStep => {
                let (pre, witness) = prover.step_proof(game.lo)?;
                game.step(&pre, &witness, prover.preimages())?;
            }
        }
    }
}
