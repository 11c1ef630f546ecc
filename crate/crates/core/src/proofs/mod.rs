//! Probabilistic and interactive proofs: Freivalds, string fingerprinting,
//! the Schnorr sigma protocol, Fiat–Shamir, and a Monte Carlo harness for
//! completeness and soundness errors.

mod fingerprint;
mod freivalds;
mod schnorr;

use num_bigint::BigUint;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, Field, FieldElement};
use crate::primitives::{hex_bytes, keccak256};

pub use fingerprint::{alphabet_size, fingerprint, fingerprint_equal_protocol, min_fingerprint_prime, FingerprintProtocol};
pub use freivalds::{freivalds_round, freivalds_verify, Matrix, DEFAULT_REPETITIONS};
pub use schnorr::{
    schnorr_extract, schnorr_fs_prove, schnorr_fs_verify, schnorr_round, schnorr_round_with, schnorr_simulate,
    schnorr_verify, SchnorrGroup, SchnorrKeyPair, SchnorrProtocol, SchnorrProver, SchnorrSignature,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProofError {
    #[error("matrix shapes do not match")]
    ShapeMismatch,
    #[error("field of size {p} is too small; need at least {needed}")]
    FieldTooSmall { p: u64, needed: u64 },
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error("cannot extract: transcripts do not fork on the challenge")]
    CannotExtract,
    #[error("invalid group parameters: {0}")]
    InvalidGroup(String),
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Prover,
    Verifier,
}

impl Role {
    fn tag(self) -> u8 {
        match self {
            Role::Prover => b'P',
            Role::Verifier => b'V',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    #[serde(with = "hex_bytes")]
    pub hex: Vec<u8>,
}

/// Append-only record of the messages exchanged in one protocol run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    messages: Vec<Message>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, role: Role, bytes: impl Into<Vec<u8>>) {
        self.messages.push(Message { role, hex: bytes.into() });
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// The transcript truncated to its first `n` messages.
    pub fn prefix(&self, n: usize) -> Transcript {
        Transcript { messages: self.messages[..n.min(self.len())].to_vec() }
    }

    /// Unambiguous byte encoding: each message as `role ‖ len_be64 ‖ bytes`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for m in &self.messages {
            out.push(m.role.tag());
            out.extend_from_slice(&(m.hex.len() as u64).to_be_bytes());
            out.extend_from_slice(&m.hex);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    pub(crate) fn expect_shape(&self, roles: &[Role]) -> Result<Vec<u64>, ProofError> {
        if self.len() != roles.len() {
            return Err(ProofError::MalformedTranscript(format!(
                "expected {} messages, got {}",
                roles.len(),
                self.len()
            )));
        }
        self.messages
            .iter()
            .zip(roles)
            .enumerate()
            .map(|(i, (m, role))| {
                if m.role != *role {
                    return Err(ProofError::MalformedTranscript(format!("message {i} has the wrong sender")));
                }
                let raw: [u8; 8] = m.hex.as_slice().try_into().map_err(|_| {
                    ProofError::MalformedTranscript(format!("message {i} is not 8 bytes"))
                })?;
                Ok(u64::from_be_bytes(raw))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    pub accepted: bool,
    pub transcript: Transcript,
}

/// Verifier randomness derived from `H(domain_tag ‖ transcript)`, reduced
/// into `field`.
pub fn fiat_shamir_challenge(field: Field, transcript: &Transcript, domain_tag: &[u8]) -> FieldElement {
    let mut data = domain_tag.to_vec();
    data.extend(transcript.encode());
    let digest = keccak256(&data);
    let reduced = BigUint::from_bytes_be(&digest.0) % field.modulus();
    field.elem(reduced.iter_u64_digits().next().unwrap_or(0))
}

/// A protocol that can be run once against a chosen prover.
pub trait Protocol {
    type Prover;
    fn run(&self, prover: &Self::Prover, rng: &mut dyn RngCore) -> ProtocolOutcome;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub completeness_error: f64,
    pub soundness_error: f64,
    pub trials: usize,
}

/// Monte Carlo estimate of completeness error (honest rejections) and
/// soundness error (cheating acceptances).
pub fn estimate_errors<P: Protocol>(
    protocol: &P,
    honest: &P::Prover,
    cheating: &P::Prover,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<ErrorEstimate, ProofError> {
    if trials == 0 {
        return Err(ProofError::NoTrials);
    }
    let mut rejected = 0usize;
    let mut fooled = 0usize;
    for _ in 0..trials {
        rejected += usize::from(!protocol.run(honest, rng).accepted);
        fooled += usize::from(protocol.run(cheating, rng).accepted);
    }
    Ok(ErrorEstimate {
        completeness_error: rejected as f64 / trials as f64,
        soundness_error: fooled as f64 / trials as f64,
        trials,
    })
}

/// A verifier that accepts every claim; its soundness error is 1.
pub struct AlwaysAccept;

impl Protocol for AlwaysAccept {
    type Prover = bool;
    fn run(&self, claim_is_true: &bool, _rng: &mut dyn RngCore) -> ProtocolOutcome {
        let mut transcript = Transcript::new();
        transcript.push(Role::Prover, vec![u8::from(*claim_is_true)]);
        ProtocolOutcome { accepted: true, transcript }
    }
}
