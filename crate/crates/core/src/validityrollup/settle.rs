//! Validity proofs for batched state transitions.
//!
//! The proven circuit is a fixed Horner commitment to five statement
//! digests. The SNARK attests knowledge of a satisfying witness; the circuit
//! output travels beside the proof and the verifier recomputes it from
//! public data. Machine semantics are checked by the prover before proving
//! (and by full nodes re-executing), not inside the circuit.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::cairo::{run_program, transition_program, CellUpdate, ExecutionTrace, RunConfig};
use super::diff::StateDiff;
use super::l2::StarkState;
use super::messaging::{messages_digest, L2ToL1Message};
use super::ValidityError;
use crate::algebra::{Field, FieldElement, Group};
use crate::primitives::{B256, Word};
use crate::snark::{build_qap, compile_r1cs, flatten, prove, setup, verify, witness, Crs, FlatProgram, ProofEncoding, Qap, SnarkProof, VerificationKey};

/// Horner base of the statement commitment.
pub const COMMITMENT_BASE: u64 = 1_000_003;

const CIRCUIT: &str = "def commit(a, b, c, d, e):
    return (((a * 1000003 + b) * 1000003 + c) * 1000003 + d) * 1000003 + e";

/// What a transition proof is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub old_root: B256,
    pub new_root: B256,
    pub diff_digest: B256,
    pub trace_digest: B256,
    pub messages_digest: B256,
}

impl Statement {
    pub fn inputs(&self, field: Field) -> [FieldElement; 5] {
        [self.old_root, self.new_root, self.diff_digest, self.trace_digest, self.messages_digest]
            .map(|h| field.elem(Word::from(h).reduce_mod(field.modulus())))
    }

    /// Native evaluation of the circuit.
    pub fn commitment(&self, field: Field) -> u64 {
        let base = field.elem(COMMITMENT_BASE);
        self.inputs(field).into_iter().fold(field.zero(), |acc, x| acc * base + x).value()
    }
}

/// Verification key in a storable form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VkRecord {
    pub group_order: u64,
    pub g_zr: String,
    pub g_alpha: String,
}

impl VkRecord {
    pub fn of(vk: &VerificationKey) -> Self {
        Self { group_order: vk.group.order(), g_zr: vk.group.encode_hex(&vk.g_zr), g_alpha: vk.group.encode_hex(&vk.g_alpha) }
    }

    pub fn key(&self) -> Result<VerificationKey, ValidityError> {
        let group = Group::new(self.group_order).map_err(|_| ValidityError::ProofRejected)?;
        let d = |s: &str| group.decode_hex(s).map_err(|_| ValidityError::ProofRejected);
        Ok(VerificationKey { group, g_zr: d(&self.g_zr)?, g_alpha: d(&self.g_alpha)? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityProof {
    pub old_root: B256,
    pub new_root: B256,
    pub trace_digest: B256,
    /// Circuit output, checked against the recomputed commitment.
    pub output: u64,
    pub snark: ProofEncoding,
}

/// Holder of the circuit's proving key.
pub struct TransitionProver {
    field: Field,
    program: FlatProgram,
    output_index: usize,
    qap: Qap,
    crs: Crs,
}

impl TransitionProver {
    pub fn setup(rng: &mut dyn RngCore) -> Result<Self, ValidityError> {
        let group = Group::default();
        let field = group.scalar_field();
        let program = flatten(CIRCUIT)?;
        let r1cs = compile_r1cs(&program, field)?;
        let qap = build_qap(&r1cs)?;
        let crs = setup(&qap, group, rng)?;
        Ok(Self { field, program, output_index: r1cs.output_index(), qap, crs })
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn verifying_key(&self) -> VkRecord {
        VkRecord::of(&self.crs.vk)
    }

    pub fn prove_statement(&self, st: &Statement) -> Result<ValidityProof, ValidityError> {
        let s = witness(&self.program, self.field, &st.inputs(self.field))?;
        let output = s[self.output_index].value();
        let proof = prove(&self.crs, &self.qap, &s)?;
        Ok(ValidityProof {
            old_root: st.old_root,
            new_root: st.new_root,
            trace_digest: st.trace_digest,
            output,
            snark: proof.encode(&self.crs.group),
        })
    }

    /// Proves `pre → pre + diff`. Refuses traces the machine rejects and
    /// traces whose exposed values disagree with the diff.
    pub fn prove_transition(
        &self,
        pre: &StarkState,
        diff: &StateDiff,
        trace: &ExecutionTrace,
        sent: &[L2ToL1Message],
        consumed: &[B256],
    ) -> Result<ValidityProof, ValidityError> {
        if !trace.accepted() {
            return Err(ValidityError::TraceRejected("machine rejects the trace".into()));
        }
        check_trace_matches(self.field, pre, diff, trace)?;
        let st = Statement {
            old_root: pre.root(),
            new_root: pre.applied(diff).root(),
            diff_digest: diff.digest(),
            trace_digest: trace.digest(),
            messages_digest: messages_digest(sent, consumed),
        };
        self.prove_statement(&st)
    }
}

/// Verifier side: public data must reproduce the circuit output, and the
/// proof must verify under `vk`.
pub fn verify_transition(vk: &VkRecord, proof: &ValidityProof, st: &Statement) -> Result<(), ValidityError> {
    if proof.old_root != st.old_root || proof.new_root != st.new_root || proof.trace_digest != st.trace_digest {
        return Err(ValidityError::StateMismatch);
    }
    let key = vk.key()?;
    if proof.output != st.commitment(key.group.scalar_field()) {
        return Err(ValidityError::StateMismatch);
    }
    let snark = SnarkProof::decode(&key.group, &proof.snark).map_err(|_| ValidityError::ProofRejected)?;
    if !verify(&key, &snark) {
        return Err(ValidityError::ProofRejected);
    }
    Ok(())
}

pub fn transition_updates(field: Field, pre: &StarkState, diff: &StateDiff) -> Vec<CellUpdate> {
    diff.cells()
        .map(|(c, k, v)| CellUpdate {
            old: field.elem(pre.read(&c, &k).reduce_mod(field.modulus())),
            new: field.elem(v.reduce_mod(field.modulus())),
        })
        .collect()
}

/// Runs the transition-checking program for `pre → pre + diff`.
pub fn trace_transition(field: Field, pre: &StarkState, diff: &StateDiff) -> Result<ExecutionTrace, ValidityError> {
    let program = transition_program(field, &transition_updates(field, pre, diff));
    Ok(run_program(&program, field, &RunConfig::default())?.trace)
}

fn check_trace_matches(field: Field, pre: &StarkState, diff: &StateDiff, trace: &ExecutionTrace) -> Result<(), ValidityError> {
    let updates = transition_updates(field, pre, diff);
    let mismatch = || ValidityError::TraceRejected("trace does not match the diff".into());
    if trace.steps != 3 * updates.len() as u64 {
        return Err(mismatch());
    }
    let ap = trace.states[0].ap;
    for (i, u) in updates.iter().enumerate() {
        let i = i as u64;
        let old = trace.memory.get(ap + field.elem(3 * i));
        let new = trace.memory.get(ap + field.elem(3 * i + 1));
        if old != Some(u.old) || new != Some(u.new) {
            return Err(mismatch());
        }
    }
    Ok(())
}
