//! Interactive harness with the evaluation point sent in the clear. The
//! verifier checks `P(r) = H(r)·Z(r)` on plaintext values.
//!
//! Kept to show why the CRS construction is needed: a prover who learns `r`
//! can satisfy the check without any witness.

use rand::RngCore;

use super::qap::{assemble_unchecked, Qap};
use crate::algebra::FieldElement;
use crate::proofs::{ProtocolOutcome, Role, Transcript};

#[derive(Clone, Debug)]
pub enum NaiveProver {
    Witness(Vec<FieldElement>),
    /// Picks a random `h` and answers `p = h·Z(r)`.
    Fabricate,
}

pub fn naive_round(qap: &Qap, prover: &NaiveProver, rng: &mut dyn RngCore) -> ProtocolOutcome {
    let field = qap.z.field();
    let r = field.random(rng);
    let zr = qap.z.eval(r);
    let (p, h) = match prover {
        NaiveProver::Witness(s) => match assemble_unchecked(qap, s) {
            Ok((p, h, _)) => (p.eval(r), h.eval(r)),
            Err(_) => (field.one(), field.zero()),
        },
        NaiveProver::Fabricate => {
            let h = field.random(rng);
            (h * zr, h)
        }
    };
    let mut transcript = Transcript::new();
    transcript.push(Role::Verifier, r.value().to_be_bytes());
    transcript.push(Role::Prover, p.value().to_be_bytes());
    transcript.push(Role::Prover, h.value().to_be_bytes());
    ProtocolOutcome { accepted: p == h * zr, transcript }
}
