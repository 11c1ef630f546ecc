use rand::RngCore;

use super::{Protocol, ProofError, ProtocolOutcome, Role, Transcript};
use crate::algebra::arith::is_prime;
use crate::algebra::{Field, FieldElement};

/// 128 for ASCII text, 256 once any byte has the high bit set.
pub fn alphabet_size(message: &[u8]) -> u64 {
    if message.iter().any(|b| *b >= 128) {
        256
    } else {
        128
    }
}

/// Smallest prime `p ≥ max(m, n²)`.
pub fn min_fingerprint_prime(n: usize, m: u64) -> u64 {
    let mut p = m.max((n as u64).saturating_mul(n as u64)).max(2);
    while !is_prime(p) {
        p += 1;
    }
    p
}

fn check_field(field: Field, n: usize, m: u64) -> Result<(), ProofError> {
    let needed = m.max((n as u64).saturating_mul(n as u64));
    if field.modulus() < needed {
        return Err(ProofError::FieldTooSmall { p: field.modulus(), needed });
    }
    Ok(())
}

fn eval(message: &[u8], r: FieldElement) -> FieldElement {
    let field = r.field();
    message.iter().rev().fold(field.zero(), |acc, a| acc * r + field.elem(*a as u64))
}

/// `Σ aᵢ·r^(i−1)` over the bytes of `message`.
pub fn fingerprint(message: &[u8], r: FieldElement) -> Result<FieldElement, ProofError> {
    check_field(r.field(), message.len(), alphabet_size(message))?;
    Ok(eval(message, r))
}

/// Alice (holding `a`) sends `(r, h_r(a))`; Bob (holding `b`) answers EQUAL
/// iff it matches `h_r(b)`.
pub fn fingerprint_equal_protocol(
    field: Field,
    a: &[u8],
    b: &[u8],
    rng: &mut dyn RngCore,
) -> Result<ProtocolOutcome, ProofError> {
    let m = alphabet_size(a).max(alphabet_size(b));
    check_field(field, a.len().max(b.len()), m)?;
    Ok(run(field, a, b, rng))
}

fn run(field: Field, a: &[u8], b: &[u8], rng: &mut dyn RngCore) -> ProtocolOutcome {
    let r = field.random(rng);
    let v = eval(a, r);
    let mut transcript = Transcript::new();
    transcript.push(Role::Prover, r.value().to_be_bytes());
    transcript.push(Role::Prover, v.value().to_be_bytes());
    ProtocolOutcome { accepted: eval(b, r) == v, transcript }
}

/// Bob's side fixed; the prover is Alice's file.
pub struct FingerprintProtocol {
    field: Field,
    bob: Vec<u8>,
}

impl FingerprintProtocol {
    pub fn new(field: Field, bob: Vec<u8>) -> Result<Self, ProofError> {
        check_field(field, bob.len(), alphabet_size(&bob))?;
        Ok(FingerprintProtocol { field, bob })
    }
}

impl Protocol for FingerprintProtocol {
    type Prover = Vec<u8>;
    fn run(&self, alice: &Vec<u8>, rng: &mut dyn RngCore) -> ProtocolOutcome {
        run(self.field, alice, &self.bob, rng)
    }
}
