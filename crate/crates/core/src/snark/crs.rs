use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::qap::{assemble, assemble_unchecked, Qap};
use super::SnarkError;
use crate::algebra::{pairing, FieldElement, Group, GroupElement, Polynomial};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerificationKey {
    pub group: Group,
    /// `g^{Z(r)}`
    pub g_zr: GroupElement,
    /// `g^α`
    pub g_alpha: GroupElement,
}

/// Common reference string. `r` and `α` are not part of it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Crs {
    pub group: Group,
    /// `g^{rⁱ}` for `i ∈ [0, d]`
    pub powers: Vec<GroupElement>,
    /// `g^{α rⁱ}` for `i ∈ [0, d]`
    pub shifts: Vec<GroupElement>,
    pub vk: VerificationKey,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnarkProof {
    /// `g^{P(r)}`
    pub p: GroupElement,
    /// `g^{α P(r)}`
    pub p_prime: GroupElement,
    /// `g^{H(r)}`
    pub h: GroupElement,
    pub shifted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofEncoding {
    pub p: String,
    pub p_prime: String,
    pub h: String,
    #[serde(default)]
    pub shifted: bool,
}

impl SnarkProof {
    pub fn encode(&self, group: &Group) -> ProofEncoding {
        ProofEncoding {
            p: group.encode_hex(&self.p),
            p_prime: group.encode_hex(&self.p_prime),
            h: group.encode_hex(&self.h),
            shifted: self.shifted,
        }
    }

    pub fn decode(group: &Group, enc: &ProofEncoding) -> Result<Self, SnarkError> {
        let d = |s: &str| group.decode_hex(s).map_err(|_| SnarkError::InvalidProofEncoding);
        Ok(SnarkProof { p: d(&enc.p)?, p_prime: d(&enc.p_prime)?, h: d(&enc.h)?, shifted: enc.shifted })
    }
}

fn check_field(qap: &Qap, group: &Group) -> Result<(), SnarkError> {
    let field = qap.z.field();
    if field.modulus() != group.order() {
        return Err(SnarkError::FieldMismatch { field: field.modulus(), group: group.order() });
    }
    Ok(())
}

fn setup_from(qap: &Qap, group: Group, r: FieldElement, alpha: FieldElement) -> Crs {
    let g = group.generator();
    let mut powers = Vec::with_capacity(qap.degree + 1);
    let mut ri = group.scalar_field().one();
    for _ in 0..=qap.degree {
        powers.push(g.pow_clear(ri));
        ri *= r;
    }
    let shifts = powers.iter().map(|p| p.pow_clear(alpha)).collect();
    let vk = VerificationKey { group, g_zr: g.pow_clear(qap.z.eval(r)), g_alpha: g.pow_clear(alpha) };
    Crs { group, powers, shifts, vk }
}

fn sample_toxic(qap: &Qap, group: &Group, rng: &mut dyn RngCore) -> (FieldElement, FieldElement) {
    let field = group.scalar_field();
    let r = loop {
        let r = field.random_nonzero(rng);
        // Z(r) = 0 would make every H acceptable
        if !qap.z.eval(r).is_zero() {
            break r;
        }
    };
    (r, field.random_nonzero(rng))
}

/// Samples `r` and `α`, publishes their encrypted powers, and drops them.
pub fn setup(qap: &Qap, group: Group, rng: &mut dyn RngCore) -> Result<Crs, SnarkError> {
    check_field(qap, &group)?;
    let (r, alpha) = sample_toxic(qap, &group, rng);
    Ok(setup_from(qap, group, r, alpha))
}

/// Test-only: keeps the toxic waste so encrypted arithmetic can be checked
/// against plaintext.
#[cfg(test)]
pub(crate) fn setup_with_trapdoor(
    qap: &Qap,
    group: Group,
    rng: &mut dyn RngCore,
) -> (Crs, FieldElement, FieldElement) {
    let (r, alpha) = sample_toxic(qap, &group, rng);
    (setup_from(qap, group, r, alpha), r, alpha)
}

/// `g^{poly(r)}` from a basis of encrypted powers.
fn encrypted_eval(basis: &[GroupElement], poly: &Polynomial, group: &Group) -> Result<GroupElement, SnarkError> {
    if poly.coeffs().len() > basis.len() {
        return Err(SnarkError::CrsTooSmall { needed: poly.coeffs().len(), available: basis.len() });
    }
    Ok(poly
        .coeffs()
        .iter()
        .zip(basis)
        .fold(group.identity(), |acc, (c, gi)| acc.mul(&gi.pow_clear(*c))))
}

fn prove_polys(crs: &Crs, p: &Polynomial, h: &Polynomial) -> Result<SnarkProof, SnarkError> {
    Ok(SnarkProof {
        p: encrypted_eval(&crs.powers, p, &crs.group)?,
        p_prime: encrypted_eval(&crs.shifts, p, &crs.group)?,
        h: encrypted_eval(&crs.powers, h, &crs.group)?,
        shifted: false,
    })
}

pub fn prove(crs: &Crs, qap: &Qap, s: &[FieldElement]) -> Result<SnarkProof, SnarkError> {
    check_field(qap, &crs.group)?;
    let (p, h) = assemble(qap, s)?;
    prove_polys(crs, &p, &h)
}

/// A cheating prover's best effort for a witness that may not satisfy the
/// constraints: it uses the quotient of `P / Z` and discards the remainder.
pub fn prove_unchecked(crs: &Crs, qap: &Qap, s: &[FieldElement]) -> Result<SnarkProof, SnarkError> {
    check_field(qap, &crs.group)?;
    let (p, h, _) = assemble_unchecked(qap, s)?;
    prove_polys(crs, &p, &h)
}

/// Only the polynomial-roots equation `e(g^p, g) = e(g^{Z(r)}, g^h)`.
pub fn roots_check(vk: &VerificationKey, proof: &SnarkProof) -> bool {
    let g = vk.group.generator();
    pairing(&proof.p, &g) == pairing(&vk.g_zr, &proof.h)
}

/// Roots check plus the α-shift check `e(g^p, g^α) = e(g^{p′}, g)`.
pub fn verify(vk: &VerificationKey, proof: &SnarkProof) -> bool {
    let g = vk.group.generator();
    roots_check(vk, proof) && pairing(&proof.p, &vk.g_alpha) == pairing(&proof.p_prime, &g)
}

/// Raises every proof element to `δ`.
pub fn zk_shift(proof: &SnarkProof, delta: FieldElement) -> Result<SnarkProof, SnarkError> {
    if delta.is_zero() {
        return Err(SnarkError::DegenerateShift);
    }
    Ok(SnarkProof {
        p: proof.p.pow_clear(delta),
        p_prime: proof.p_prime.pow_clear(delta),
        h: proof.h.pow_clear(delta),
        shifted: true,
    })
}

/// `(g^p)^δ = ((g^h)^δ)^{Z(r)}` and `((g^p)^δ)^α = (g^{p′})^δ`, through the
/// pairing.
pub fn verify_shifted(vk: &VerificationKey, proof: &SnarkProof) -> bool {
    proof.shifted && verify(vk, proof)
}

/// Without the knowledge-of-exponent restriction a prover can pick any `s`
/// and send `g^s` with `(g^{Z(r)})^s`. The α-shift cannot be produced.
pub fn forge_without_kea(vk: &VerificationKey, rng: &mut dyn RngCore) -> SnarkProof {
    let field = vk.group.scalar_field();
    let s = field.random_nonzero(rng);
    SnarkProof {
        p: vk.g_zr.pow_clear(s),
        p_prime: vk.group.generator().pow_clear(field.random(rng)),
        h: vk.group.generator().pow_clear(s),
        shifted: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Field;
    use crate::snark::{build_qap, compile_r1cs, witness, FlatProgram};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fixture {
        fp: FlatProgram,
        qap: Qap,
        field: Field,
        group: Group,
    }

    fn fixture() -> Fixture {
        let group = Group::default();
        let field = group.scalar_field();
        let fp = FlatProgram::parse("def f(x):\n n = x*x\n m = n*x\n out = m + 8").unwrap();
        let qap = build_qap(&compile_r1cs(&fp, field).unwrap()).unwrap();
        Fixture { fp, qap, field, group }
    }

    #[test]
    fn crs_shape_and_consistency() {
        let fx = fixture();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let crs = setup(&fx.qap, fx.group, &mut rng).unwrap();
        assert_eq!(crs.powers.len(), 5);
        assert_eq!(crs.shifts.len(), 5);
        assert_eq!(crs.powers[0], fx.group.generator());
        for (pw, sh) in crs.powers.iter().zip(&crs.shifts) {
            assert_eq!(pairing(pw, &crs.vk.g_alpha), pairing(sh, &fx.group.generator()));
        }
    }

    #[test]
    fn encrypted_values_match_trapdoor() {
        let fx = fixture();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (crs, r, alpha) = setup_with_trapdoor(&fx.qap, fx.group, &mut rng);
        let s = witness(&fx.fp, fx.field, &[fx.field.elem(3)]).unwrap();
        let (p, h) = assemble(&fx.qap, &s).unwrap();
        let proof = prove(&crs, &fx.qap, &s).unwrap();
        assert_eq!(proof.p, fx.group.encrypt_scalar(p.eval(r)));
        assert_eq!(proof.p_prime, fx.group.encrypt_scalar(alpha * p.eval(r)));
        assert_eq!(proof.h, fx.group.encrypt_scalar(h.eval(r)));
        assert_eq!(crs.vk.g_zr, fx.group.encrypt_scalar(fx.qap.z.eval(r)));
    }

    #[test]
    fn honest_proofs_verify() {
        let fx = fixture();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let crs = setup(&fx.qap, fx.group, &mut rng).unwrap();
        for x in [3, 0, 1, 12345] {
            let s = witness(&fx.fp, fx.field, &[fx.field.elem(x)]).unwrap();
            let proof = prove(&crs, &fx.qap, &s).unwrap();
            assert!(verify(&crs.vk, &proof), "x = {x}");
        }
    }

    #[test]
    fn mutated_proofs_reject() {
        let fx = fixture();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let crs = setup(&fx.qap, fx.group, &mut rng).unwrap();
        let s = witness(&fx.fp, fx.field, &[fx.field.elem(3)]).unwrap();
        let proof = prove(&crs, &fx.qap, &s).unwrap();

        let random_shift = SnarkProof { p_prime: fx.group.encrypt(987654321), ..proof };
        assert!(roots_check(&crs.vk, &random_shift));
        assert!(!verify(&crs.vk, &random_shift));

        let swapped = SnarkProof { p: proof.h, h: proof.p, ..proof };
        assert!(!verify(&crs.vk, &swapped));

        let wrong_h = SnarkProof { h: proof.h.mul(&fx.group.generator()), ..proof };
        assert!(!verify(&crs.vk, &wrong_h));

        let mut bad = s.clone();
        bad[4] = fx.field.elem(36);
        assert_eq!(prove(&crs, &fx.qap, &bad), Err(SnarkError::WitnessUnsatisfied));
        assert!(!verify(&crs.vk, &prove_unchecked(&crs, &fx.qap, &bad).unwrap()));
    }

    #[test]
    fn kea_forgery() {
        let fx = fixture();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let crs = setup(&fx.qap, fx.group, &mut rng).unwrap();
        let forged = forge_without_kea(&crs.vk, &mut rng);
        assert!(roots_check(&crs.vk, &forged));
        assert!(!verify(&crs.vk, &forged));
        let accepted = (0..100).filter(|_| verify(&crs.vk, &forge_without_kea(&crs.vk, &mut rng))).count();
        assert_eq!(accepted, 0);
    }

    #[test]
    fn delta_shift() {
        let fx = fixture();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let crs = setup(&fx.qap, fx.group, &mut rng).unwrap();
        let s = witness(&fx.fp, fx.field, &[fx.field.elem(3)]).unwrap();
        let proof = prove(&crs, &fx.qap, &s).unwrap();
        let d1 = fx.field.random_nonzero(&mut rng);
        let d2 = d1 + fx.field.one();
        let s1 = zk_shift(&proof, d1).unwrap();
        let s2 = zk_shift(&proof, d2).unwrap();
        assert!(verify_shifted(&crs.vk, &s1));
        assert!(!verify_shifted(&crs.vk, &proof));
        assert_ne!(s1.p, s2.p);
        assert_eq!(zk_shift(&proof, fx.field.zero()), Err(SnarkError::DegenerateShift));

        let invalid = SnarkProof { h: proof.h.mul(&fx.group.generator()), ..proof };
        for _ in 0..20 {
            let d = fx.field.random_nonzero(&mut rng);
            assert!(!verify_shifted(&crs.vk, &zk_shift(&invalid, d).unwrap()));
        }
    }

    #[test]
    fn proof_encoding_round_trip() {
        let fx = fixture();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let crs = setup(&fx.qap, fx.group, &mut rng).unwrap();
        let s = witness(&fx.fp, fx.field, &[fx.field.elem(2)]).unwrap();
        let proof = prove(&crs, &fx.qap, &s).unwrap();
        let enc = proof.encode(&fx.group);
        assert_eq!(enc.p.len(), 16);
        assert_eq!(SnarkProof::decode(&fx.group, &enc).unwrap(), proof);
        let junk = ProofEncoding { p: "zz".into(), ..enc };
        assert_eq!(SnarkProof::decode(&fx.group, &junk), Err(SnarkError::InvalidProofEncoding));
    }

    #[test]
    fn field_must_match_group() {
        let f = Field::new(131).unwrap();
        let fp = FlatProgram::parse("def f(x):\n out = x * x").unwrap();
        let qap = build_qap(&compile_r1cs(&fp, f).unwrap()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        assert!(matches!(setup(&qap, Group::default(), &mut rng), Err(SnarkError::FieldMismatch { .. })));
    }
}
