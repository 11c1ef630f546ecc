use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{fiat_shamir_challenge, Protocol, ProofError, ProtocolOutcome, Role, Transcript};
use crate::algebra::arith::{is_prime, mul_mod, pow_mod, sub_mod};
use crate::algebra::Field;

const SHAPE: [Role; 3] = [Role::Prover, Role::Verifier, Role::Prover];
const FS_TAG: &[u8] = b"rollsim/schnorr-fs";

/// Order-`q` subgroup of `(Z/pZ)*` generated by `g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchnorrGroup {
    pub p: u64,
    pub q: u64,
    pub g: u64,
}

impl SchnorrGroup {
    pub fn new(p: u64, q: u64, g: u64) -> Result<Self, ProofError> {
        let bad = |why: &str| Err(ProofError::InvalidGroup(why.to_owned()));
        if !is_prime(p) || !is_prime(q) {
            return bad("p and q must be prime");
        }
        if !(p - 1).is_multiple_of(q) {
            return bad("q must divide p - 1");
        }
        if g <= 1 || g >= p || pow_mod(g, q, p) != 1 {
            return bad("g must have order q");
        }
        Ok(SchnorrGroup { p, q, g })
    }

    /// `p = 23, q = 11, g = 2`, small enough to check by hand.
    pub fn small() -> Self {
        SchnorrGroup::new(23, 11, 2).expect("valid")
    }

    /// Safe prime `p = 2q + 1` just below 2^62, with `g = 4` generating the
    /// quadratic residues.
    pub fn large() -> Self {
        SchnorrGroup::new(4_611_686_018_427_377_339, 2_305_843_009_213_688_669, 4).expect("valid")
    }

    pub fn exp(&self, e: u64) -> u64 {
        pow_mod(self.g, e, self.p)
    }

    fn challenge_field(&self) -> Field {
        Field::new(self.q).expect("q is prime")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchnorrKeyPair {
    pub secret: u64,
    pub public: u64,
}

impl SchnorrKeyPair {
    pub fn from_secret(group: &SchnorrGroup, secret: u64) -> Self {
        SchnorrKeyPair { secret, public: group.exp(secret) }
    }

    pub fn generate(group: &SchnorrGroup, rng: &mut dyn RngCore) -> Self {
        Self::from_secret(group, rng.gen_range(1..group.q))
    }
}

fn transcript(h: u64, c: u64, s: u64) -> Transcript {
    let mut t = Transcript::new();
    for (role, v) in SHAPE.iter().zip([h, c, s]) {
        t.push(*role, v.to_be_bytes());
    }
    t
}

fn parse(group: &SchnorrGroup, t: &Transcript) -> Result<(u64, u64, u64), ProofError> {
    let v = t.expect_shape(&SHAPE)?;
    let (h, c, s) = (v[0], v[1], v[2]);
    if h == 0 || h >= group.p || c >= group.q || s >= group.q {
        return Err(ProofError::MalformedTranscript("value out of range".into()));
    }
    Ok((h, c, s))
}

/// Honest run with explicit nonce `k` and challenge `c`.
pub fn schnorr_round_with(group: &SchnorrGroup, keys: &SchnorrKeyPair, k: u64, c: u64) -> Transcript {
    let (q, c) = (group.q, c % group.q);
    let s = (mul_mod(keys.secret, c, q) + k % q) % q;
    transcript(group.exp(k), c, s)
}

pub fn schnorr_round(group: &SchnorrGroup, keys: &SchnorrKeyPair, rng: &mut dyn RngCore) -> Transcript {
    let k = rng.gen_range(1..group.q);
    let c = rng.gen_range(0..group.q);
    schnorr_round_with(group, keys, k, c)
}

/// Checks `g^s ≡ PK^c · h (mod p)`.
pub fn schnorr_verify(group: &SchnorrGroup, public: u64, t: &Transcript) -> Result<bool, ProofError> {
    let (h, c, s) = parse(group, t)?;
    Ok(group.exp(s) == mul_mod(pow_mod(public, c, group.p), h, group.p))
}

/// Recovers the secret from two accepted transcripts sharing a commitment.
pub fn schnorr_extract(group: &SchnorrGroup, t1: &Transcript, t2: &Transcript) -> Result<u64, ProofError> {
    let (h1, c1, s1) = parse(group, t1)?;
    let (h2, c2, s2) = parse(group, t2)?;
    if h1 != h2 || c1 == c2 {
        return Err(ProofError::CannotExtract);
    }
    let f = group.challenge_field();
    let a = f.elem(sub_mod(s1, s2, group.q)) * f.elem(sub_mod(c1, c2, group.q)).inv()?;
    Ok(a.value())
}

/// Accepting transcript for challenge `c` produced without the secret:
/// pick `z`, set `h = g^z · PK^(−c)`.
pub fn schnorr_simulate(group: &SchnorrGroup, public: u64, c: u64, rng: &mut dyn RngCore) -> Transcript {
    let c = c % group.q;
    let z = rng.gen_range(0..group.q);
    let pk_neg_c = pow_mod(public, sub_mod(0, c, group.q), group.p);
    transcript(mul_mod(group.exp(z), pk_neg_c, group.p), c, z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchnorrProver {
    Honest(SchnorrKeyPair),
    /// Knows only the public key; commits to a simulated transcript for a
    /// guessed challenge.
    Cheating,
}

pub struct SchnorrProtocol {
    pub group: SchnorrGroup,
    pub public: u64,
}

impl Protocol for SchnorrProtocol {
    type Prover = SchnorrProver;
    fn run(&self, prover: &SchnorrProver, rng: &mut dyn RngCore) -> ProtocolOutcome {
        let g = &self.group;
        let (h, respond): (u64, Box<dyn Fn(u64) -> u64>) = match *prover {
            SchnorrProver::Honest(keys) => {
                let k = rng.gen_range(1..g.q);
                let q = g.q;
                (g.exp(k), Box::new(move |c| (mul_mod(keys.secret, c, q) + k) % q))
            }
            SchnorrProver::Cheating => {
                let guess = rng.gen_range(0..g.q);
                let sim = schnorr_simulate(g, self.public, guess, rng);
                let (h, _, z) = parse(g, &sim).expect("simulator output is well formed");
                (h, Box::new(move |_| z))
            }
        };
        let c = rng.gen_range(0..g.q);
        let t = transcript(h, c, respond(c));
        let accepted = schnorr_verify(g, self.public, &t).unwrap_or(false);
        ProtocolOutcome { accepted, transcript: t }
    }
}

/// Non-interactive Schnorr proof bound to `message` via Fiat–Shamir.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchnorrSignature {
    pub h: u64,
    pub s: u64,
}

fn fs_challenge(group: &SchnorrGroup, public: u64, h: u64, message: &[u8]) -> u64 {
    let mut t = Transcript::new();
    t.push(Role::Prover, public.to_be_bytes());
    t.push(Role::Prover, h.to_be_bytes());
    t.push(Role::Prover, message.to_vec());
    fiat_shamir_challenge(group.challenge_field(), &t, FS_TAG).value()
}

pub fn schnorr_fs_prove(
    group: &SchnorrGroup,
    keys: &SchnorrKeyPair,
    message: &[u8],
    rng: &mut dyn RngCore,
) -> SchnorrSignature {
    let k = rng.gen_range(1..group.q);
    let h = group.exp(k);
    let c = fs_challenge(group, keys.public, h, message);
    SchnorrSignature { h, s: (mul_mod(keys.secret, c, group.q) + k) % group.q }
}

pub fn schnorr_fs_verify(group: &SchnorrGroup, public: u64, message: &[u8], sig: &SchnorrSignature) -> bool {
    let c = fs_challenge(group, public, sig.h, message);
    schnorr_verify(group, public, &transcript(sig.h, c, sig.s)).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proofs::estimate_errors;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn hand_checked_small_group() {
        let g = SchnorrGroup::small();
        let keys = SchnorrKeyPair::from_secret(&g, 7);
        assert_eq!(keys.public, 13);
        let t = schnorr_round_with(&g, &keys, 3, 4);
        let v = t.expect_shape(&SHAPE).unwrap();
        assert_eq!(v, vec![8, 4, 9]);
        assert_eq!(pow_mod(2, 9, 23), 6);
        assert_eq!(mul_mod(pow_mod(13, 4, 23), 8, 23), 6);
        assert!(schnorr_verify(&g, 13, &t).unwrap());
        assert!(!schnorr_verify(&g, 13, &transcript(8, 4, 10)).unwrap());
    }

    #[test]
    fn invalid_groups_and_transcripts() {
        assert!(SchnorrGroup::new(23, 11, 5).is_err());
        assert!(SchnorrGroup::new(23, 7, 2).is_err());
        assert!(SchnorrGroup::new(21, 11, 2).is_err());
        let g = SchnorrGroup::small();
        let mut short = Transcript::new();
        short.push(Role::Prover, 8u64.to_be_bytes());
        assert!(matches!(schnorr_verify(&g, 13, &short), Err(ProofError::MalformedTranscript(_))));
        assert!(matches!(schnorr_verify(&g, 13, &transcript(8, 4, 11)), Err(ProofError::MalformedTranscript(_))));
    }

    #[test]
    fn completeness_and_tamper() {
        for g in [SchnorrGroup::small(), SchnorrGroup::large()] {
            let mut rng = ChaCha20Rng::seed_from_u64(21);
            for _ in 0..200 {
                let keys = SchnorrKeyPair::generate(&g, &mut rng);
                let t = schnorr_round(&g, &keys, &mut rng);
                assert!(schnorr_verify(&g, keys.public, &t).unwrap());
                let (h, c, s) = parse(&g, &t).unwrap();
                let bumped = transcript(h, c, (s + 1) % g.q);
                assert!(!schnorr_verify(&g, keys.public, &bumped).unwrap());
            }
        }
    }

    #[test]
    fn extractor_recovers_secret() {
        let g = SchnorrGroup::small();
        let keys = SchnorrKeyPair::from_secret(&g, 7);
        let t1 = schnorr_round_with(&g, &keys, 5, 2);
        let t2 = schnorr_round_with(&g, &keys, 5, 9);
        let a = schnorr_extract(&g, &t1, &t2).unwrap();
        assert_eq!(a, 7);
        assert_eq!(g.exp(a), keys.public);
        assert_eq!(schnorr_extract(&g, &t1, &t1), Err(ProofError::CannotExtract));

        let big = SchnorrGroup::large();
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        for _ in 0..100 {
            let keys = SchnorrKeyPair::generate(&big, &mut rng);
            let k = rng.gen_range(1..big.q);
            let (c1, c2) = (rng.gen_range(0..big.q), rng.gen_range(0..big.q));
            if c1 == c2 {
                continue;
            }
            let a = schnorr_extract(&big, &schnorr_round_with(&big, &keys, k, c1), &schnorr_round_with(&big, &keys, k, c2));
            assert_eq!(a.unwrap(), keys.secret);
        }
    }

    #[test]
    fn simulator_transcripts_verify() {
        let g = SchnorrGroup::large();
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let mut same_h = 0;
        for _ in 0..100 {
            let keys = SchnorrKeyPair::generate(&g, &mut rng);
            let c = rng.gen_range(0..g.q);
            let sim = schnorr_simulate(&g, keys.public, c, &mut rng);
            assert!(schnorr_verify(&g, keys.public, &sim).unwrap());
            let honest = schnorr_round_with(&g, &keys, rng.gen_range(1..g.q), c);
            same_h += usize::from(sim.messages()[0] == honest.messages()[0]);
        }
        assert_eq!(same_h, 0);
    }

    #[test]
    fn error_estimates() {
        let g = SchnorrGroup::small();
        let mut rng = ChaCha20Rng::seed_from_u64(24);
        let keys = SchnorrKeyPair::from_secret(&g, 7);
        let proto = SchnorrProtocol { group: g, public: keys.public };
        let e = estimate_errors(&proto, &SchnorrProver::Honest(keys), &SchnorrProver::Cheating, 20_000, &mut rng).unwrap();
        assert_eq!(e.completeness_error, 0.0);
        assert!((e.soundness_error - 1.0 / 11.0).abs() < 0.01, "{e:?}");
    }

    #[test]
    fn fiat_shamir_signature() {
        let g = SchnorrGroup::large();
        let mut rng = ChaCha20Rng::seed_from_u64(25);
        let keys = SchnorrKeyPair::generate(&g, &mut rng);
        let sig = schnorr_fs_prove(&g, &keys, b"withdrawal #1", &mut rng);
        assert!(schnorr_fs_verify(&g, keys.public, b"withdrawal #1", &sig));
        assert!(!schnorr_fs_verify(&g, keys.public, b"withdrawal #2", &sig));
        let other = SchnorrKeyPair::generate(&g, &mut rng);
        assert!(!schnorr_fs_verify(&g, other.public, b"withdrawal #1", &sig));
    }
}
