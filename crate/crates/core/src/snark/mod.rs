//! Toy SNARK: flatten an arithmetic program, compile it to R1CS, lift the
//! constraints to a QAP, and prove knowledge of a satisfying witness with
//! encrypted powers of a secret evaluation point and a pairing check.

mod crs;
mod expr;
mod flat;
pub mod naive;
mod qap;
mod r1cs;

use thiserror::Error;

use crate::algebra::AlgebraError;

pub use crs::{
    forge_without_kea, prove, prove_unchecked, roots_check, setup, verify, verify_shifted, zk_shift, Crs,
    ProofEncoding, SnarkProof, VerificationKey,
};
pub use expr::{flatten, flatten_source, parse_expr, parse_source, BinOp, Expr, SourceProgram};
pub use flat::{FlatOp, FlatProgram, Operand, Statement};
pub use qap::{assemble, build_qap, Qap};
pub use r1cs::{compile_r1cs, witness, Constraint, R1cs};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnarkError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported operation: {0}")]
    UnsupportedOp(String),
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
    #[error("variable assigned more than once: {0}")]
    DuplicateAssignment(String),
    #[error("expected {expected} inputs, got {got}")]
    InputMismatch { expected: usize, got: usize },
    #[error("witness execution failed: {0}")]
    WitnessExecutionError(String),
    #[error("witness has {got} entries, layout has {expected}")]
    WitnessLength { expected: usize, got: usize },
    #[error("witness does not satisfy the constraint system")]
    WitnessUnsatisfied,
    #[error("circuit has no constraints")]
    EmptyCircuit,
    #[error("shift factor must be non-zero")]
    DegenerateShift,
    #[error("field modulus {field} differs from group order {group}")]
    FieldMismatch { field: u64, group: u64 },
    #[error("CRS holds {available} powers, proof needs {needed}")]
    CrsTooSmall { needed: usize, available: usize },
    #[error("invalid proof encoding")]
    InvalidProofEncoding,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[cfg(test)]
pub(crate) mod testgen {
    use rand::Rng;

    use super::{FlatOp, FlatProgram, Operand, Statement};

    /// Random straight-line program over `x, y` with `1..=max_gates` gates.
    pub fn random_program(rng: &mut impl Rng, max_gates: usize) -> FlatProgram {
        let inputs = vec!["x".to_owned(), "y".to_owned()];
        let mut vars = inputs.clone();
        let gates = rng.gen_range(1..=max_gates);
        let mut statements = Vec::new();
        for g in 0..gates {
            let operand = |rng: &mut dyn rand::RngCore| {
                if rng.gen_bool(0.25) {
                    Operand::Const(rng.gen_range(-9..10))
                } else {
                    Operand::Var(vars[rng.gen_range(0..vars.len())].clone())
                }
            };
            let (lhs, rhs) = (operand(rng), operand(rng));
            let op = [FlatOp::Add, FlatOp::Sub, FlatOp::Mul][rng.gen_range(0..3)];
            let target = if g + 1 == gates { "out".to_owned() } else { format!("t{g}") };
            vars.push(target.clone());
            statements.push(Statement { target, lhs, op, rhs });
        }
        FlatProgram { inputs, output: "out".into(), statements }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Group;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn end_to_end_random_programs() {
        let group = Group::default();
        let field = group.scalar_field();
        let mut rng = ChaCha20Rng::seed_from_u64(0xC0FFEE);
        for _ in 0..100 {
            let fp = testgen::random_program(&mut rng, 6);
            let r1cs = compile_r1cs(&fp, field).unwrap();
            let qap = build_qap(&r1cs).unwrap();
            let crs = setup(&qap, group, &mut rng).unwrap();
            let inputs = [field.random(&mut rng), field.random(&mut rng)];
            let s = witness(&fp, field, &inputs).unwrap();
            assert!(verify(&crs.vk, &prove(&crs, &qap, &s).unwrap()));
            let mut bad = s.clone();
            let i = rng.gen_range(1..bad.len());
            bad[i] += field.random_nonzero(&mut rng);
            if !r1cs.is_satisfied(&bad) {
                assert!(!verify(&crs.vk, &prove_unchecked(&crs, &qap, &bad).unwrap()));
            }
        }
    }

    #[test]
    fn remainder_zero_iff_constraints_hold() {
        let field = crate::algebra::Field::default();
        let mut rng = ChaCha20Rng::seed_from_u64(0xBEEF);
        let mut unsat = 0;
        for _ in 0..500 {
            let fp = testgen::random_program(&mut rng, 6);
            let r1cs = compile_r1cs(&fp, field).unwrap();
            let qap = build_qap(&r1cs).unwrap();
            let mut s = witness(&fp, field, &[field.random(&mut rng), field.random(&mut rng)]).unwrap();
            if rng.gen_bool(0.5) {
                let i = rng.gen_range(0..s.len());
                s[i] = field.elem(rng.gen_range(0..5));
            }
            let direct = r1cs.is_satisfied(&s);
            unsat += usize::from(!direct);
            assert_eq!(assemble(&qap, &s).is_ok(), direct);
        }
        assert!(unsat > 100);
    }

    #[test]
    fn proof_size_is_constant() {
        let group = Group::default();
        let field = group.scalar_field();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for src in ["x", "x**3 + 8", "x**40 + 3*x - 7"] {
            let fp = flatten(src).unwrap();
            let qap = build_qap(&compile_r1cs(&fp, field).unwrap()).unwrap();
            let crs = setup(&qap, group, &mut rng).unwrap();
            let s = witness(&fp, field, &[field.elem(5)]).unwrap();
            let enc = prove(&crs, &qap, &s).unwrap().encode(&group);
            let json = serde_json::to_value(&enc).unwrap();
            assert_eq!(json.as_object().unwrap().len(), 4, "three elements and the shift flag");
        }
    }
}
