//! Prime-field arithmetic, polynomials, and a homomorphic group with a
//! pairing oracle. Every proof system in the crate is built on these.

pub mod arith;
mod field;
mod group;
mod poly;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use field::{Field, FieldElement, SmallRational, DEFAULT_PRIME};
pub use group::{pairing, Group, GroupElement, GroupOp, TargetElement};
pub use poly::Polynomial;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("inversion of zero")]
    InversionOfZero,
    #[error("duplicate x-coordinate in interpolation points")]
    DuplicateAbscissa,
    #[error("division by the zero polynomial")]
    DivisionByZeroPolynomial,
    #[error("invalid group element encoding")]
    InvalidEncoding,
}

/// Field and group parameters as they appear in scenario configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraParams {
    #[serde(default = "default_prime")]
    pub prime: u64,
    #[serde(default = "default_prime")]
    pub group_order: u64,
}

fn default_prime() -> u64 {
    DEFAULT_PRIME
}

impl Default for AlgebraParams {
    fn default() -> Self {
        AlgebraParams { prime: DEFAULT_PRIME, group_order: DEFAULT_PRIME }
    }
}

impl AlgebraParams {
    pub fn field(&self) -> Result<Field, AlgebraError> {
        Field::new(self.prime)
    }

    pub fn group(&self) -> Result<Group, AlgebraError> {
        Group::new(self.group_order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_from_json() {
        let p: AlgebraParams = serde_json::from_str(r#"{"prime": 131}"#).unwrap();
        assert_eq!(p.field().unwrap().modulus(), 131);
        assert_eq!(p.group().unwrap().order(), DEFAULT_PRIME);
        let bad: AlgebraParams = serde_json::from_str(r#"{"prime": 10}"#).unwrap();
        assert_eq!(bad.field(), Err(AlgebraError::NotPrime(10)));
    }
}
