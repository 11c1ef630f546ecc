use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arith::{add_mod, gcd, is_prime, mul_mod, pow_mod, sub_mod};
use super::AlgebraError;

/// Mersenne prime 2^61 - 1, the default protocol field.
pub const DEFAULT_PRIME: u64 = (1 << 61) - 1;

/// A prime field `Z/pZ` with `p < 2^64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Field {
    modulus: u64,
}

impl TryFrom<u64> for Field {
    type Error = AlgebraError;
    fn try_from(p: u64) -> Result<Self, AlgebraError> {
        Field::new(p)
    }
}

impl From<Field> for u64 {
    fn from(f: Field) -> u64 {
        f.modulus
    }
}

impl Default for Field {
    fn default() -> Self {
        Field { modulus: DEFAULT_PRIME }
    }
}

impl Field {
    pub fn new(modulus: u64) -> Result<Self, AlgebraError> {
        if !is_prime(modulus) {
            return Err(AlgebraError::NotPrime(modulus));
        }
        Ok(Field { modulus })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn elem(&self, value: u64) -> FieldElement {
        FieldElement { value: value % self.modulus, modulus: self.modulus }
    }

    pub fn from_i64(&self, value: i64) -> FieldElement {
        self.from_i128(value as i128)
    }

    pub fn from_i128(&self, value: i128) -> FieldElement {
        let m = self.modulus as i128;
        FieldElement { value: value.rem_euclid(m) as u64, modulus: self.modulus }
    }

    pub fn zero(&self) -> FieldElement {
        self.elem(0)
    }

    pub fn one(&self) -> FieldElement {
        self.elem(1)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        self.elem(rng.gen_range(0..self.modulus))
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        self.elem(rng.gen_range(1..self.modulus))
    }

    /// `a / b` as a field element, for rationals printed in worked examples.
    pub fn ratio(&self, num: i64, den: i64) -> Result<FieldElement, AlgebraError> {
        Ok(self.from_i64(num) * self.from_i64(den).inv()?)
    }
}

/// Residue modulo the prime of the field it was created from.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

impl FieldElement {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn field(&self) -> Field {
        Field { modulus: self.modulus }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    pub fn pow(&self, exp: u64) -> FieldElement {
        FieldElement { value: pow_mod(self.value, exp, self.modulus), modulus: self.modulus }
    }

    pub fn inv(&self) -> Result<FieldElement, AlgebraError> {
        if self.value == 0 {
            return Err(AlgebraError::InversionOfZero);
        }
        // Fermat: a^(p-2) = a^-1
        Ok(self.pow(self.modulus - 2))
    }

    pub fn checked_div(&self, rhs: FieldElement) -> Result<FieldElement, AlgebraError> {
        Ok(*self * rhs.inv()?)
    }

    /// Centered representative in `(-p/2, p/2]`.
    pub fn to_signed(&self) -> i128 {
        if self.value > self.modulus / 2 {
            self.value as i128 - self.modulus as i128
        } else {
            self.value as i128
        }
    }

    /// Maps the element back to the simplest rational `n/d` with `d <= max_den`
    /// and `|n| <= max_num`, if one exists.
    pub fn to_small_rational(&self, max_num: u64, max_den: u64) -> Option<SmallRational> {
        let field = self.field();
        (1..=max_den).find_map(|den| {
            let num = (*self * field.elem(den)).to_signed();
            (num.unsigned_abs() <= max_num as u128 && gcd(num.unsigned_abs() as u64, den) == 1)
                .then_some(SmallRational { num: num as i64, den })
        })
    }

    fn check(&self, other: &FieldElement) {
        assert_eq!(self.modulus, other.modulus, "field elements from different fields");
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_small_rational(1 << 20, 64) {
            Some(r) => write!(f, "{r}"),
            None => write!(f, "{}", self.value),
        }
    }
}

impl Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: FieldElement) -> FieldElement {
        self.check(&rhs);
        FieldElement { value: add_mod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: FieldElement) -> FieldElement {
        self.check(&rhs);
        FieldElement { value: sub_mod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: FieldElement) -> FieldElement {
        self.check(&rhs);
        FieldElement { value: mul_mod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        FieldElement { value: sub_mod(0, self.value, self.modulus), modulus: self.modulus }
    }
}

impl AddAssign for FieldElement {
    fn add_assign(&mut self, rhs: FieldElement) {
        *self = *self + rhs;
    }
}

impl SubAssign for FieldElement {
    fn sub_assign(&mut self, rhs: FieldElement) {
        *self = *self - rhs;
    }
}

impl MulAssign for FieldElement {
    fn mul_assign(&mut self, rhs: FieldElement) {
        *self = *self * rhs;
    }
}

/// A small rational used to display field elements against hand-written tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SmallRational {
    pub num: i64,
    pub den: u64,
}

impl fmt::Display for SmallRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inverse_examples() {
        let f13 = Field::new(13).unwrap();
        assert_eq!(f13.one().inv().unwrap(), f13.one());
        // exhaustive oracle over F_13
        let five = f13.elem(5);
        let oracle = (1..13).find(|c| (5 * c) % 13 == 1).unwrap();
        assert_eq!(oracle, 8);
        assert_eq!(five.inv().unwrap().value(), oracle);
        assert_eq!(f13.zero().inv(), Err(AlgebraError::InversionOfZero));
    }

    #[test]
    fn rejects_composite_modulus() {
        assert_eq!(Field::new(15), Err(AlgebraError::NotPrime(15)));
        assert!(Field::new(DEFAULT_PRIME).is_ok());
    }

    #[test]
    fn rational_display_back() {
        let f = Field::default();
        assert_eq!(f.ratio(-5, 2).unwrap().to_string(), "-5/2");
        assert_eq!(f.ratio(1, 2).unwrap().to_string(), "1/2");
        assert_eq!(f.from_i64(-12).to_string(), "-12");
    }

    #[test]
    fn signed_representative() {
        let f = Field::new(131).unwrap();
        assert_eq!(f.from_i64(-1).to_signed(), -1);
        assert_eq!(f.elem(65).to_signed(), 65);
    }

    proptest! {
        #[test]
        fn mul_then_inverse_is_identity(a in 0u64..DEFAULT_PRIME, b in 1u64..DEFAULT_PRIME) {
            let f = Field::default();
            let (a, b) = (f.elem(a), f.elem(b));
            prop_assert_eq!(a * b * b.inv().unwrap(), a);
        }

        #[test]
        fn small_field_inverse_matches_search(a in 1u64..131) {
            let f = Field::new(131).unwrap();
            let expected = (1..131).find(|c| (a * c) % 131 == 1).unwrap();
            prop_assert_eq!(f.elem(a).inv().unwrap().value(), expected);
        }
    }
}
