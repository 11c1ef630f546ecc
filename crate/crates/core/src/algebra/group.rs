//! Homomorphic cyclic group of prime order `q` with a symmetric bilinear
//! pairing, realized as an opaque-exponent oracle.
//!
//! An element `g^x` keeps `x` private. The only ways to learn anything about
//! it are equality, the group law, clear-scalar powers and the pairing, which
//! is exactly the interface a discrete-log group with a pairing offers.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::arith::{add_mod, mul_mod, sub_mod};
use super::{AlgebraError, Field, FieldElement};
use crate::primitives::keccak_concat;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupElement {
    exp: u64,
    order: u64,
}

/// Element of the pairing target group, `e(g, g)^x`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct TargetElement {
    exp: u64,
    order: u64,
}

/// Clear-scalar operations applied to one encrypted value.
#[derive(Clone, Copy, Debug)]
pub enum GroupOp {
    Mul(GroupElement),
    Div(GroupElement),
    PowClear(FieldElement),
}

#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Group {
    order: u64,
    mask_mul: u64,
    mask_add: u64,
}

impl TryFrom<u64> for Group {
    type Error = AlgebraError;
    fn try_from(q: u64) -> Result<Self, AlgebraError> {
        Group::new(q)
    }
}

impl From<Group> for u64 {
    fn from(g: Group) -> u64 {
        g.order
    }
}

impl fmt::Debug for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Group(q={})", self.order)
    }
}

impl Default for Group {
    fn default() -> Self {
        Group::new(super::DEFAULT_PRIME).expect("default prime")
    }
}

impl Group {
    pub fn new(order: u64) -> Result<Self, AlgebraError> {
        let field = Field::new(order)?;
        let seed = keccak_concat([b"rollsim/group-encoding".as_slice(), &order.to_be_bytes()]);
        let mask_mul = field.elem(u64::from_be_bytes(seed.0[..8].try_into().unwrap())).value().max(1);
        let mask_add = field.elem(u64::from_be_bytes(seed.0[8..16].try_into().unwrap())).value();
        Ok(Group { order, mask_mul, mask_add })
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    /// The scalar field `Z/qZ` of exponents.
    pub fn scalar_field(&self) -> Field {
        Field::new(self.order).expect("validated at construction")
    }

    pub fn generator(&self) -> GroupElement {
        GroupElement { exp: 1, order: self.order }
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement { exp: 0, order: self.order }
    }

    /// `g^exponent`, with the exponent reduced modulo `q`.
    pub fn encrypt(&self, exponent: i128) -> GroupElement {
        GroupElement { exp: exponent.rem_euclid(self.order as i128) as u64, order: self.order }
    }

    pub fn encrypt_scalar(&self, exponent: FieldElement) -> GroupElement {
        assert_eq!(exponent.field().modulus(), self.order, "scalar from a different field");
        GroupElement { exp: exponent.value(), order: self.order }
    }

    pub fn combine(&self, h: GroupElement, op: GroupOp) -> GroupElement {
        match op {
            GroupOp::Mul(other) => h.mul(&other),
            GroupOp::Div(other) => h.div(&other),
            GroupOp::PowClear(b) => h.pow_clear(b),
        }
    }

    pub fn target_identity(&self) -> TargetElement {
        TargetElement { exp: 0, order: self.order }
    }

    /// `e(g, g)^exponent`.
    pub fn target_encrypt(&self, exponent: i128) -> TargetElement {
        TargetElement { exp: exponent.rem_euclid(self.order as i128) as u64, order: self.order }
    }

    /// Fixed-width opaque encoding. Decodable only through the same group.
    pub fn encode(&self, h: &GroupElement) -> [u8; 8] {
        assert_eq!(h.order, self.order);
        add_mod(mul_mod(h.exp, self.mask_mul, self.order), self.mask_add, self.order).to_be_bytes()
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<GroupElement, AlgebraError> {
        let raw: [u8; 8] = bytes.try_into().map_err(|_| AlgebraError::InvalidEncoding)?;
        let y = u64::from_be_bytes(raw);
        if y >= self.order {
            return Err(AlgebraError::InvalidEncoding);
        }
        let field = self.scalar_field();
        let inv = field.elem(self.mask_mul).inv()?;
        let exp = mul_mod(sub_mod(y, self.mask_add, self.order), inv.value(), self.order);
        Ok(GroupElement { exp, order: self.order })
    }

    pub fn encode_hex(&self, h: &GroupElement) -> String {
        hex::encode(self.encode(h))
    }

    pub fn decode_hex(&self, s: &str) -> Result<GroupElement, AlgebraError> {
        let bytes = hex::decode(s.strip_prefix("0x").unwrap_or(s)).map_err(|_| AlgebraError::InvalidEncoding)?;
        self.decode(&bytes)
    }
}

impl GroupElement {
    /// `g^a * g^b = g^(a+b)`
    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        assert_eq!(self.order, other.order, "elements of different groups");
        GroupElement { exp: add_mod(self.exp, other.exp, self.order), order: self.order }
    }

    /// `g^a / g^b = g^(a-b)`
    pub fn div(&self, other: &GroupElement) -> GroupElement {
        assert_eq!(self.order, other.order, "elements of different groups");
        GroupElement { exp: sub_mod(self.exp, other.exp, self.order), order: self.order }
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement { exp: sub_mod(0, self.exp, self.order), order: self.order }
    }

    /// `(g^a)^b = g^(ab)` for a clear scalar `b`.
    pub fn pow_clear(&self, b: FieldElement) -> GroupElement {
        assert_eq!(b.field().modulus(), self.order, "scalar from a different field");
        GroupElement { exp: mul_mod(self.exp, b.value(), self.order), order: self.order }
    }

    pub fn pow_clear_int(&self, b: i128) -> GroupElement {
        let b = b.rem_euclid(self.order as i128) as u64;
        GroupElement { exp: mul_mod(self.exp, b, self.order), order: self.order }
    }

    pub fn is_identity(&self) -> bool {
        self.exp == 0
    }
}

/// `e(g^a, g^b) = e(g, g)^(ab)`.
pub fn pairing(a: &GroupElement, b: &GroupElement) -> TargetElement {
    assert_eq!(a.order, b.order, "elements of different groups");
    TargetElement { exp: mul_mod(a.exp, b.exp, a.order), order: a.order }
}

impl TargetElement {
    pub fn mul(&self, other: &TargetElement) -> TargetElement {
        assert_eq!(self.order, other.order);
        TargetElement { exp: add_mod(self.exp, other.exp, self.order), order: self.order }
    }

    pub fn pow_clear(&self, b: FieldElement) -> TargetElement {
        assert_eq!(b.field().modulus(), self.order);
        TargetElement { exp: mul_mod(self.exp, b.value(), self.order), order: self.order }
    }
}

// Debug output shows a short digest rather than the hidden exponent.
fn opaque_tag(exp: u64, order: u64) -> String {
    let h = keccak_concat([exp.to_be_bytes().as_slice(), &order.to_be_bytes()]);
    hex::encode(&h.0[..4])
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement(#{})", opaque_tag(self.exp, self.order))
    }
}

impl fmt::Debug for TargetElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TargetElement(#{})", opaque_tag(self.exp, self.order))
    }
}
