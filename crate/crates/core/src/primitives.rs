//! Byte-level primitives shared by every module: Keccak-256, 20-byte
//! addresses, 32-byte hashes and 256-bit words.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Digest, Keccak256};
use thiserror::Error;

pub fn keccak256(data: impl AsRef<[u8]>) -> B256 {
    B256(Keccak256::digest(data.as_ref()).into())
}

/// Keccak-256 over the concatenation of `parts`.
pub fn keccak_concat<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> B256 {
    let mut h = Keccak256::new();
    for p in parts {
        h.update(p);
    }
    B256(h.finalize().into())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("invalid hex: {0}")]
    Hex(String),
    #[error("expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid decimal word: {0}")]
    Decimal(String),
    #[error("value does not fit in 256 bits")]
    Overflow,
}

fn decode_hex_fixed<const N: usize>(s: &str) -> Result<[u8; N], ParseError> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    let bytes = hex::decode(s).map_err(|e| ParseError::Hex(e.to_string()))?;
    bytes.try_into().map_err(|b: Vec<u8>| ParseError::Length { expected: N, got: b.len() })
}

macro_rules! fixed_bytes {
    ($name:ident, $len:expr) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const ZERO: Self = Self([0u8; $len]);
            pub const LEN: usize = $len;

            pub fn as_bytes(&self) -> &[u8] {
                &self.0
            }

            pub fn is_zero(&self) -> bool {
                self.0.iter().all(|b| *b == 0)
            }

            pub fn to_hex(&self) -> String {
                format!("0x{}", hex::encode(self.0))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.to_hex())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = ParseError;
            fn from_str(s: &str) -> Result<Self, ParseError> {
                decode_hex_fixed::<$len>(s).map(Self)
            }
        }

        impl AsRef<[u8]> for $name {
            fn as_ref(&self) -> &[u8] {
                &self.0
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes!(Address, 20);
fixed_bytes!(B256, 32);

impl Address {
    /// Address whose low eight bytes hold `n` (big-endian); handy for fixtures.
    pub fn from_low_u64(n: u64) -> Self {
        let mut a = [0u8; 20];
        a[12..].copy_from_slice(&n.to_be_bytes());
        Self(a)
    }

    /// Deterministic address derived from a label.
    pub fn from_label(label: &str) -> Self {
        let h = keccak256(label.as_bytes());
        let mut a = [0u8; 20];
        a.copy_from_slice(&h.0[12..]);
        Self(a)
    }

    /// Left-pads the address to a 32-byte word.
    pub fn to_word(&self) -> Word {
        let mut w = [0u8; 32];
        w[12..].copy_from_slice(&self.0);
        Word(w)
    }
}

impl B256 {
    pub fn from_u64(n: u64) -> Self {
        Word::from_u64(n).into()
    }
}

/// Unsigned 256-bit integer stored big-endian.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(pub [u8; 32]);

impl Word {
    pub const ZERO: Word = Word([0u8; 32]);

    pub fn from_u64(n: u64) -> Self {
        Self::from_u128(n as u128)
    }

    pub fn from_u128(n: u128) -> Self {
        let mut w = [0u8; 32];
        w[16..].copy_from_slice(&n.to_be_bytes());
        Word(w)
    }

    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }

    pub fn from_biguint(n: &BigUint) -> Result<Self, ParseError> {
        let bytes = n.to_bytes_be();
        if bytes.len() > 32 {
            return Err(ParseError::Overflow);
        }
        let mut w = [0u8; 32];
        w[32 - bytes.len()..].copy_from_slice(&bytes);
        Ok(Word(w))
    }

    /// Low 128 bits, or `None` if the high half is non-zero.
    pub fn to_u128(&self) -> Option<u128> {
        if self.0[..16].iter().any(|b| *b != 0) {
            return None;
        }
        Some(u128::from_be_bytes(self.0[16..].try_into().unwrap()))
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.to_u128().and_then(|v| u64::try_from(v).ok())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|b| *b == 0)
    }

    pub fn checked_add(&self, other: &Word) -> Option<Word> {
        Word::from_biguint(&(self.to_biguint() + other.to_biguint())).ok()
    }

    pub fn checked_sub(&self, other: &Word) -> Option<Word> {
        let (a, b) = (self.to_biguint(), other.to_biguint());
        if b > a {
            return None;
        }
        Word::from_biguint(&(a - b)).ok()
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Reduces the word modulo `p`.
    pub fn reduce_mod(&self, p: u64) -> u64 {
        let p = p as u128;
        self.0.iter().fold(0u128, |acc, b| ((acc << 8) | *b as u128) % p) as u64
    }
}

impl From<B256> for Word {
    fn from(h: B256) -> Self {
        Word(h.0)
    }
}

impl From<Word> for B256 {
    fn from(w: Word) -> Self {
        B256(w.0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_biguint())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({})", self.to_biguint())
    }
}

impl FromStr for Word {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, ParseError> {
        let s = s.trim();
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ParseError::Decimal(s.to_owned()));
        }
        let n = BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| ParseError::Decimal(s.to_owned()))?;
        Word::from_biguint(&n)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde helper for `Vec<u8>` fields rendered as 0x-prefixed hex.
pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{}", hex::encode(bytes)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s.strip_prefix("0x").unwrap_or(&s)).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keccak_of_empty_input() {
        assert_eq!(
            keccak256([]).to_hex(),
            "0xc5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
        );
    }

    #[test]
    fn word_decimal_round_trip() {
        let s = "78012987367078498244736967587441276376014206154405857948822581408104104410721";
        let w: Word = s.parse().unwrap();
        assert_eq!(w.to_string(), s);
        assert!("1157920892373161954235709850086879078532699846656405640394575840079131296399360"
            .parse::<Word>()
            .is_err());
        assert!("12a".parse::<Word>().is_err());
    }

    #[test]
    fn word_arithmetic() {
        let a = Word::from_u64(40);
        let b = Word::from_u64(60);
        assert_eq!(a.checked_add(&b), Some(Word::from_u64(100)));
        assert_eq!(a.checked_sub(&b), None);
        assert_eq!(Word([0xff; 32]).checked_add(&Word::from_u64(1)), None);
        assert_eq!(Word::from_u64(1000).reduce_mod(13), 1000 % 13);
    }

    #[test]
    fn address_hex_round_trip() {
        let a = Address::from_low_u64(0xdead);
        let parsed: Address = a.to_hex().parse().unwrap();
        assert_eq!(a, parsed);
        assert!("0x1234".parse::<Address>().is_err());
    }
}
