//! Message formats and hashes shared by the L1 core contract and L2.

use serde::{Deserialize, Serialize};

use super::ValidityError;
use crate::primitives::{keccak256, keccak_concat, Address, B256, Word};

/// `2^251 + 17·2^192 + 1`, the field L2 felts live in.
pub const STARK_PRIME: Word = Word([
    0x08, 0, 0, 0, 0, 0, 0, 0x11, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x01,
]);

/// First payload word of a bridge withdrawal.
pub const TRANSFER_FROM_STARKNET: u64 = 0;

/// Keccak-256 of the name with the top six bits cleared, so the result is
/// below `2^250 < STARK_PRIME`.
pub fn selector_from_name(name: &str) -> Result<Word, ValidityError> {
    if name.is_empty() {
        return Err(ValidityError::EmptyName);
    }
    let mut w = Word(keccak256(name.as_bytes()).0);
    w.0[0] &= 0x03;
    Ok(w)
}

pub fn address_word(a: &Address) -> Word {
    let mut w = [0u8; 32];
    w[12..].copy_from_slice(a.as_bytes());
    Word(w)
}

pub fn word_address(w: &Word) -> Option<Address> {
    if w.0[..12].iter().any(|b| *b != 0) {
        return None;
    }
    let mut a = [0u8; 20];
    a.copy_from_slice(&w.0[12..]);
    Some(Address(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    L1ToL2,
    L2ToL1,
}

/// A counted message hash on the L1 core contract. Never negative; consume
/// requires a positive count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct L2Message {
    pub hash: B256,
    pub direction: Direction,
    pub counter: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct L1ToL2Message {
    pub from: Address,
    pub to: Word,
    pub selector: Word,
    pub payload: Vec<Word>,
    pub nonce: u64,
}

impl L1ToL2Message {
    pub fn hash(&self) -> B256 {
        l1_to_l2_hash(&self.from, &self.to, &self.selector, &self.payload, self.nonce)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct L2ToL1Message {
    pub from: Word,
    pub to: Address,
    pub payload: Vec<Word>,
}

impl L2ToL1Message {
    pub fn hash(&self) -> B256 {
        l2_to_l1_hash(&self.from, &self.to, &self.payload)
    }
}

pub fn l1_to_l2_hash(from: &Address, to: &Word, selector: &Word, payload: &[Word], nonce: u64) -> B256 {
    let from = address_word(from);
    let nonce = Word::from_u64(nonce);
    let len = Word::from_u64(payload.len() as u64);
    let head = [from.0, to.0, nonce.0, selector.0, len.0];
    keccak_concat(head.iter().map(|w| w.as_slice()).chain(payload.iter().map(|w| w.0.as_slice())))
}

pub fn l2_to_l1_hash(from: &Word, to: &Address, payload: &[Word]) -> B256 {
    let to = address_word(to);
    let len = Word::from_u64(payload.len() as u64);
    let head = [from.0, to.0, len.0];
    keccak_concat(head.iter().map(|w| w.as_slice()).chain(payload.iter().map(|w| w.0.as_slice())))
}

/// `[TRANSFER_FROM_STARKNET, recipient, amount_low, amount_high]`
pub fn withdraw_payload(recipient: &Address, amount: u128) -> Vec<Word> {
    vec![Word::from_u64(TRANSFER_FROM_STARKNET), address_word(recipient), Word::from_u128(amount), Word::ZERO]
}

/// Digest of the messages a state update settles.
pub fn messages_digest(sent: &[L2ToL1Message], consumed: &[B256]) -> B256 {
    let hashes: Vec<B256> = sent.iter().map(L2ToL1Message::hash).collect();
    let counts = [Word::from_u64(hashes.len() as u64), Word::from_u64(consumed.len() as u64)];
    keccak_concat(
        counts.iter().map(|w| w.0.as_slice()).chain(hashes.iter().map(|h| h.as_bytes())).chain(consumed.iter().map(|h| h.as_bytes())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    #[test]
    fn stark_prime_value() {
        let p = (BigUint::from(1u8) << 251) + (BigUint::from(17u8) << 192) + 1u8;
        assert_eq!(STARK_PRIME.to_biguint(), p);
    }

    #[test]
    fn selectors() {
        let d = selector_from_name("deposit").unwrap();
        assert_eq!(d, selector_from_name("deposit").unwrap());
        assert_ne!(d, selector_from_name("withdraw").unwrap());
        let mut expected = keccak256(b"deposit").0;
        expected[0] &= 0x03;
        assert_eq!(d.0, expected);
        assert_eq!(selector_from_name(""), Err(ValidityError::EmptyName));
        for name in ["deposit", "withdraw", "transfer", "initiate_withdraw", "a", "handle_deposit"] {
            assert!(selector_from_name(name).unwrap().to_biguint() < STARK_PRIME.to_biguint());
        }
    }

    #[test]
    fn address_words() {
        let a = Address::from_label("bridge");
        assert_eq!(word_address(&address_word(&a)), Some(a));
        assert_eq!(word_address(&Word([0xff; 32])), None);
    }

    #[test]
    fn nonce_separates_identical_messages() {
        let m = |nonce| L1ToL2Message { from: Address::from_label("a"), to: Word::from_u64(2), selector: Word::from_u64(3), payload: vec![Word::from_u64(4)], nonce };
        assert_ne!(m(0).hash(), m(1).hash());
    }

    #[test]
    fn withdraw_payload_layout() {
        let r = Address::from_label("bob");
        let p = withdraw_payload(&r, 7);
        assert_eq!(p, vec![Word::ZERO, address_word(&r), Word::from_u64(7), Word::ZERO]);
    }
}
