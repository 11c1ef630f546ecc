//! Calldata encoding for the native contracts. A call is a 4-byte selector
//! followed by arguments laid out sequentially: static values take one
//! 32-byte word, byte strings take a length word and then the data
//! right-padded to a word boundary. There is no offset table.

use thiserror::Error;

use crate::primitives::{keccak256, Address, Word, B256};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbiError {
    #[error("calldata truncated at byte {0}")]
    Truncated(usize),
    #[error("word at byte {0} does not fit the expected type")]
    BadValue(usize),
    #[error("{0} trailing bytes after the last argument")]
    Trailing(usize),
}

pub fn selector(name: &str) -> [u8; 4] {
    keccak256(name.as_bytes()).0[..4].try_into().unwrap()
}

#[derive(Debug, Clone, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn call(name: &str) -> Self {
        Self { buf: selector(name).to_vec() }
    }

    pub fn word(mut self, w: Word) -> Self {
        self.buf.extend_from_slice(&w.0);
        self
    }

    pub fn u64(self, n: u64) -> Self {
        self.word(Word::from_u64(n))
    }

    pub fn u128(self, n: u128) -> Self {
        self.word(Word::from_u128(n))
    }

    pub fn bool(self, b: bool) -> Self {
        self.u64(b as u64)
    }

    pub fn address(self, a: Address) -> Self {
        self.word(a.to_word())
    }

    pub fn b256(self, h: B256) -> Self {
        self.word(h.into())
    }

    pub fn bytes(mut self, data: &[u8]) -> Self {
        self = self.u64(data.len() as u64);
        self.buf.extend_from_slice(data);
        let pad = (32 - data.len() % 32) % 32;
        self.buf.resize(self.buf.len() + pad, 0);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    /// Splits off the selector.
    pub fn call(data: &'a [u8]) -> Result<([u8; 4], Self), AbiError> {
        if data.len() < 4 {
            return Err(AbiError::Truncated(data.len()));
        }
        Ok((data[..4].try_into().unwrap(), Self { data, pos: 4 }))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], AbiError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.data.len()).ok_or(AbiError::Truncated(self.pos))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn word(&mut self) -> Result<Word, AbiError> {
        Ok(Word(self.take(32)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, AbiError> {
        let at = self.pos;
        self.word()?.to_u64().ok_or(AbiError::BadValue(at))
    }

    pub fn u128(&mut self) -> Result<u128, AbiError> {
        let at = self.pos;
        self.word()?.to_u128().ok_or(AbiError::BadValue(at))
    }

    pub fn bool(&mut self) -> Result<bool, AbiError> {
        let at = self.pos;
        match self.u64()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(AbiError::BadValue(at)),
        }
    }

    pub fn address(&mut self) -> Result<Address, AbiError> {
        let at = self.pos;
        let w = self.word()?;
        if w.0[..12].iter().any(|b| *b != 0) {
            return Err(AbiError::BadValue(at));
        }
        Ok(Address(w.0[12..].try_into().unwrap()))
    }

    pub fn b256(&mut self) -> Result<B256, AbiError> {
        self.word().map(B256::from)
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, AbiError> {
        let at = self.pos;
        let len = usize::try_from(self.u64()?).map_err(|_| AbiError::BadValue(at))?;
        let out = self.take(len)?.to_vec();
        let pad = (32 - len % 32) % 32;
        if self.take(pad)?.iter().any(|b| *b != 0) {
            return Err(AbiError::BadValue(at));
        }
        Ok(out)
    }

    pub fn finish(self) -> Result<(), AbiError> {
        match self.data.len() - self.pos {
            0 => Ok(()),
            n => Err(AbiError::Trailing(n)),
        }
    }
}
