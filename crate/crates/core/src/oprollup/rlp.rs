//! Recursive-length-prefix encoding. Decoding is strict: non-canonical
//! lengths and integers with leading zeros are rejected.

use thiserror::Error;

use crate::primitives::{Address, B256};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RlpError {
    #[error("input ends inside an item at byte {0}")]
    Truncated(usize),
    #[error("non-canonical encoding at byte {0}")]
    NonCanonical(usize),
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("expected {0}")]
    Shape(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rlp {
    Bytes(Vec<u8>),
    List(Vec<Rlp>),
}

impl Rlp {
    pub fn bytes(b: impl Into<Vec<u8>>) -> Self {
        Rlp::Bytes(b.into())
    }

    pub fn uint(n: u128) -> Self {
        let be = n.to_be_bytes();
        let first = be.iter().position(|b| *b != 0).unwrap_or(be.len());
        Rlp::Bytes(be[first..].to_vec())
    }

    pub fn as_bytes(&self) -> Result<&[u8], RlpError> {
        match self {
            Rlp::Bytes(b) => Ok(b),
            Rlp::List(_) => Err(RlpError::Shape("byte string")),
        }
    }

    pub fn as_list(&self) -> Result<&[Rlp], RlpError> {
        match self {
            Rlp::List(l) => Ok(l),
            Rlp::Bytes(_) => Err(RlpError::Shape("list")),
        }
    }

    /// List with exactly `n` items.
    pub fn as_fields(&self, n: usize) -> Result<&[Rlp], RlpError> {
        let l = self.as_list()?;
        if l.len() != n {
            return Err(RlpError::Shape("list of the expected arity"));
        }
        Ok(l)
    }

    pub fn as_uint(&self) -> Result<u128, RlpError> {
        let b = self.as_bytes()?;
        if b.len() > 16 {
            return Err(RlpError::Shape("integer of at most 128 bits"));
        }
        if b.first() == Some(&0) {
            return Err(RlpError::NonCanonical(0));
        }
        Ok(b.iter().fold(0u128, |acc, x| (acc << 8) | *x as u128))
    }

    pub fn as_u64(&self) -> Result<u64, RlpError> {
        u64::try_from(self.as_uint()?).map_err(|_| RlpError::Shape("64-bit integer"))
    }

    pub fn as_b256(&self) -> Result<B256, RlpError> {
        let b = self.as_bytes()?;
        Ok(B256(b.try_into().map_err(|_| RlpError::Shape("32-byte string"))?))
    }

    pub fn as_address(&self) -> Result<Address, RlpError> {
        let b = self.as_bytes()?;
        Ok(Address(b.try_into().map_err(|_| RlpError::Shape("20-byte string"))?))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            Rlp::Bytes(b) if b.len() == 1 && b[0] < 0x80 => out.push(b[0]),
            Rlp::Bytes(b) => {
                header(out, 0x80, b.len());
                out.extend_from_slice(b);
            }
            Rlp::List(items) => {
                let mut body = Vec::new();
                for i in items {
                    i.encode_into(&mut body);
                }
                header(out, 0xc0, body.len());
                out.extend_from_slice(&body);
            }
        }
    }

    pub fn decode(data: &[u8]) -> Result<Rlp, RlpError> {
        let (item, used) = decode_at(data, 0)?;
        if used != data.len() {
            return Err(RlpError::Trailing(data.len() - used));
        }
        Ok(item)
    }

    /// Decodes a concatenation of items.
    pub fn decode_stream(data: &[u8]) -> Result<Vec<Rlp>, RlpError> {
        let mut pos = 0;
        let mut out = Vec::new();
        while pos < data.len() {
            let (item, next) = decode_at(data, pos)?;
            out.push(item);
            pos = next;
        }
        Ok(out)
    }
}

fn header(out: &mut Vec<u8>, base: u8, len: usize) {
    if len < 56 {
        out.push(base + len as u8);
    } else {
        let be = (len as u64).to_be_bytes();
        let first = be.iter().position(|b| *b != 0).unwrap();
        out.push(base + 55 + (8 - first) as u8);
        out.extend_from_slice(&be[first..]);
    }
}

/// Returns the item at `pos` and the position just past it.
fn decode_at(data: &[u8], pos: usize) -> Result<(Rlp, usize), RlpError> {
    let prefix = *data.get(pos).ok_or(RlpError::Truncated(pos))?;
    let (is_list, offset, len) = match prefix {
        0x00..=0x7f => return Ok((Rlp::Bytes(vec![prefix]), pos + 1)),
        0x80..=0xb7 => (false, 1, (prefix - 0x80) as usize),
        0xb8..=0xbf => {
            let n = (prefix - 0xb7) as usize;
            (false, 1 + n, long_len(data, pos, n)?)
        }
        0xc0..=0xf7 => (true, 1, (prefix - 0xc0) as usize),
        0xf8..=0xff => {
            let n = (prefix - 0xf7) as usize;
            (true, 1 + n, long_len(data, pos, n)?)
        }
    };
    let start = pos + offset;
    let end = start.checked_add(len).filter(|e| *e <= data.len()).ok_or(RlpError::Truncated(pos))?;
    let body = &data[start..end];
    if is_list {
        let mut items = Vec::new();
        let mut p = 0;
        while p < body.len() {
            let (item, next) = decode_at(body, p)?;
            items.push(item);
            p = next;
        }
        Ok((Rlp::List(items), end))
    } else {
        if len == 1 && body[0] < 0x80 {
            return Err(RlpError::NonCanonical(pos));
        }
        Ok((Rlp::Bytes(body.to_vec()), end))
    }
}

fn long_len(data: &[u8], pos: usize, n: usize) -> Result<usize, RlpError> {
    let bytes = data.get(pos + 1..pos + 1 + n).ok_or(RlpError::Truncated(pos))?;
    if bytes[0] == 0 || n > 8 {
        return Err(RlpError::NonCanonical(pos));
    }
    let len = bytes.iter().fold(0u64, |acc, b| (acc << 8) | *b as u64);
    if len < 56 {
        return Err(RlpError::NonCanonical(pos));
    }
    usize::try_from(len).map_err(|_| RlpError::Truncated(pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_vectors() {
        assert_eq!(Rlp::bytes(b"dog".to_vec()).encode(), [0x83, b'd', b'o', b'g']);
        assert_eq!(
            Rlp::List(vec![Rlp::bytes(b"cat".to_vec()), Rlp::bytes(b"dog".to_vec())]).encode(),
            [0xc8, 0x83, b'c', b'a', b't', 0x83, b'd', b'o', b'g']
        );
        assert_eq!(Rlp::bytes(vec![]).encode(), [0x80]);
        assert_eq!(Rlp::List(vec![]).encode(), [0xc0]);
        assert_eq!(Rlp::uint(0).encode(), [0x80]);
        assert_eq!(Rlp::uint(15).encode(), [0x0f]);
        assert_eq!(Rlp::uint(1024).encode(), [0x82, 0x04, 0x00]);
        let lorem = b"Lorem ipsum dolor sit amet, consectetur adipisicing elit".to_vec();
        let enc = Rlp::bytes(lorem.clone()).encode();
        assert_eq!(&enc[..2], &[0xb8, 0x38]);
        assert_eq!(Rlp::decode(&enc).unwrap(), Rlp::Bytes(lorem));
    }

    #[test]
    fn rejects_non_canonical() {
        assert!(matches!(Rlp::decode(&[0x81, 0x05]), Err(RlpError::NonCanonical(_))));
        assert!(matches!(Rlp::decode(&[0xb8, 0x02, 1, 2]), Err(RlpError::NonCanonical(_))));
        assert!(matches!(Rlp::decode(&[0x82, 0x00, 0x01]).unwrap().as_uint(), Err(RlpError::NonCanonical(_))));
        assert!(matches!(Rlp::decode(&[0x83, 1]), Err(RlpError::Truncated(_))));
        assert!(matches!(Rlp::decode(&[0x01, 0x02]), Err(RlpError::Trailing(1))));
    }

    fn arb_rlp() -> impl Strategy<Value = Rlp> {
        let leaf = proptest::collection::vec(any::<u8>(), 0..80).prop_map(Rlp::Bytes);
        leaf.prop_recursive(3, 64, 8, |inner| proptest::collection::vec(inner, 0..8).prop_map(Rlp::List))
    }

    proptest! {
        #[test]
        fn round_trip(item in arb_rlp()) {
            prop_assert_eq!(Rlp::decode(&item.encode()).unwrap(), item);
        }

        #[test]
        fn uint_round_trip(n in any::<u128>()) {
            prop_assert_eq!(Rlp::decode(&Rlp::uint(n).encode()).unwrap().as_uint().unwrap(), n);
        }

        #[test]
        fn stream_round_trip(items in proptest::collection::vec(arb_rlp(), 0..6)) {
            let bytes: Vec<u8> = items.iter().flat_map(|i| i.encode()).collect();
            prop_assert_eq!(Rlp::decode_stream(&bytes).unwrap(), items);
        }
    }
}
