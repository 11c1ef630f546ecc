use serde::{Deserialize, Serialize};

use super::rlp::Rlp;
use super::OpError;
use crate::l1sim::abi::{Decoder, Encoder};
use crate::l1sim::{Event, L1Attributes};
use crate::primitives::{hex_bytes, keccak256, keccak_concat, Address, Word, B256};

pub const DEPOSIT_TX_TYPE: u8 = 0x7e;
pub const DEPOSIT_VERSION: u64 = 0;
pub const MAX_GUARANTEED_GAS_PER_BLOCK: u64 = 8_000_000;
pub const DEPOSIT_EVENT: &str = "TransactionDeposited";

pub const ALIAS_OFFSET: Address = Address([
    0x11, 0x11, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x11, 0x11,
]);

fn add160(a: &Address, b: &Address, negate_b: bool) -> Address {
    let mut out = [0u8; 20];
    let mut carry = 0i16;
    for i in (0..20).rev() {
        let rhs = if negate_b { -(b.0[i] as i16) } else { b.0[i] as i16 };
        let v = a.0[i] as i16 + rhs + carry;
        out[i] = v.rem_euclid(256) as u8;
        carry = v.div_euclid(256);
    }
    Address(out)
}

/// `a + 0x1111…1111 mod 2¹⁶⁰`, applied to contract callers of the Portal.
pub fn alias_address(a: &Address) -> Address {
    add160(a, &ALIAS_OFFSET, false)
}

pub fn unalias_address(a: &Address) -> Address {
    add160(a, &ALIAS_OFFSET, true)
}

/// Identifies the `log_index`-th event of an L1 block.
pub fn source_hash(l1_block_hash: &B256, log_index: u64) -> B256 {
    keccak_concat([
        B256::ZERO.as_bytes(),
        keccak256(l1_block_hash).as_bytes(),
        &Word::from_u64(log_index).0,
    ])
}

/// Source hash of the attributes deposit, in a separate domain from user
/// deposits so the two can never collide.
pub fn attributes_source_hash(l1_block_hash: &B256, sequence_number: u64) -> B256 {
    let inner = keccak_concat([l1_block_hash.as_bytes(), &Word::from_u64(sequence_number).0]);
    keccak_concat([&Word::from_u64(1).0[..], inner.as_bytes()])
}

/// L1 gas burned to pay for `gas_limit` of L2 gas: `g·b_L2 / b_L1`, less gas
/// already spent by the deposit call itself, never below zero.
pub fn deposit_burn(gas_limit: u64, l2_basefee: u128, l1_basefee: u128, call_gas: u64) -> u64 {
    if l1_basefee == 0 {
        return 0;
    }
    let cost = gas_limit as u128 * l2_basefee / l1_basefee;
    u64::try_from(cost).unwrap_or(u64::MAX).saturating_sub(call_gas)
}

/// Arguments of `depositTransaction`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositRequest {
    pub to: Address,
    pub value: u128,
    pub gas_limit: u64,
    pub is_creation: bool,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
}

impl DepositRequest {
    pub fn transfer(to: Address, value: u128) -> Self {
        Self { to, value, gas_limit: 100_000, is_creation: false, data: Vec::new() }
    }

    pub fn calldata(&self) -> Vec<u8> {
        Encoder::call("depositTransaction")
            .address(self.to)
            .u128(self.value)
            .u64(self.gas_limit)
            .bool(self.is_creation)
            .bytes(&self.data)
            .finish()
    }

    pub(crate) fn decode(d: &mut Decoder<'_>) -> Result<Self, OpError> {
        let req =
            Self { to: d.address()?, value: d.u128()?, gas_limit: d.u64()?, is_creation: d.bool()?, data: d.bytes()? };
        Ok(req)
    }

    /// Packed `mint ‖ value ‖ gas_limit ‖ is_creation ‖ data`.
    pub(crate) fn opaque(&self, mint: u128) -> Vec<u8> {
        let mut out = Word::from_u128(mint).0.to_vec();
        out.extend_from_slice(&Word::from_u128(self.value).0);
        out.extend_from_slice(&self.gas_limit.to_be_bytes());
        out.push(self.is_creation as u8);
        out.extend_from_slice(&self.data);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DepositedTx {
    pub source_hash: B256,
    pub from: Address,
    /// `None` for contract creation.
    pub to: Option<Address>,
    pub mint: u128,
    pub value: u128,
    pub gas_limit: u64,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
}

impl DepositedTx {
    /// Rebuilds the deposit from its Portal event.
    pub fn from_event(event: &Event, l1_block_hash: &B256) -> Result<Self, OpError> {
        let mut d = Decoder::new(&event.data);
        let from = d.address()?;
        let to = d.address()?;
        let _version = d.u64()?;
        let opaque = d.bytes()?;
        d.finish()?;
        if opaque.len() < 73 {
            return Err(OpError::MalformedTx("opaque deposit data too short".into()));
        }
        let word = |b: &[u8]| Word(b.try_into().unwrap());
        let mint = word(&opaque[..32]).to_u128().ok_or_else(|| OpError::MalformedTx("mint overflow".into()))?;
        let value = word(&opaque[32..64]).to_u128().ok_or_else(|| OpError::MalformedTx("value overflow".into()))?;
        let gas_limit = u64::from_be_bytes(opaque[64..72].try_into().unwrap());
        let is_creation = opaque[72] != 0;
        Ok(Self {
            source_hash: source_hash(l1_block_hash, event.log_index),
            from,
            to: if is_creation { None } else { Some(to) },
            mint,
            value,
            gas_limit,
            data: opaque[73..].to_vec(),
        })
    }

    pub fn l1_attributes(attrs: &L1Attributes) -> Self {
        Self {
            source_hash: attributes_source_hash(&attrs.hash, attrs.sequence_number),
            from: super::l2::L1_ATTRIBUTES_DEPOSITOR,
            to: Some(super::l2::L1_BLOCK_PREDEPLOY),
            mint: 0,
            value: 0,
            gas_limit: 1_000_000,
            data: Encoder::new()
                .u64(attrs.number)
                .u64(attrs.timestamp)
                .u128(attrs.basefee)
                .b256(attrs.hash)
                .u64(attrs.sequence_number)
                .finish(),
        }
    }

    pub(crate) fn decode_attributes(data: &[u8]) -> Result<L1Attributes, OpError> {
        let mut d = Decoder::new(data);
        let attrs = L1Attributes {
            number: d.u64()?,
            timestamp: d.u64()?,
            basefee: d.u128()?,
            hash: d.b256()?,
            sequence_number: d.u64()?,
        };
        d.finish()?;
        Ok(attrs)
    }

    /// Typed envelope: `0x7E ‖ rlp([source_hash, from, to, mint, value, data, gas_limit])`.
    pub fn encode(&self) -> Vec<u8> {
        let fields = vec![
            Rlp::bytes(self.source_hash.0.to_vec()),
            Rlp::bytes(self.from.0.to_vec()),
            Rlp::bytes(self.to.map(|a| a.0.to_vec()).unwrap_or_default()),
            Rlp::uint(self.mint),
            Rlp::uint(self.value),
            Rlp::bytes(self.data.clone()),
            Rlp::uint(self.gas_limit as u128),
        ];
        let mut out = vec![DEPOSIT_TX_TYPE];
        out.extend(Rlp::List(fields).encode());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, OpError> {
        match bytes.split_first() {
            Some((&DEPOSIT_TX_TYPE, body)) => {
                let item = Rlp::decode(body)?;
                let f = item.as_fields(7)?;
                let to = match f[2].as_bytes()? {
                    [] => None,
                    _ => Some(f[2].as_address()?),
                };
                Ok(Self {
                    source_hash: f[0].as_b256()?,
                    from: f[1].as_address()?,
                    to,
                    mint: f[3].as_uint()?,
                    value: f[4].as_uint()?,
                    data: f[5].as_bytes()?.to_vec(),
                    gas_limit: f[6].as_u64()?,
                })
            }
            _ => Err(OpError::MalformedTx("missing deposit type byte".into())),
        }
    }

    pub fn hash(&self) -> B256 {
        keccak256(self.encode())
    }
}
