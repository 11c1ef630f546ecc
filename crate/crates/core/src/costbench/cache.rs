use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CostError;
use crate::primitives::Address;

/// Bytes of a cache key in calldata.
pub const CACHE_KEY_BYTES: usize = 4;

/// Dense address→key table. Keys start at 1; 0 is reserved for "absent".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressCache {
    forward: BTreeMap<Address, u32>,
    reverse: Vec<Address>,
    capacity: u64,
}

impl Default for AddressCache {
    fn default() -> Self {
        Self { forward: BTreeMap::new(), reverse: Vec::new(), capacity: u32::MAX as u64 }
    }
}

impl AddressCache {
    pub fn with_capacity(capacity: u64) -> Result<Self, CostError> {
        if capacity >= 1 << 32 {
            return Err(CostError::CapacityTooLarge);
        }
        Ok(Self { capacity, ..Self::default() })
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    pub fn write(&mut self, value: Address) -> Result<u32, CostError> {
        if self.forward.contains_key(&value) {
            return Err(CostError::AlreadyCached);
        }
        if self.reverse.len() as u64 >= self.capacity {
            return Err(CostError::CacheFull);
        }
        self.reverse.push(value);
        let key = self.reverse.len() as u32;
        self.forward.insert(value, key);
        Ok(key)
    }

    pub fn read(&self, key: u32) -> Result<Address, CostError> {
        key.checked_sub(1).and_then(|i| self.reverse.get(i as usize)).copied().ok_or(CostError::KeyNotFound)
    }

    /// 0 when absent.
    pub fn key_of(&self, value: &Address) -> u32 {
        self.forward.get(value).copied().unwrap_or(0)
    }
}

/// Fraction of argument bytes saved by passing a key instead of the value.
pub fn argument_savings(value_bytes: usize, key_bytes: usize) -> f64 {
    1.0 - key_bytes as f64 / value_bytes as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn keys_start_at_one() {
        let mut c = AddressCache::default();
        let a = Address::from_label("a");
        assert_eq!(c.write(a), Ok(1));
        assert_eq!(c.read(1), Ok(a));
        assert_eq!(c.read(0), Err(CostError::KeyNotFound));
        assert_eq!(c.read(2), Err(CostError::KeyNotFound));
        assert_eq!(c.write(a), Err(CostError::AlreadyCached));
        assert_eq!(c.key_of(&a), 1);
        assert_eq!(c.key_of(&Address::ZERO), 0);
    }

    #[test]
    fn capacity() {
        let mut c = AddressCache::with_capacity(2).unwrap();
        c.write(Address::from_low_u64(1)).unwrap();
        c.write(Address::from_low_u64(2)).unwrap();
        assert_eq!(c.write(Address::from_low_u64(3)), Err(CostError::CacheFull));
        assert_eq!(AddressCache::with_capacity(1 << 32), Err(CostError::CapacityTooLarge));
    }

    #[test]
    fn eighty_percent() {
        assert!((argument_savings(20, CACHE_KEY_BYTES) - 0.8).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_dense(n in 1u64..2000) {
            let mut c = AddressCache::default();
            for i in 0..n {
                prop_assert_eq!(c.write(Address::from_low_u64(i)).unwrap() as u64, i + 1);
            }
            for k in 1..=n as u32 {
                prop_assert_eq!(c.read(k).unwrap(), Address::from_low_u64(k as u64 - 1));
            }
        }
    }
}
