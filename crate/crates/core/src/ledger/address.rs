use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// A 20-byte account or contract identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address([u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    pub const fn new(bytes: [u8; 20]) -> Self {
        Address(bytes)
    }

    /// Deterministic address for a named identity (test accounts, deployed
    /// contracts). The same name always maps to the same address.
    pub fn from_name(name: &str) -> Self {
        let digest = Sha256::digest(format!("velocity:{name}").as_bytes());
        let mut bytes = [0u8; 20];
        bytes.copy_from_slice(&digest[..20]);
        Address(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid address `{0}`: expected 0x followed by 40 hex digits")]
pub struct ParseAddressError(String);

impl FromStr for Address {
    type Err = ParseAddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("0x")
            .ok_or_else(|| ParseAddressError(s.to_owned()))?;
        let raw = hex::decode(digits).map_err(|_| ParseAddressError(s.to_owned()))?;
        let bytes: [u8; 20] = raw.try_into().map_err(|_| ParseAddressError(s.to_owned()))?;
        Ok(Address(bytes))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_addresses_are_stable_and_distinct() {
        assert_eq!(Address::from_name("alice"), Address::from_name("alice"));
        assert_ne!(Address::from_name("alice"), Address::from_name("bob"));
    }

    #[test]
    fn display_parse_round_trip() {
        let a = Address::from_name("miner");
        let parsed: Address = a.to_string().parse().unwrap();
        assert_eq!(a, parsed);
        assert!("0x1234".parse::<Address>().is_err());
        assert!("deadbeef".parse::<Address>().is_err());
    }
}
