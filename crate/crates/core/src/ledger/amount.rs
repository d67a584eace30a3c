use std::fmt;
use std::iter::Sum;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Wei per ether.
pub const WEI_PER_ETHER: u128 = 1_000_000_000_000_000_000;

/// A non-negative quantity of the native currency, in wei.
///
/// Arithmetic is checked: overflow and underflow surface as
/// [`AmountError`], never as wrapped values.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Amount(u128);

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum AmountError {
    #[error("amount overflow")]
    Overflow,
    #[error("amount underflow")]
    Underflow,
}

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub const fn wei(value: u128) -> Self {
        Amount(value)
    }

    /// `milli` thousandths of an ether, e.g. `Amount::milli_ether(100)` is 0.1 ETH.
    pub const fn milli_ether(milli: u128) -> Self {
        Amount(milli * (WEI_PER_ETHER / 1000))
    }

    pub const fn ether(whole: u128) -> Self {
        Amount(whole * WEI_PER_ETHER)
    }

    pub const fn as_wei(&self) -> u128 {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: Amount) -> Result<Amount, AmountError> {
        self.0.checked_add(rhs.0).map(Amount).ok_or(AmountError::Overflow)
    }

    pub fn checked_sub(self, rhs: Amount) -> Result<Amount, AmountError> {
        self.0.checked_sub(rhs.0).map(Amount).ok_or(AmountError::Underflow)
    }

    pub fn checked_mul(self, factor: u128) -> Result<Amount, AmountError> {
        self.0.checked_mul(factor).map(Amount).ok_or(AmountError::Overflow)
    }

    pub fn saturating_sub(self, rhs: Amount) -> Amount {
        Amount(self.0.saturating_sub(rhs.0))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} wei", self.0)
    }
}

impl FromStr for Amount {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse::<u128>().map(Amount)
    }
}

impl Sum for Amount {
    /// Panics on overflow; total supply is bounded at genesis.
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, |acc, a| {
            acc.checked_add(a).expect("currency total overflowed u128")
        })
    }
}

// Serialized as a decimal string so clients never truncate to 64 bits.
impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(u64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Number(n) => Ok(Amount(n as u128)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checked_arithmetic_never_wraps() {
        assert_eq!(Amount::wei(1).checked_sub(Amount::wei(2)), Err(AmountError::Underflow));
        assert_eq!(
            Amount::wei(u128::MAX).checked_add(Amount::wei(1)),
            Err(AmountError::Overflow)
        );
        assert_eq!(Amount::wei(7).checked_mul(3), Ok(Amount::wei(21)));
    }

    #[test]
    fn units() {
        assert_eq!(Amount::milli_ether(100).as_wei(), 100_000_000_000_000_000);
        assert_eq!(Amount::ether(1).as_wei(), WEI_PER_ETHER);
    }

    #[test]
    fn serializes_as_decimal_string() {
        let a = Amount::ether(1000);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, "\"1000000000000000000000\"");
        assert_eq!(serde_json::from_str::<Amount>(&json).unwrap(), a);
        assert_eq!(serde_json::from_str::<Amount>("5").unwrap(), Amount::wei(5));
    }
}
