use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::Amount;
use crate::pricefeed::Pair;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("lot size must be positive")]
    ZeroLot,
    #[error("margin must be positive")]
    ZeroMargin,
    #[error("expiry must be at least one block")]
    ZeroExpiry,
    #[error("entry deposit {deposit} does not equal margin {margin} points at {lot} wei per point")]
    DepositMismatch { deposit: Amount, margin: u64, lot: Amount },
    #[error("margin times lot size overflows")]
    Overflow,
}

/// Economic parameters of a market. The entry deposit must be exactly the
/// margin converted to wei.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarketConfig {
    pub pair: Pair,
    /// Collar half-width in price points (hundredths).
    pub margin_points: u64,
    /// Wei per price point.
    pub lot_size: Amount,
    pub expiry_blocks: u64,
    pub entry_deposit: Amount,
    /// Settle before paying out when false; after paying out when true.
    pub vulnerable: bool,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            pair: Pair::BtcEth,
            margin_points: 100,
            lot_size: Amount::wei(1_000_000_000_000_000),
            expiry_blocks: 5,
            entry_deposit: Amount::milli_ether(100),
            vulnerable: false,
        }
    }
}

impl MarketConfig {
    /// `x` price points in wei.
    pub fn apply_lot(&self, points: u64) -> Result<Amount, ConfigError> {
        self.lot_size
            .checked_mul(points as u128)
            .map_err(|_| ConfigError::Overflow)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lot_size.is_zero() {
            return Err(ConfigError::ZeroLot);
        }
        if self.margin_points == 0 {
            return Err(ConfigError::ZeroMargin);
        }
        if self.expiry_blocks == 0 {
            return Err(ConfigError::ZeroExpiry);
        }
        if self.apply_lot(self.margin_points)? != self.entry_deposit {
            return Err(ConfigError::DepositMismatch {
                deposit: self.entry_deposit,
                margin: self.margin_points,
                lot: self.lot_size,
            });
        }
        Ok(())
    }

    pub fn vulnerable(mut self, on: bool) -> Self {
        self.vulnerable = on;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_deposit_is_the_margin_in_wei() {
        let cfg = MarketConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.entry_deposit, Amount::milli_ether(100));
    }

    #[test]
    fn mismatched_deposit_is_rejected() {
        let cfg = MarketConfig {
            entry_deposit: Amount::milli_ether(90),
            ..MarketConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(ConfigError::DepositMismatch { .. })));
        let cfg = MarketConfig {
            lot_size: Amount::ZERO,
            ..MarketConfig::default()
        };
        assert_eq!(cfg.validate(), Err(ConfigError::ZeroLot));
    }
}
