//! The collared option market: configuration, the settlement formula, the
//! on-chain contract and an off-chain reader.

mod config;
mod contract;
mod payout;
mod view;

pub use config::{ConfigError, MarketConfig};
pub use contract::{calls, Market, MarketSetup, OptionContract, Side, INSUFFICIENT_POOL, INVALID_MARGIN};
pub use payout::{compute_payout, Payout};
pub use view::MarketView;
