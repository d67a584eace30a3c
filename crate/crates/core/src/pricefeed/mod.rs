//! Price feeds: per-second tick storage, the per-block on-chain price
//! history and its publisher, and a callback-style oracle.

mod history;
mod oracle;
mod price;
mod publisher;
mod ticks;

pub use history::{Feed, PriceHistory, PriceHistoryView, PriceLookupError, UINT40_MAX};
pub use oracle::{CallbackOracle, CallbackRequest, FaultPlan, OracleConnector, DEFAULT_CALLBACK_GAS};
pub use price::{Pair, ParsePriceError, PricePoint, Prices};
pub use publisher::{PricePublisher, PublisherStatus};
pub use ticks::{
    flat_ticks, monotone_ticks, parse_csv, step_ticks, write_csv, GapPolicy, RandomWalk, Tick, TickError, TickStore,
};
