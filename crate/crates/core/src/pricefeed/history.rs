//! On-chain, block-indexed price history written by a single owner.

use serde::{Deserialize, Serialize};

use super::{Pair, PricePoint, Prices};
use crate::ledger::{Address, CallData, Contract, Env, Fields, Ledger, Value, VmError};

/// Declared width of the timestamp and block-number parameters.
pub const UINT40_MAX: u64 = (1 << 40) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feed {
    pub usdbtc: PricePoint,
    pub btceth: PricePoint,
    pub btcetc: PricePoint,
    pub btcdoge: PricePoint,
    pub timestamp: u64,
    pub block_number: u64,
}

impl Feed {
    pub fn new(block_number: u64, timestamp: u64, prices: Prices) -> Self {
        Feed {
            usdbtc: prices.usdbtc,
            btceth: prices.btceth,
            btcetc: prices.btcetc,
            btcdoge: prices.btcdoge,
            timestamp,
            block_number,
        }
    }

    pub fn prices(&self) -> Prices {
        Prices {
            usdbtc: self.usdbtc,
            btceth: self.btceth,
            btcetc: self.btcetc,
            btcdoge: self.btcdoge,
        }
    }

    pub fn price(&self, pair: Pair) -> PricePoint {
        self.prices().get(pair)
    }

    /// Encoding used as the return value of `getPrice`.
    pub fn to_value(&self) -> Value {
        Value::List(vec![
            Value::Uint(self.timestamp),
            Value::Uint(self.block_number),
            Value::Uint(self.usdbtc.points()),
            Value::Uint(self.btceth.points()),
            Value::Uint(self.btcetc.points()),
            Value::Uint(self.btcdoge.points()),
        ])
    }

    /// `None` for the empty return that signals a lookup miss.
    pub fn from_value(value: &Value) -> Option<Feed> {
        let items = value.as_list()?;
        let n = |i: usize| items.get(i).and_then(Value::as_uint);
        let p = |i: usize| n(i).map(PricePoint::from_points);
        Some(Feed {
            timestamp: n(0)?,
            block_number: n(1)?,
            usdbtc: p(2)?,
            btceth: p(3)?,
            btcetc: p(4)?,
            btcdoge: p(5)?,
        })
    }

    pub fn set_price_call(&self) -> CallData {
        CallData::new(
            "setPrice",
            vec![
                Value::Uint(self.timestamp),
                Value::Uint(self.block_number),
                Value::Uint(self.usdbtc.points()),
                Value::Uint(self.btceth.points()),
                Value::Uint(self.btcetc.points()),
                Value::Uint(self.btcdoge.points()),
            ],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PriceLookupError {
    #[error("price history is empty")]
    Empty,
    #[error("block {block} outside published range [{first}, {last}]")]
    OutOfRange { block: u64, first: u64, last: u64 },
}

const OWNER: &str = "owner";
const FIRST: &str = "firstBlock";
const LAST: &str = "lastBlock";

fn feed_key(block: u64) -> String {
    format!("priceHistory/{block}")
}

/// Contract code for the price history.
///
/// * `setPrice(timestamp, blocknumber, usdbtc, btceth, btcetc, btcdoge)`:
///   owner only, block numbers must continue the history without gaps.
/// * `getPrice(blocknumber)`: the stored feed, or `Unit` when the block is
///   outside `[firstBlock, lastBlock]`. Reads only.
#[derive(Debug, Default)]
pub struct PriceHistory;

impl PriceHistory {
    /// Constructor: records the publishing owner.
    pub fn init(owner: Address) -> impl FnOnce(&mut Env<'_>) -> Result<(), VmError> {
        move |env| env.sstore(OWNER, &owner)
    }

    fn set_price(&self, env: &mut Env<'_>, call: &CallData) -> Result<Value, VmError> {
        let owner: Address = env.sload(OWNER)?.ok_or_else(|| VmError::revert("no owner"))?;
        if env.caller() != owner {
            return Err(VmError::revert("only owner"));
        }
        let timestamp = call.uint(0)?;
        let block_number = call.uint(1)?;
        if timestamp > UINT40_MAX || block_number > UINT40_MAX {
            return Err(VmError::revert("timestamp/blocknumber exceed 40 bits"));
        }
        if timestamp > env.block().timestamp {
            return Err(VmError::revert("feed timestamp is in the future"));
        }
        let mut prices = [PricePoint::default(); 4];
        for (i, slot) in prices.iter_mut().enumerate() {
            let v = call.uint(2 + i)?;
            if v == 0 {
                return Err(VmError::revert("prices must be positive"));
            }
            *slot = PricePoint::from_points(v);
        }
        let last: Option<u64> = env.sload(LAST)?;
        match last {
            Some(last) if block_number != last + 1 => {
                return Err(VmError::revert(format!(
                    "out-of-order block {block_number}, expected {}",
                    last + 1
                )))
            }
            None => env.sstore(FIRST, &block_number)?,
            _ => {}
        }
        let feed = Feed {
            usdbtc: prices[0],
            btceth: prices[1],
            btcetc: prices[2],
            btcdoge: prices[3],
            timestamp,
            block_number,
        };
        env.sstore(&feed_key(block_number), &feed)?;
        env.sstore(LAST, &block_number)?;
        env.emit(
            "PriceUpdated",
            Fields::new()
                .with("timestamp", timestamp)
                .with("blocknumber", block_number)
                .with("USDBTC", feed.usdbtc.points())
                .with("BTCETH", feed.btceth.points())
                .with("BTCETC", feed.btcetc.points())
                .with("BTCDOGE", feed.btcdoge.points()),
        )?;
        Ok(Value::Unit)
    }

    fn get_price(&self, env: &mut Env<'_>, call: &CallData) -> Result<Value, VmError> {
        let block = call.uint(0)?;
        let (Some(first), Some(last)) = (env.sload::<u64>(FIRST)?, env.sload::<u64>(LAST)?) else {
            return Ok(Value::Unit);
        };
        if block < first || block > last {
            return Ok(Value::Unit);
        }
        let feed: Feed = env
            .sload(&feed_key(block))?
            .ok_or_else(|| VmError::Storage(format!("gap at block {block}")))?;
        Ok(feed.to_value())
    }
}

impl Contract for PriceHistory {
    fn name(&self) -> &str {
        "price-history"
    }

    fn invoke(&self, env: &mut Env<'_>, call: &CallData) -> Result<Value, VmError> {
        match call.method.as_str() {
            "setPrice" => self.set_price(env, call),
            "getPrice" => self.get_price(env, call),
            "firstBlock" => Ok(env.sload::<u64>(FIRST)?.map_or(Value::Unit, Value::Uint)),
            "lastBlock" => Ok(env.sload::<u64>(LAST)?.map_or(Value::Unit, Value::Uint)),
            "owner" => Ok(env.sload::<Address>(OWNER)?.map_or(Value::Unit, Value::Address)),
            other => Err(VmError::revert(format!("price-history: unknown method {other}"))),
        }
    }
}

/// Free off-chain reads of a deployed price history.
#[derive(Clone, Copy)]
pub struct PriceHistoryView<'a> {
    ledger: &'a Ledger,
    address: Address,
}

impl<'a> PriceHistoryView<'a> {
    pub fn new(ledger: &'a Ledger, address: Address) -> Self {
        PriceHistoryView { ledger, address }
    }

    pub fn owner(&self) -> Option<Address> {
        self.ledger.storage(self.address, OWNER)
    }

    pub fn first_block(&self) -> Option<u64> {
        self.ledger.storage(self.address, FIRST)
    }

    pub fn last_block(&self) -> Option<u64> {
        self.ledger.storage(self.address, LAST)
    }

    pub fn range(&self) -> Option<(u64, u64)> {
        Some((self.first_block()?, self.last_block()?))
    }

    pub fn get_price(&self, block: u64) -> Result<Feed, PriceLookupError> {
        let (first, last) = self.range().ok_or(PriceLookupError::Empty)?;
        if block < first || block > last {
            return Err(PriceLookupError::OutOfRange { block, first, last });
        }
        Ok(self
            .ledger
            .storage(self.address, &feed_key(block))
            .expect("history is gapless between first and last"))
    }

    /// Feeds for `from..=to`, which must lie inside the published range.
    pub fn feeds(&self, from: u64, to: u64) -> Result<Vec<Feed>, PriceLookupError> {
        (from..=to).map(|b| self.get_price(b)).collect()
    }
}
