use serde::{Deserialize, Serialize};

use super::{compute_payout, MarketConfig};
use crate::ledger::{Address, Amount, CallData, Contract, Env, Fields, Value, VmError};
use crate::pricefeed::{Feed, PricePoint, DEFAULT_CALLBACK_GAS};

pub(super) const CFG: &str = "cfg";
pub(super) const LAST_ID: &str = "lastOptionId";
pub(super) const LOCKED: &str = "locked";

pub(super) fn option_key(id: u64) -> String {
    format!("option/{id}")
}

fn query_key(id: u64) -> String {
    format!("query/{id}")
}

pub const INVALID_MARGIN: &str = "Invalid Margin!";
pub const INSUFFICIENT_POOL: &str = "Insufficient pool";
const PRICE_URL: &str = "json(https://exchange.invalid/ticker/ETHXBT).last";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Long,
    Short,
}

impl Side {
    pub fn event_name(self) -> &'static str {
        match self {
            Side::Long => "LongOption",
            Side::Short => "ShortOption",
        }
    }

    pub fn entry_method(self) -> &'static str {
        match self {
            Side::Long => "goLong",
            Side::Short => "goShort",
        }
    }
}

/// One collared position. The market itself is the counterparty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionContract {
    pub id: u64,
    pub long: Address,
    pub short: Address,
    /// Escrow per side.
    pub amount: Amount,
    pub start_block: u64,
    pub expiry_block: u64,
    pub start_price: PricePoint,
    /// Block whose published feed supplied `start_price`.
    pub price_block: u64,
    pub closed: bool,
}

impl OptionContract {
    pub fn is_party(&self, who: Address) -> bool {
        self.long == who || self.short == who
    }

    /// The trader's side, given the market's address.
    pub fn side_of(&self, market: Address) -> Side {
        if self.short == market {
            Side::Long
        } else {
            Side::Short
        }
    }

    pub fn trader(&self, market: Address) -> Address {
        match self.side_of(market) {
            Side::Long => self.long,
            Side::Short => self.short,
        }
    }

    pub fn is_expired(&self, height: u64) -> bool {
        height >= self.expiry_block
    }
}

/// What the market keeps under `cfg`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketSetup {
    pub config: MarketConfig,
    pub price_history: Address,
    /// Callback oracle connector. When set, every entry also requests a
    /// settlement callback after `expiry_blocks`.
    pub oracle: Option<Address>,
}

/// Market contract code.
///
/// * `goLong()`, `goShort()`: payable, exactly `entry_deposit`.
/// * `exercise([optionId])`: settles the given option, or the caller's
///   oldest open expired one.
/// * `findOptionId(owner)`, `lockedBalance()`, `lastOptionId()`.
/// * `__callback(queryId, price, proof)`: oracle settlement.
#[derive(Debug, Default)]
pub struct Market;

impl Market {
    pub fn init(setup: MarketSetup) -> impl FnOnce(&mut Env<'_>) -> Result<(), VmError> {
        move |env| {
            setup
                .config
                .validate()
                .map_err(|e| VmError::revert(e.to_string()))?;
            env.sstore(CFG, &setup)?;
            env.sstore(LAST_ID, &0u64)?;
            env.sstore(LOCKED, &Amount::ZERO)
        }
    }

    fn setup(env: &mut Env<'_>) -> Result<MarketSetup, VmError> {
        env.sload(CFG)?.ok_or_else(|| VmError::Storage("market not initialised".into()))
    }

    fn locked(env: &mut Env<'_>) -> Result<Amount, VmError> {
        Ok(env.sload(LOCKED)?.unwrap_or(Amount::ZERO))
    }

    fn load_option(env: &mut Env<'_>, id: u64) -> Result<OptionContract, VmError> {
        env.sload(&option_key(id))?
            .ok_or_else(|| VmError::revert(format!("unknown option {id}")))
    }

    fn feed(env: &mut Env<'_>, history: Address, block: u64) -> Result<Option<Feed>, VmError> {
        let out = env.call(history, Amount::ZERO, CallData::new("getPrice", vec![block.into()]))?;
        Ok(Feed::from_value(&out))
    }

    fn enter(&self, env: &mut Env<'_>, side: Side) -> Result<Value, VmError> {
        let setup = Self::setup(env)?;
        let cfg = &setup.config;
        let sender = env.caller();
        let value = env.value();

        // hasEnoughFunds: the pool, excluding this deposit and everything
        // held for open options, must cover the matching escrow.
        let held = env.self_balance()?.checked_sub(value)?;
        let committed = Self::locked(env)?.checked_mul(2)?;
        if held.saturating_sub(committed) < value {
            return Err(VmError::revert(INSUFFICIENT_POOL));
        }
        // checkMargin
        if value != cfg.entry_deposit {
            env.emit("Error", Fields::new().with("message", INVALID_MARGIN))?;
            if !value.is_zero() {
                env.transfer(sender, value)?;
            }
            return Ok(Value::Unit);
        }

        let block = env.block();
        // The feed for the current block is only published after it.
        let price_block = block
            .number
            .checked_sub(1)
            .ok_or_else(|| VmError::revert("no price before block 1"))?;
        let feed = Self::feed(env, setup.price_history, price_block)?
            .ok_or_else(|| VmError::revert(format!("no price for block {price_block}")))?;

        let id = env.sload::<u64>(LAST_ID)?.unwrap_or(0) + 1;
        let me = env.address();
        let (long, short) = match side {
            Side::Long => (sender, me),
            Side::Short => (me, sender),
        };
        let option = OptionContract {
            id,
            long,
            short,
            amount: value,
            start_block: block.number,
            expiry_block: block.number + cfg.expiry_blocks,
            start_price: feed.price(cfg.pair),
            price_block,
            closed: false,
        };
        env.sstore(LAST_ID, &id)?;
        env.sstore(&option_key(id), &option)?;
        let locked = Self::locked(env)?.checked_add(value)?;
        env.sstore(LOCKED, &locked)?;

        if let Some(oracle) = setup.oracle {
            let query = CallData::new(
                "query",
                vec![cfg.expiry_blocks.into(), PRICE_URL.into(), DEFAULT_CALLBACK_GAS.into()],
            );
            let qid = env
                .call(oracle, Amount::ZERO, query)?
                .as_uint()
                .ok_or_else(|| VmError::revert("oracle returned no query id"))?;
            env.sstore(&query_key(qid), &id)?;
        }

        env.emit(
            side.event_name(),
            Fields::new()
                .with("optionId", id)
                .with("sender", sender)
                .with("amount", value)
                .with("blockNumber", block.number),
        )?;
        Ok(Value::Uint(id))
    }

    fn find_option_id(env: &mut Env<'_>, owner: Address) -> Result<u64, VmError> {
        let last = env.sload::<u64>(LAST_ID)?.unwrap_or(0);
        let height = env.block().number;
        for id in 1..=last {
            let opt = Self::load_option(env, id)?;
            if !opt.closed && opt.is_expired(height) && opt.is_party(owner) {
                return Ok(id);
            }
        }
        Err(VmError::revert(format!("no open expired option for {owner}")))
    }

    fn exercise(&self, env: &mut Env<'_>, call: &CallData) -> Result<Value, VmError> {
        let id = match call.opt_uint(0)? {
            Some(id) => id,
            None => Self::find_option_id(env, env.caller())?,
        };
        let setup = Self::setup(env)?;
        let opt = Self::load_option(env, id)?;
        if opt.closed {
            return Err(VmError::revert(format!("option {id} is closed")));
        }
        if env.block().number < opt.expiry_block {
            return Err(VmError::revert(format!("option {id} expires at block {}", opt.expiry_block)));
        }
        let feed = Self::feed(env, setup.price_history, opt.expiry_block)?
            .ok_or_else(|| VmError::revert(format!("no price for block {}", opt.expiry_block)))?;
        Self::settle(env, &setup, opt, feed.price(setup.config.pair))
    }

    fn close(env: &mut Env<'_>, opt: &mut OptionContract) -> Result<(), VmError> {
        opt.closed = true;
        env.sstore(&option_key(opt.id), opt)?;
        let locked = Self::locked(env)?.checked_sub(opt.amount)?;
        env.sstore(LOCKED, &locked)
    }

    fn settle(env: &mut Env<'_>, setup: &MarketSetup, mut opt: OptionContract, end: PricePoint) -> Result<Value, VmError> {
        let payout = compute_payout(opt.amount, opt.start_price, end, setup.config.lot_size);
        if !setup.config.vulnerable {
            Self::close(env, &mut opt)?;
        }
        Self::pay_and_handle(env, opt.id, opt.long, payout.long)?;
        Self::pay_and_handle(env, opt.id, opt.short, payout.short)?;
        if setup.config.vulnerable {
            Self::close(env, &mut opt)?;
        }
        Ok(Value::Bool(true))
    }

    fn pay_and_handle(env: &mut Env<'_>, id: u64, addr: Address, amount: Amount) -> Result<(), VmError> {
        if amount.is_zero() {
            return Ok(());
        }
        if !env.send(addr, amount)? {
            return Err(VmError::revert(format!("payout of option {id} to {addr} failed")));
        }
        env.emit(
            "optionPaid",
            Fields::new().with("optionId", id).with("addr", addr).with("amount", amount),
        )
    }

    fn callback(&self, env: &mut Env<'_>, call: &CallData) -> Result<Value, VmError> {
        let setup = Self::setup(env)?;
        let oracle = setup.oracle.ok_or_else(|| VmError::revert("no oracle configured"))?;
        let cb = env.call(oracle, Amount::ZERO, CallData::method("cbAddress"))?.as_address();
        if cb != Some(env.caller()) {
            return Err(VmError::revert("callback not from oracle"));
        }
        let qid = call.uint(0)?;
        let id: u64 = env
            .sload(&query_key(qid))?
            .ok_or_else(|| VmError::revert(format!("unknown query {qid}")))?;
        let opt = Self::load_option(env, id)?;
        if opt.closed {
            return Err(VmError::revert(format!("option {id} is closed")));
        }
        let price = PricePoint::parse_int_2(call.text(1)?).map_err(|e| VmError::revert(e.to_string()))?;
        if price.points() == 0 {
            return Err(VmError::revert("zero price"));
        }
        Self::settle(env, &setup, opt, price)
    }
}

impl Contract for Market {
    fn name(&self) -> &str {
        "velocity-market"
    }

    fn invoke(&self, env: &mut Env<'_>, call: &CallData) -> Result<Value, VmError> {
        match call.method.as_str() {
            "goLong" => self.enter(env, Side::Long),
            "goShort" => self.enter(env, Side::Short),
            "exercise" => self.exercise(env, call),
            "__callback" => self.callback(env, call),
            "findOptionId" => Ok(Value::Uint(Self::find_option_id(env, call.address(0)?)?)),
            "lockedBalance" => Ok(Value::Amount(Self::locked(env)?)),
            "lastOptionId" => Ok(Value::Uint(env.sload(LAST_ID)?.unwrap_or(0))),
            other => Err(VmError::revert(format!("market: unknown method {other}"))),
        }
    }
}

/// Call data for the market's entry points.
pub mod calls {
    use super::Side;
    use crate::ledger::{Address, CallData};

    pub fn enter(side: Side) -> CallData {
        CallData::method(side.entry_method())
    }

    pub fn go_long() -> CallData {
        enter(Side::Long)
    }

    pub fn go_short() -> CallData {
        enter(Side::Short)
    }

    pub fn exercise(id: u64) -> CallData {
        CallData::new("exercise", vec![id.into()])
    }

    pub fn exercise_own() -> CallData {
        CallData::method("exercise")
    }

    pub fn find_option_id(owner: Address) -> CallData {
        CallData::new("findOptionId", vec![owner.into()])
    }
}
