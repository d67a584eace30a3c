//! Request/callback price oracle with injectable delivery faults.
//!
//! A client contract calls the on-chain [`OracleConnector`]'s `query`,
//! which hands back a request id and emits a `Query` event. The off-chain
//! [`CallbackOracle`] watches for those events and, after the requested
//! delay, sends `__callback(id, price, proof)` to the client from its
//! callback account. A [`FaultPlan`] per request can drop, delay or
//! underfund that callback.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Pair, PricePoint, TickStore};
use crate::ledger::{
    Address, Amount, Block, BlockListener, CallData, Contract, Env, Fields, Ledger, Transaction, TxReceipt, Value,
    VmError, DEFAULT_GAS_PRICE,
};

/// Gas attached to callbacks unless a fault plan overrides it.
pub const DEFAULT_CALLBACK_GAS: u64 = 400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultPlan {
    #[default]
    None,
    DropCallback,
    /// Deliver this many blocks after the scheduled block.
    DelayCallback(u64),
    /// Deliver on time with this gas limit.
    UnderfundedCallback(u64),
}

const NEXT_ID: &str = "nextId";
const CALLBACK_ACCOUNT: &str = "cbAddress";

/// On-chain entry point of the oracle.
///
/// * `query(delay, url, gasLimit) -> id`
/// * `cbAddress() -> address` of the account that sends callbacks.
#[derive(Debug, Default)]
pub struct OracleConnector;

impl OracleConnector {
    pub fn init(callback_account: Address) -> impl FnOnce(&mut Env<'_>) -> Result<(), VmError> {
        move |env| {
            env.sstore(CALLBACK_ACCOUNT, &callback_account)?;
            env.sstore(NEXT_ID, &1u64)
        }
    }
}

impl Contract for OracleConnector {
    fn name(&self) -> &str {
        "oracle-connector"
    }

    fn invoke(&self, env: &mut Env<'_>, call: &CallData) -> Result<Value, VmError> {
        match call.method.as_str() {
            "query" => {
                let delay = call.uint(0)?;
                let url = call.text(1)?.to_owned();
                let gas_limit = call.uint(2)?;
                let id: u64 = env.sload(NEXT_ID)?.unwrap_or(1);
                env.sstore(NEXT_ID, &(id + 1))?;
                env.emit(
                    "Query",
                    Fields::new()
                        .with("id", id)
                        .with("client", env.caller())
                        .with("delay", delay)
                        .with("url", url)
                        .with("gasLimit", gas_limit),
                )?;
                Ok(Value::Uint(id))
            }
            "cbAddress" => Ok(env
                .sload::<Address>(CALLBACK_ACCOUNT)?
                .map_or(Value::Unit, Value::Address)),
            other => Err(VmError::revert(format!("oracle: unknown method {other}"))),
        }
    }
}

/// Bookkeeping for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallbackRequest {
    pub id: u64,
    pub client: Address,
    pub requested_at: u64,
    pub delay: u64,
    pub gas_limit: u64,
    pub plan: FaultPlan,
    /// Block the callback should land in.
    pub scheduled_block: u64,
    /// Block it is actually sent for; `None` when dropped.
    pub delivery_block: Option<u64>,
    pub delivered_price: Option<PricePoint>,
    pub error: Option<String>,
}

/// The off-chain half of the oracle.
#[derive(Debug)]
pub struct CallbackOracle {
    store: Arc<TickStore>,
    connector: Address,
    callback_account: Address,
    pair: Pair,
    gas_price: Amount,
    default_plan: FaultPlan,
    overrides: BTreeMap<u64, FaultPlan>,
    requests: BTreeMap<u64, CallbackRequest>,
}

impl CallbackOracle {
    pub fn new(store: Arc<TickStore>, connector: Address, callback_account: Address, pair: Pair) -> Self {
        CallbackOracle {
            store,
            connector,
            callback_account,
            pair,
            gas_price: DEFAULT_GAS_PRICE,
            default_plan: FaultPlan::None,
            overrides: BTreeMap::new(),
            requests: BTreeMap::new(),
        }
    }

    /// Plan applied to every request without an explicit override.
    pub fn set_default_plan(&mut self, plan: FaultPlan) {
        self.default_plan = plan;
    }

    pub fn set_plan(&mut self, request_id: u64, plan: FaultPlan) {
        self.overrides.insert(request_id, plan);
    }

    pub fn requests(&self) -> impl Iterator<Item = &CallbackRequest> {
        self.requests.values()
    }

    pub fn request(&self, id: u64) -> Option<&CallbackRequest> {
        self.requests.get(&id)
    }

    /// Registers a query observed on chain at block `requested_at` and
    /// schedules its callback under `plan`. Returns the request id.
    pub fn request_callback_price(
        &mut self,
        id: u64,
        client: Address,
        requested_at: u64,
        delay: u64,
        gas_limit: u64,
        plan: FaultPlan,
    ) -> u64 {
        // A callback can at the earliest land in the block after the query.
        let scheduled_block = (requested_at + delay).max(requested_at + 1);
        let delivery_block = match plan {
            FaultPlan::DropCallback => None,
            FaultPlan::DelayCallback(k) => Some(scheduled_block + k),
            FaultPlan::None | FaultPlan::UnderfundedCallback(_) => Some(scheduled_block),
        };
        self.requests.insert(
            id,
            CallbackRequest {
                id,
                client,
                requested_at,
                delay,
                gas_limit,
                plan,
                scheduled_block,
                delivery_block,
                delivered_price: None,
                error: None,
            },
        );
        id
    }

    fn callback_for(&mut self, id: u64, delivery_ts: u64) -> Option<Transaction> {
        let req = self.requests.get_mut(&id)?;
        let tick = match self.store.price_at(delivery_ts) {
            Ok(t) => t,
            Err(e) => {
                req.error = Some(e.to_string());
                return None;
            }
        };
        let price = tick.prices.get(self.pair);
        req.delivered_price = Some(price);
        let gas_limit = match req.plan {
            FaultPlan::UnderfundedCallback(g) => g,
            _ => req.gas_limit,
        };
        let call = CallData::new(
            "__callback",
            vec![
                Value::Uint(id),
                Value::Text(price.to_string()),
                Value::Text(format!("proof:none:{id}")),
            ],
        );
        Some(Transaction::call(self.callback_account, req.client, call).with_gas(gas_limit, self.gas_price))
    }
}

impl BlockListener for CallbackOracle {
    fn on_block(&mut self, block: &Block, receipts: &[TxReceipt], ledger: &Ledger) -> Vec<Transaction> {
        let queries: Vec<_> = receipts
            .iter()
            .flat_map(|r| r.events.iter())
            .filter(|e| e.address == self.connector && e.name == "Query")
            .filter_map(|e| {
                Some((
                    e.uint("id")?,
                    e.address_field("client")?,
                    e.uint("delay")?,
                    e.uint("gasLimit").unwrap_or(DEFAULT_CALLBACK_GAS),
                ))
            })
            .collect();
        for (id, client, delay, gas_limit) in queries {
            let plan = self.overrides.get(&id).copied().unwrap_or(self.default_plan);
            self.request_callback_price(id, client, block.number, delay, gas_limit, plan);
        }

        // Transactions returned here are included in the next block.
        let next = block.number + 1;
        let due: Vec<u64> = self
            .requests
            .values()
            .filter(|r| r.delivery_block == Some(next) && r.delivered_price.is_none())
            .map(|r| r.id)
            .collect();
        let delivery_ts = ledger.timestamp_of(next);
        due.into_iter()
            .filter_map(|id| self.callback_for(id, delivery_ts))
            .collect()
    }
}
