use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sweep::{run_sweep, SweepReport};
use crate::ledger::{
    Address, Amount, Block, Genesis, Ledger, LedgerError, Transaction, TxReceipt, DEFAULT_GAS_LIMIT,
    DEFAULT_GAS_PRICE,
};
use crate::market::{calls, ConfigError, Market, MarketConfig, MarketSetup, MarketView, Side};
use crate::pricefeed::{
    CallbackOracle, FaultPlan, OracleConnector, PriceHistory, PriceHistoryView, PricePublisher, PublisherStatus,
    TickError, TickStore,
};

pub const MARKET: &str = "velocity";
pub const HISTORY: &str = "price-history";
pub const ORACLE: &str = "oracle";
pub const PUBLISHER: &str = "pricegeth";
pub const SWEEPER: &str = "sweeper";
pub const CALLBACK_ACCOUNT: &str = "oracle-cb";

const OPERATOR_FUNDS: Amount = Amount::ether(1_000);

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Ticks(#[from] TickError),
    #[error("market config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Scenario(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSettings {
    #[serde(default)]
    pub default: FaultPlan,
    /// Per query id.
    #[serde(default)]
    pub requests: BTreeMap<u64, FaultPlan>,
}

/// Everything needed to stand up a market on a fresh ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub genesis: Genesis,
    #[serde(default)]
    pub market: MarketConfig,
    /// Funds the market starts with to act as counterparty.
    #[serde(default = "default_pool")]
    pub pool: Amount,
    /// Settle through the callback oracle as well as the sweeper.
    #[serde(default)]
    pub callback_oracle: bool,
    #[serde(default)]
    pub faults: FaultSettings,
}

fn default_pool() -> Amount {
    Amount::ether(10)
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            genesis: Genesis::default(),
            market: MarketConfig::default(),
            pool: default_pool(),
            callback_oracle: false,
            faults: FaultSettings::default(),
        }
    }
}

/// A ledger with the price history, its publisher, the market and
/// optionally the callback oracle wired up. Block 0 is genesis; the first
/// price is published for block 1 and included in block 2.
pub struct Sim {
    ledger: Ledger,
    store: Arc<TickStore>,
    config: SimConfig,
    history: Address,
    market: Address,
    connector: Option<Address>,
    publisher: Arc<Mutex<PricePublisher>>,
    oracle: Option<Arc<Mutex<CallbackOracle>>>,
    sweeper: Address,
}

impl Sim {
    pub fn new(config: SimConfig, store: Arc<TickStore>) -> Result<Self, SimError> {
        config.market.validate()?;
        let mut genesis = config.genesis.clone();
        for operator in [PUBLISHER, SWEEPER, CALLBACK_ACCOUNT] {
            if !genesis.accounts.iter().any(|a| a.name == operator) {
                genesis = genesis.with_account(operator, OPERATOR_FUNDS);
            }
        }
        let start = genesis.timestamp.unwrap_or(store.first_timestamp());
        let mut ledger = Ledger::new(&genesis, start)?;
        let owner = ledger.resolve(PUBLISHER)?;
        let sweeper = ledger.resolve(SWEEPER)?;
        let cb = ledger.resolve(CALLBACK_ACCOUNT)?;

        let history = ledger.deploy(HISTORY, Arc::new(PriceHistory), Amount::ZERO, PriceHistory::init(owner))?;
        let connector = if config.callback_oracle {
            Some(ledger.deploy(ORACLE, Arc::new(OracleConnector), Amount::ZERO, OracleConnector::init(cb))?)
        } else {
            None
        };
        let setup = MarketSetup {
            config: config.market.clone(),
            price_history: history,
            oracle: connector,
        };
        let market = ledger.deploy(MARKET, Arc::new(Market), config.pool, Market::init(setup))?;

        let publisher = Arc::new(Mutex::new(PricePublisher::new(store.clone(), history, owner)));
        ledger.add_listener(Box::new(publisher.clone()));
        let oracle = connector.map(|connector| {
            let mut o = CallbackOracle::new(store.clone(), connector, cb, config.market.pair);
            o.set_default_plan(config.faults.default);
            for (id, plan) in &config.faults.requests {
                o.set_plan(*id, *plan);
            }
            Arc::new(Mutex::new(o))
        });
        if let Some(o) = &oracle {
            ledger.add_listener(Box::new(o.clone()));
        }

        Ok(Sim {
            ledger,
            store,
            config,
            history,
            market,
            connector,
            publisher,
            oracle,
            sweeper,
        })
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut Ledger {
        &mut self.ledger
    }

    pub fn into_ledger(self) -> Ledger {
        self.ledger
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn store(&self) -> &Arc<TickStore> {
        &self.store
    }

    pub fn market(&self) -> Address {
        self.market
    }

    pub fn history(&self) -> Address {
        self.history
    }

    pub fn connector(&self) -> Option<Address> {
        self.connector
    }

    pub fn sweeper(&self) -> Address {
        self.sweeper
    }

    pub fn market_view(&self) -> MarketView<'_> {
        MarketView::new(&self.ledger, self.market)
    }

    pub fn history_view(&self) -> PriceHistoryView<'_> {
        PriceHistoryView::new(&self.ledger, self.history)
    }

    pub fn publisher_status(&self) -> PublisherStatus {
        self.publisher.lock().expect("publisher lock").status().clone()
    }

    pub fn oracle(&self) -> Option<&Arc<Mutex<CallbackOracle>>> {
        self.oracle.as_ref()
    }

    pub fn account(&self, name: &str) -> Result<Address, SimError> {
        Ok(self.ledger.resolve(name)?)
    }

    pub fn height(&self) -> u64 {
        self.ledger.height()
    }

    /// Produces one block holding whatever is queued plus `txs`. Returns
    /// the receipts of `txs` only.
    pub fn execute(&mut self, txs: Vec<Transaction>) -> Result<(Block, Vec<TxReceipt>), SimError> {
        let queued = self.ledger.pending().len();
        let (block, mut receipts) = self.ledger.produce_block(txs)?;
        Ok((block, receipts.split_off(queued)))
    }

    pub fn step(&mut self) -> Result<Block, SimError> {
        Ok(self.execute(Vec::new())?.0)
    }

    pub fn step_until(&mut self, height: u64) -> Result<(), SimError> {
        while self.ledger.height() < height {
            self.step()?;
        }
        Ok(())
    }

    pub fn entry_tx(&self, account: Address, side: Side, deposit: Amount) -> Transaction {
        Transaction::call(account, self.market, calls::enter(side))
            .with_value(deposit)
            .with_gas(DEFAULT_GAS_LIMIT, DEFAULT_GAS_PRICE)
    }

    /// Enters a position in the next block.
    pub fn enter(&mut self, account: Address, side: Side, deposit: Amount) -> Result<TxReceipt, SimError> {
        let tx = self.entry_tx(account, side, deposit);
        let (_, mut receipts) = self.execute(vec![tx])?;
        Ok(receipts.remove(0))
    }

    pub fn exercise(&mut self, account: Address, option: Option<u64>) -> Result<TxReceipt, SimError> {
        let call = option.map_or_else(calls::exercise_own, calls::exercise);
        let tx = Transaction::call(account, self.market, call);
        let (_, mut receipts) = self.execute(vec![tx])?;
        Ok(receipts.remove(0))
    }

    /// Settles every open expired option in the next block.
    pub fn sweep(&mut self) -> Result<SweepReport, SimError> {
        Ok(run_sweep(&mut self.ledger, self.market, self.sweeper)?)
    }
}
