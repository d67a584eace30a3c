use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Feed, TickError, TickStore};
use crate::ledger::{
    Address, Amount, Block, BlockListener, Ledger, Transaction, TxReceipt, DEFAULT_GAS_PRICE,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PublisherStatus {
    Running,
    /// The tick store did not cover a block; nothing further is published.
    Halted { block: u64, reason: String },
}

/// Block listener that publishes, for every produced block, the last tick
/// at or before that block's timestamp. The owner-signed `setPrice` lands
/// in the following block.
#[derive(Debug)]
pub struct PricePublisher {
    store: Arc<TickStore>,
    history: Address,
    owner: Address,
    gas_limit: u64,
    gas_price: Amount,
    status: PublisherStatus,
    published: u64,
}

impl PricePublisher {
    pub fn new(store: Arc<TickStore>, history: Address, owner: Address) -> Self {
        PricePublisher {
            store,
            history,
            owner,
            gas_limit: 100_000,
            gas_price: DEFAULT_GAS_PRICE,
            status: PublisherStatus::Running,
            published: 0,
        }
    }

    pub fn with_gas(mut self, gas_limit: u64, gas_price: Amount) -> Self {
        self.gas_limit = gas_limit;
        self.gas_price = gas_price;
        self
    }

    pub fn status(&self) -> &PublisherStatus {
        &self.status
    }

    pub fn published(&self) -> u64 {
        self.published
    }

    /// The `setPrice` transaction for `block`, or the reason none can be
    /// built. Never guesses a price for an uncovered timestamp.
    pub fn on_new_block(&self, block: &Block) -> Result<Transaction, TickError> {
        let tick = self.store.price_at(block.timestamp)?;
        let feed = Feed::new(block.number, tick.timestamp, tick.prices);
        Ok(Transaction::call(self.owner, self.history, feed.set_price_call())
            .with_gas(self.gas_limit, self.gas_price))
    }
}

impl BlockListener for PricePublisher {
    fn on_block(&mut self, block: &Block, _receipts: &[TxReceipt], _ledger: &Ledger) -> Vec<Transaction> {
        if self.status != PublisherStatus::Running {
            return Vec::new();
        }
        match self.on_new_block(block) {
            Ok(tx) => {
                self.published += 1;
                vec![tx]
            }
            Err(err) => {
                self.status = PublisherStatus::Halted {
                    block: block.number,
                    reason: err.to_string(),
                };
                Vec::new()
            }
        }
    }
}
