use super::contract::{option_key, CFG, LAST_ID, LOCKED};
use super::{compute_payout, MarketSetup, OptionContract, Payout};
use crate::ledger::{Address, Amount, Ledger};
use crate::pricefeed::PricePoint;

/// Free off-chain reads of a deployed market.
#[derive(Clone, Copy)]
pub struct MarketView<'a> {
    ledger: &'a Ledger,
    address: Address,
}

impl<'a> MarketView<'a> {
    pub fn new(ledger: &'a Ledger, address: Address) -> Self {
        MarketView { ledger, address }
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn setup(&self) -> MarketSetup {
        self.ledger
            .storage(self.address, CFG)
            .expect("address does not hold a market")
    }

    pub fn locked(&self) -> Amount {
        self.ledger.storage(self.address, LOCKED).unwrap_or(Amount::ZERO)
    }

    pub fn last_option_id(&self) -> u64 {
        self.ledger.storage(self.address, LAST_ID).unwrap_or(0)
    }

    pub fn balance(&self) -> Amount {
        self.ledger.balance(self.address)
    }

    /// Pool not committed to open options.
    pub fn free_pool(&self) -> Amount {
        let committed = self.locked().checked_mul(2).unwrap_or(Amount::wei(u128::MAX));
        self.balance().saturating_sub(committed)
    }

    pub fn option(&self, id: u64) -> Option<OptionContract> {
        self.ledger.storage(self.address, &option_key(id))
    }

    pub fn options(&self) -> impl Iterator<Item = OptionContract> + 'a {
        let this = *self;
        (1..=self.last_option_id()).filter_map(move |id| this.option(id))
    }

    pub fn open_options(&self) -> impl Iterator<Item = OptionContract> + 'a {
        self.options().filter(|o| !o.closed)
    }

    /// Open options at or past expiry at the current height.
    pub fn expired_open(&self) -> Vec<OptionContract> {
        let height = self.ledger.height();
        self.open_options().filter(|o| o.is_expired(height)).collect()
    }

    /// Non-binding settlement preview at `price`.
    pub fn preview(&self, option: &OptionContract, price: PricePoint) -> Payout {
        compute_payout(option.amount, option.start_price, price, self.setup().config.lot_size)
    }
}
