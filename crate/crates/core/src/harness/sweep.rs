use serde::{Deserialize, Serialize};

use crate::ledger::{
    Address, Ledger, LedgerError, Transaction, TxReceipt, DEFAULT_GAS_LIMIT, DEFAULT_GAS_PRICE,
};
use crate::market::{calls, MarketView};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub option_id: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Block the exercise transactions were included in.
    pub block: u64,
    /// Open options looked at.
    pub scanned: usize,
    pub settled: usize,
    pub failed: Vec<SweepFailure>,
}

/// Which options a sweep at the current height will try to settle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepPlan {
    pub scanned: usize,
    pub due: Vec<u64>,
}

impl SweepPlan {
    /// Open options whose expiry block is at or below the current height.
    pub fn new(ledger: &Ledger, market: Address) -> Self {
        let height = ledger.height();
        let view = MarketView::new(ledger, market);
        let open: Vec<_> = view.open_options().collect();
        SweepPlan {
            scanned: open.len(),
            due: open.iter().filter(|o| o.is_expired(height)).map(|o| o.id).collect(),
        }
    }

    pub fn transactions(&self, market: Address, sweeper: Address) -> Vec<Transaction> {
        self.due
            .iter()
            .map(|id| {
                Transaction::call(sweeper, market, calls::exercise(*id)).with_gas(DEFAULT_GAS_LIMIT, DEFAULT_GAS_PRICE)
            })
            .collect()
    }

    /// `receipts` are those of [`SweepPlan::transactions`], in order.
    pub fn report(&self, block: u64, receipts: &[TxReceipt]) -> SweepReport {
        let mut report = SweepReport {
            block,
            scanned: self.scanned,
            ..SweepReport::default()
        };
        for (id, receipt) in self.due.iter().zip(receipts) {
            if receipt.is_success() {
                report.settled += 1;
            } else {
                report.failed.push(SweepFailure {
                    option_id: *id,
                    error: receipt
                        .reason
                        .clone()
                        .or_else(|| receipt.error.clone())
                        .unwrap_or_else(|| format!("{:?}", receipt.status)),
                });
            }
        }
        report
    }
}

/// The settlement cron job: one `exercise` per due option, all sent from
/// `sweeper` in the next block. The sweeper pays the gas and is not
/// reimbursed.
pub fn run_sweep(ledger: &mut Ledger, market: Address, sweeper: Address) -> Result<SweepReport, LedgerError> {
    let plan = SweepPlan::new(ledger, market);
    let queued = ledger.pending().len();
    let (block, receipts) = ledger.produce_block(plan.transactions(market, sweeper))?;
    Ok(plan.report(block.number, &receipts[queued..]))
}
