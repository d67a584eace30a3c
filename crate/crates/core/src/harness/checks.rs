//! Invariant checks evaluated after a run. Everything except fidelity is
//! recomputed from the event log alone and compared with state snapshots
//! taken at every block.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ledger::{Address, Amount, LogRecord, TxStatus, Value};
use crate::pricefeed::{Pair, PriceHistoryView, PricePoint, TickStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Total currency constant; miner balance grows by exactly the fees.
    Conservation,
    /// No option pays out more than twice its escrow.
    Cap,
    /// Locked balance equals the open escrow derived from events.
    Escrow,
    /// Every published feed equals the tick store at its block time.
    Fidelity,
    /// Every settlement matches an independent payout computation.
    Payouts,
}

impl Check {
    pub const ALL: [Check; 5] = [Check::Conservation, Check::Cap, Check::Escrow, Check::Fidelity, Check::Payouts];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: Check,
    pub passed: bool,
    /// First block at which the check failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_divergence: Option<u64>,
    pub detail: String,
}

impl CheckResult {
    fn pass(check: Check, detail: impl Into<String>) -> Self {
        CheckResult {
            check,
            passed: true,
            first_divergence: None,
            detail: detail.into(),
        }
    }

    fn fail(check: Check, block: u64, detail: impl Into<String>) -> Self {
        CheckResult {
            check,
            passed: false,
            first_divergence: Some(block),
            detail: detail.into(),
        }
    }
}

/// State captured right after a block was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub block: u64,
    pub total_supply: Amount,
    pub miner_balance: Amount,
    pub locked: Amount,
}

/// Collar payout found by moving the price one point at a time, shifting
/// `lot` wei from one side to the other per point until a side is empty.
pub fn brute_force_payout(amount: u128, start: u64, end: u64, lot: u128) -> (u128, u128) {
    let (mut long, mut short) = (amount, amount);
    let mut p = start;
    while p != end {
        if end > p {
            let m = lot.min(short);
            long += m;
            short -= m;
            p += 1;
        } else {
            let m = lot.min(long);
            long -= m;
            short += m;
            p -= 1;
        }
        if long == 0 || short == 0 {
            break;
        }
    }
    (long, short)
}

/// Facts about options reconstructed from the log.
#[derive(Debug, Default)]
struct OptionLog {
    amount: Amount,
    trader: Address,
    /// (block, tx index, recipient, amount)
    paid: Vec<(u64, usize, Address, Amount)>,
}

fn option_logs(records: &[LogRecord], market: Address) -> BTreeMap<u64, OptionLog> {
    let mut out: BTreeMap<u64, OptionLog> = BTreeMap::new();
    for r in records {
        let LogRecord::Event {
            block,
            tx,
            address,
            name,
            fields,
        } = r
        else {
            continue;
        };
        if *address != market {
            continue;
        }
        let id = fields.get("optionId").and_then(Value::as_uint);
        let amount = fields.get("amount").and_then(Value::as_amount);
        match (name.as_str(), id, amount) {
            ("LongOption" | "ShortOption", Some(id), Some(amount)) => {
                let trader = fields.get("sender").and_then(Value::as_address).unwrap_or(Address::ZERO);
                let entry = out.entry(id).or_default();
                entry.amount = amount;
                entry.trader = trader;
            }
            ("optionPaid", Some(id), Some(amount)) => {
                let to = fields.get("addr").and_then(Value::as_address).unwrap_or(Address::ZERO);
                out.entry(id).or_default().paid.push((*block, *tx, to, amount));
            }
            _ => {}
        }
    }
    out
}

pub fn conservation(records: &[LogRecord], snapshots: &[Snapshot]) -> CheckResult {
    let Some((supply, miner_start)) = records.iter().find_map(|r| match r {
        LogRecord::Genesis {
            total_supply,
            miner,
            accounts,
            ..
        } => {
            let start = accounts.iter().find(|(a, _)| a == miner).map_or(Amount::ZERO, |(_, b)| *b);
            Some((*total_supply, start))
        }
        _ => None,
    }) else {
        return CheckResult::fail(Check::Conservation, 0, "no genesis record");
    };
    let mut fees: BTreeMap<u64, u128> = BTreeMap::new();
    for r in records {
        if let LogRecord::Tx { block, tx, gas_used, .. } = r {
            *fees.entry(*block).or_default() += *gas_used as u128 * tx.gas_price.as_wei();
        }
    }
    let mut paid = miner_start.as_wei();
    for s in snapshots {
        paid += fees.get(&s.block).copied().unwrap_or(0);
        if s.total_supply != supply {
            return CheckResult::fail(
                Check::Conservation,
                s.block,
                format!("total supply {} != genesis {}", s.total_supply, supply),
            );
        }
        if s.miner_balance.as_wei() != paid {
            return CheckResult::fail(
                Check::Conservation,
                s.block,
                format!("miner holds {} but fees sum to {}", s.miner_balance, Amount::wei(paid)),
            );
        }
    }
    CheckResult::pass(Check::Conservation, format!("{} blocks, supply {}", snapshots.len(), supply))
}

pub fn cap(records: &[LogRecord], market: Address) -> CheckResult {
    let logs = option_logs(records, market);
    for (id, log) in &logs {
        let limit = log.amount.as_wei() * 2;
        let mut total = 0u128;
        for (block, _, _, amount) in &log.paid {
            total += amount.as_wei();
            if total > limit {
                return CheckResult::fail(
                    Check::Cap,
                    *block,
                    format!("option {id} paid {} against escrow {}", Amount::wei(total), log.amount),
                );
            }
        }
    }
    CheckResult::pass(Check::Cap, format!("{} options", logs.len()))
}

pub fn escrow(records: &[LogRecord], market: Address, snapshots: &[Snapshot]) -> CheckResult {
    // Open escrow after each block: entries add, the first payout closes.
    let mut by_block: BTreeMap<u64, i128> = BTreeMap::new();
    let mut closed = std::collections::BTreeSet::new();
    let mut amounts = BTreeMap::new();
    for r in records {
        let LogRecord::Event {
            block,
            address,
            name,
            fields,
            ..
        } = r
        else {
            continue;
        };
        if *address != market {
            continue;
        }
        let Some(id) = fields.get("optionId").and_then(Value::as_uint) else {
            continue;
        };
        match name.as_str() {
            "LongOption" | "ShortOption" => {
                let amount = fields.get("amount").and_then(Value::as_amount).unwrap_or_default();
                amounts.insert(id, amount);
                *by_block.entry(*block).or_default() += amount.as_wei() as i128;
            }
            "optionPaid" if closed.insert(id) => {
                let amount = amounts.get(&id).copied().unwrap_or_default();
                *by_block.entry(*block).or_default() -= amount.as_wei() as i128;
            }
            _ => {}
        }
    }
    let mut open: i128 = 0;
    for s in snapshots {
        open += by_block.get(&s.block).copied().unwrap_or(0);
        if open != s.locked.as_wei() as i128 {
            return CheckResult::fail(
                Check::Escrow,
                s.block,
                format!("contract locks {} but open escrow from the log is {open}", s.locked),
            );
        }
    }
    CheckResult::pass(Check::Escrow, format!("{} options, {} still open", amounts.len(), amounts.len() - closed.len()))
}

pub fn fidelity(history: &PriceHistoryView<'_>, store: &TickStore, timestamp_of: impl Fn(u64) -> u64) -> CheckResult {
    let Some((first, last)) = history.range() else {
        return CheckResult::pass(Check::Fidelity, "nothing published");
    };
    for b in first..=last {
        let feed = match history.get_price(b) {
            Ok(f) => f,
            Err(e) => return CheckResult::fail(Check::Fidelity, b, format!("gap: {e}")),
        };
        let tick = match store.price_at(timestamp_of(b)) {
            Ok(t) => t,
            Err(e) => return CheckResult::fail(Check::Fidelity, b, format!("published without a tick: {e}")),
        };
        if feed.prices() != tick.prices || feed.block_number != b {
            return CheckResult::fail(
                Check::Fidelity,
                b,
                format!("feed {:?} != tick {:?}", feed.prices(), tick.prices),
            );
        }
    }
    CheckResult::pass(Check::Fidelity, format!("blocks {first}..={last}"))
}

/// Compares every settled option's payouts against [`brute_force_payout`].
/// The end price is the callback's price when a callback settled it and the
/// published expiry-block price otherwise.
pub fn payouts(
    records: &[LogRecord],
    market: Address,
    history: &PriceHistoryView<'_>,
    pair: Pair,
    lot: Amount,
    start_price: impl Fn(u64) -> Option<(PricePoint, u64)>,
) -> CheckResult {
    let logs = option_logs(records, market);
    let mut txs: BTreeMap<(u64, usize), (&crate::ledger::Transaction, TxStatus)> = BTreeMap::new();
    for r in records {
        if let LogRecord::Tx { block, index, tx, status, .. } = r {
            txs.insert((*block, *index), (tx, *status));
        }
    }
    let mut settled = 0;
    for (id, log) in &logs {
        let Some(&(block, index, _, _)) = log.paid.first() else {
            continue;
        };
        let Some((start, expiry)) = start_price(*id) else {
            return CheckResult::fail(Check::Payouts, block, format!("option {id} missing from state"));
        };
        let end = match txs.get(&(block, index)) {
            Some((tx, _)) if tx.method() == Some("__callback") => tx
                .call
                .as_ref()
                .and_then(|c| c.args.get(1))
                .and_then(Value::as_text)
                .and_then(|t| PricePoint::parse_int_2(t).ok()),
            _ => history.get_price(expiry).ok().map(|f| f.price(pair)),
        };
        let Some(end) = end else {
            return CheckResult::fail(Check::Payouts, block, format!("no end price for option {id}"));
        };
        let (long, short) = brute_force_payout(log.amount.as_wei(), start.points(), end.points(), lot.as_wei());
        let to_trader: u128 = log
            .paid
            .iter()
            .filter(|p| p.2 == log.trader)
            .map(|p| p.3.as_wei())
            .sum();
        let to_market: u128 = log.paid.iter().filter(|p| p.2 == market).map(|p| p.3.as_wei()).sum();
        let trader_is_long = side_is_long(records, market, *id).unwrap_or(true);
        let (want_trader, want_market) = if trader_is_long { (long, short) } else { (short, long) };
        if (to_trader, to_market) != (want_trader, want_market) {
            return CheckResult::fail(
                Check::Payouts,
                block,
                format!(
                    "option {id}: paid trader {to_trader} market {to_market}, expected {want_trader} and {want_market}"
                ),
            );
        }
        settled += 1;
    }
    CheckResult::pass(Check::Payouts, format!("{settled} settlements"))
}

fn side_is_long(records: &[LogRecord], market: Address, id: u64) -> Option<bool> {
    records.iter().find_map(|r| match r {
        LogRecord::Event {
            address, name, fields, ..
        } if *address == market && fields.get("optionId").and_then(Value::as_uint) == Some(id) => {
            match name.as_str() {
                "LongOption" => Some(true),
                "ShortOption" => Some(false),
                _ => None,
            }
        }
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_walk() {
        assert_eq!(brute_force_payout(100, 1000, 1040, 1), (140, 60));
        assert_eq!(brute_force_payout(100, 1000, 5000, 1), (200, 0));
        assert_eq!(brute_force_payout(100, 1000, 1, 1), (0, 200));
        assert_eq!(brute_force_payout(100, 1000, 1000, 1), (100, 100));
        // a lot larger than the escrow empties a side in one step
        assert_eq!(brute_force_payout(100, 10, 11, 1_000), (200, 0));
    }
}
