use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fixtures::{Fixture, FixtureKind};
use super::sim::{Sim, SimConfig, SimError};
use crate::ledger::{Amount, CallData, Genesis, TxStatus, Value};
use crate::market::{compute_payout, MarketConfig};
use crate::pricefeed::{step_ticks, GapPolicy, PricePoint, TickStore};

/// Receive-hook budget used against reentrant fixtures, large enough for
/// a nested `exercise` at every depth.
pub const ATTACK_STIPEND: u64 = 2_000_000;

const T0: u64 = 1_500_000_000;
const ENTRY_BLOCK: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub fixture: FixtureKind,
    pub vulnerable: bool,
    /// Defaults to [`ATTACK_STIPEND`] for reentrant fixtures and the
    /// ledger's standard stipend otherwise.
    #[serde(default)]
    pub send_stipend: Option<u64>,
    #[serde(default = "default_pool")]
    pub pool: Amount,
    #[serde(default)]
    pub market: MarketConfig,
}

fn default_pool() -> Amount {
    Amount::ether(10)
}

impl AttackConfig {
    pub fn new(fixture: FixtureKind, vulnerable: bool) -> Self {
        AttackConfig {
            fixture,
            vulnerable,
            send_stipend: None,
            pool: default_pool(),
            market: MarketConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub fixture: FixtureKind,
    pub vulnerable: bool,
    pub option_id: u64,
    /// Status of the fixture's `exercise` transaction.
    pub status: TxStatus,
    pub error: Option<String>,
    /// Whether the option ended up closed.
    pub settled: bool,
    /// Balance change of the fixture across the exercise, in wei.
    pub received: i128,
    /// What one honest settlement pays the fixture; zero if none happened.
    pub legitimate_payout: Amount,
    /// `received - legitimate_payout`, in wei.
    pub gain: i128,
    pub pool_before: Amount,
    pub pool_after: Amount,
    /// Payout events of the exercise followed by the fixture's hook log.
    pub trace: Vec<String>,
}

/// One winning long position owned by the fixture: flat price, then a jump
/// of exactly the collar before expiry, so an honest settlement pays the
/// fixture `2 * entry_deposit`. For reentrant fixtures `depth` honest
/// positions are opened alongside so that the unpatched variant's repeated
/// escrow release stays representable.
pub fn run_attack(cfg: &AttackConfig) -> Result<AttackOutcome, SimError> {
    let market_cfg = MarketConfig {
        vulnerable: cfg.vulnerable,
        ..cfg.market.clone()
    };
    let deposit = market_cfg.entry_deposit;
    let stipend = cfg.send_stipend.unwrap_or(match cfg.fixture {
        FixtureKind::ReentrantReceiver { .. } => ATTACK_STIPEND,
        _ => crate::ledger::GasCosts::default().send_stipend,
    });
    let fillers = match cfg.fixture {
        FixtureKind::ReentrantReceiver { depth } => depth as usize,
        _ => 0,
    };

    let mut genesis = Genesis::default()
        .with_account("mallory", Amount::ether(10))
        .with_account("alice", Amount::ether(1_000));
    genesis.gas_costs.send_stipend = stipend;

    // Price moves by the full collar between the entry and expiry blocks.
    let jump_at = T0 + 12 * (ENTRY_BLOCK + 2);
    let ticks = step_ticks(T0, 400, PricePoint::from_points(7_505), jump_at, market_cfg.margin_points as i64);
    let store = Arc::new(TickStore::ingest(ticks, GapPolicy::Strict)?);
    let sim_cfg = SimConfig {
        genesis,
        market: market_cfg.clone(),
        pool: cfg.pool,
        ..SimConfig::default()
    };
    let mut sim = Sim::new(sim_cfg, store)?;
    let market = sim.market();
    let fixture = sim.ledger_mut().deploy(
        "fixture",
        Arc::new(Fixture::new(cfg.fixture)),
        Amount::ether(1),
        Fixture::init(market),
    )?;
    let mallory = sim.account("mallory")?;
    let alice = sim.account("alice")?;

    sim.step_until(ENTRY_BLOCK - 1)?;
    let mut txs: Vec<_> = (0..fillers)
        .map(|_| sim.entry_tx(alice, crate::market::Side::Long, deposit))
        .collect();
    txs.push(crate::ledger::Transaction::call(
        mallory,
        fixture,
        CallData::new("enter", vec!["long".into(), deposit.into()]),
    ));
    let (_, receipts) = sim.execute(txs)?;
    let entry = receipts.last().expect("fixture entry receipt");
    let option_id = match (&entry.status, &entry.output) {
        (TxStatus::Success, Value::Uint(id)) => *id,
        _ => {
            return Err(SimError::Scenario(format!(
                "fixture could not enter: {}",
                entry.reason.clone().or(entry.error.clone()).unwrap_or_default()
            )))
        }
    };
    let option = sim.market_view().option(option_id).expect("option stored");
    sim.step_until(option.expiry_block)?;

    let before = sim.ledger().balance(fixture);
    let pool_before = sim.ledger().balance(market);
    let tx = crate::ledger::Transaction::call(mallory, fixture, CallData::new("exercise", vec![option_id.into()]));
    let (_, mut receipts) = sim.execute(vec![tx])?;
    let receipt = receipts.remove(0);
    let after = sim.ledger().balance(fixture);
    let received = after.as_wei() as i128 - before.as_wei() as i128;

    let settled = sim.market_view().option(option_id).is_some_and(|o| o.closed);
    let legitimate_payout = if settled {
        let end = sim
            .history_view()
            .get_price(option.expiry_block)
            .map_err(|e| SimError::Scenario(e.to_string()))?
            .price(market_cfg.pair);
        compute_payout(option.amount, option.start_price, end, market_cfg.lot_size).long
    } else {
        Amount::ZERO
    };

    let mut trace: Vec<String> = receipt
        .events_named("optionPaid")
        .map(|e| {
            format!(
                "optionPaid id={} to={} amount={}",
                e.uint("optionId").unwrap_or_default(),
                e.address_field("addr").map(|a| a.to_string()).unwrap_or_default(),
                e.amount("amount").unwrap_or_default()
            )
        })
        .collect();
    trace.extend(sim.ledger().storage::<Vec<String>>(fixture, "trace").unwrap_or_default());

    Ok(AttackOutcome {
        fixture: cfg.fixture,
        vulnerable: cfg.vulnerable,
        option_id,
        status: receipt.status,
        error: receipt.reason.clone().or(receipt.error.clone()),
        settled,
        received,
        legitimate_payout,
        gain: received - legitimate_payout.as_wei() as i128,
        pool_before,
        pool_after: sim.ledger().balance(market),
        trace,
    })
}
