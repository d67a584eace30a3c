use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{Action, Scenario, ScheduledAction, TickSource};
use super::sim::{Sim, SimConfig, SimError};
use crate::ledger::{Amount, Genesis, Value};
use crate::market::{calls, MarketConfig, Side, INSUFFICIENT_POOL};
use crate::pricefeed::{monotone_ticks, GapPolicy, PricePoint, RandomWalk, TickStore};

pub const DEMO_START: u64 = 1_500_000_000;
const DEMO_PRICE: PricePoint = PricePoint::from_points(7_505);

/// One long at block 2, five-block expiry, sweep once the expiry price is
/// published. `jump` moves the price by that many points before expiry.
pub fn canonical_demo(jump: i64) -> Scenario {
    Scenario {
        name: format!("canonical demo, jump {jump}"),
        sim: SimConfig {
            genesis: Genesis::default().with_account("alice", Amount::ether(10)),
            ..SimConfig::default()
        },
        ticks: TickSource::Step {
            start_time: DEMO_START,
            seconds: 200,
            start: DEMO_PRICE,
            at: DEMO_START + 48,
            jump,
        },
        blocks: 10,
        fixtures: Vec::new(),
        schedule: vec![
            ScheduledAction {
                block: 2,
                action: Action::Enter {
                    account: "alice".into(),
                    side: Side::Long,
                    deposit: None,
                },
            },
            ScheduledAction {
                block: 8,
                action: Action::Sweep,
            },
        ],
        checks: super::checks::Check::ALL.to_vec(),
    }
}

/// Seeded walk over 1000 seconds, `positions` random entries by ten
/// traders and a sweep every ten blocks.
pub fn random_demo(seed: u64, positions: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traders: Vec<String> = (0..10).map(|i| format!("trader-{i}")).collect();
    let mut genesis = Genesis::default();
    for t in &traders {
        genesis = genesis.with_account(t, Amount::ether(10));
    }
    let blocks = 80;
    let mut entries: Vec<(u64, Action)> = (0..positions)
        .map(|_| {
            let block = rng.random_range(2..=70);
            let account = traders[rng.random_range(0..traders.len())].clone();
            let side = if rng.random_bool(0.5) { Side::Long } else { Side::Short };
            (
                block,
                Action::Enter {
                    account,
                    side,
                    deposit: None,
                },
            )
        })
        .collect();
    entries.extend((1..=blocks / 10).map(|k| (k * 10, Action::Sweep)));
    // Stable: within a block, entries keep generation order and come first.
    entries.sort_by_key(|(b, a)| (*b, matches!(a, Action::Sweep)));
    Scenario {
        name: format!("random walk demo, seed {seed}"),
        sim: SimConfig {
            genesis,
            ..SimConfig::default()
        },
        ticks: TickSource::Walk(RandomWalk {
            seed,
            start_time: DEMO_START,
            seconds: 1000,
            start: DEMO_PRICE,
            vol: 0.002,
        }),
        blocks,
        fixtures: Vec::new(),
        schedule: entries
            .into_iter()
            .map(|(block, action)| ScheduledAction { block, action })
            .collect(),
        checks: super::checks::Check::ALL.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisuseReport {
    pub pool: Amount,
    pub entry_deposit: Amount,
    /// `pool / entry_deposit`.
    pub predicted_rounds: u64,
    /// Entries accepted before the market refused.
    pub rounds: u64,
    pub free_pool_after: Amount,
    /// Trader balance change, gas included.
    pub trader_profit: i128,
    /// Why the last entry was refused.
    pub refusal: Option<String>,
}

/// A trader on a steadily rising market goes long, settles at expiry and
/// immediately goes long again. Every round wins the full collar, so the
/// market loses one entry deposit per round until its free pool cannot
/// cover another position.
pub fn misuse_demo(pool: Amount) -> Result<MisuseReport, SimError> {
    let market = MarketConfig::default();
    let deposit = market.entry_deposit;
    let predicted = (pool.as_wei() / deposit.as_wei()) as u64;
    let round_blocks = market.expiry_blocks + 1;
    let seconds = 12 * round_blocks * (predicted + 3) + 60;
    // 2 points a second: a round spans 72 s, well past the 100-point collar.
    let store = Arc::new(TickStore::ingest(
        monotone_ticks(DEMO_START, seconds, DEMO_PRICE, 2),
        GapPolicy::Strict,
    )?);
    let cfg = SimConfig {
        genesis: Genesis::default().with_account("gamer", Amount::ether(100)),
        market,
        pool,
        ..SimConfig::default()
    };
    let mut sim = Sim::new(cfg, store)?;
    let gamer = sim.account("gamer")?;
    let start_balance = sim.ledger().balance(gamer);
    sim.step()?;

    let mut rounds = 0;
    let mut refusal = None;
    let mut open: Option<u64> = None;
    // A guard against a market that never refuses.
    for _ in 0..=predicted + 2 {
        let mut txs = Vec::new();
        if let Some(id) = open.take() {
            sim.step_until(sim.market_view().option(id).expect("option").expiry_block)?;
            txs.push(crate::ledger::Transaction::call(gamer, sim.market(), calls::exercise(id)));
        }
        txs.push(sim.entry_tx(gamer, Side::Long, deposit));
        let (_, receipts) = sim.execute(txs)?;
        if receipts.len() == 2 && !receipts[0].is_success() {
            return Err(SimError::Scenario(format!("settlement failed: {:?}", receipts[0].reason)));
        }
        let entry = receipts.last().expect("entry receipt");
        match entry.output {
            Value::Uint(id) if entry.is_success() => {
                rounds += 1;
                open = Some(id);
            }
            _ => {
                refusal = entry.reason.clone().or(entry.error.clone());
                break;
            }
        }
    }
    let end_balance = sim.ledger().balance(gamer);
    let report = MisuseReport {
        pool,
        entry_deposit: deposit,
        predicted_rounds: predicted,
        rounds,
        free_pool_after: sim.market_view().free_pool(),
        trader_profit: end_balance.as_wei() as i128 - start_balance.as_wei() as i128,
        refusal,
    };
    if report.refusal.as_deref().is_some_and(|r| r != INSUFFICIENT_POOL) {
        return Err(SimError::Scenario(format!("unexpected refusal: {:?}", report.refusal)));
    }
    Ok(report)
}
