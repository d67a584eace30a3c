use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::checks::{self, Check, CheckResult, Snapshot};
use super::fixtures::{Fixture, FixtureKind};
use super::sim::{Sim, SimConfig, SimError};
use super::sweep::{SweepPlan, SweepReport};
use crate::ledger::{Amount, CallData, LogRecord, Transaction, TxStatus, Value};
use crate::market::Side;
use crate::pricefeed::{
    flat_ticks, monotone_ticks, step_ticks, GapPolicy, PricePoint, PublisherStatus, RandomWalk, TickError, TickStore,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TickSource {
    /// CSV file; relative paths resolve against the scenario file.
    File {
        path: PathBuf,
        #[serde(default)]
        lenient: bool,
    },
    Walk(RandomWalk),
    Flat {
        start_time: u64,
        seconds: u64,
        price: PricePoint,
    },
    Monotone {
        start_time: u64,
        seconds: u64,
        start: PricePoint,
        step: u64,
    },
    Step {
        start_time: u64,
        seconds: u64,
        start: PricePoint,
        /// Absolute timestamp of the jump.
        at: u64,
        jump: i64,
    },
}

impl TickSource {
    pub fn load(&self, base: Option<&Path>) -> Result<TickStore, TickError> {
        let ticks = match self {
            TickSource::File { path, lenient } => {
                let path = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let policy = if *lenient { GapPolicy::Lenient } else { GapPolicy::Strict };
                return TickStore::load(path, policy);
            }
            TickSource::Walk(w) => w.generate(),
            TickSource::Flat {
                start_time,
                seconds,
                price,
            } => flat_ticks(*start_time, *seconds, *price),
            TickSource::Monotone {
                start_time,
                seconds,
                start,
                step,
            } => monotone_ticks(*start_time, *seconds, *start, *step),
            TickSource::Step {
                start_time,
                seconds,
                start,
                at,
                jump,
            } => step_ticks(*start_time, *seconds, *start, *at, *jump),
        };
        TickStore::ingest(ticks, GapPolicy::Strict)
    }
}

/// A hostile contract deployed before the first block. `controller` is the
/// plain account that triggers it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub name: String,
    pub kind: FixtureKind,
    pub controller: String,
    #[serde(default = "default_endowment")]
    pub endowment: Amount,
}

fn default_endowment() -> Amount {
    Amount::ether(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// Deposit defaults to the market's entry deposit.
    Enter {
        account: String,
        side: Side,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        deposit: Option<Amount>,
    },
    /// Without `option`, the market picks the account's oldest due option.
    Exercise {
        account: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        option: Option<u64>,
    },
    Sweep,
    Transfer {
        from: String,
        to: String,
        amount: Amount,
    },
}

/// An action included in block `block`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledAction {
    pub block: u64,
    #[serde(flatten)]
    pub action: Action,
}

fn default_checks() -> Vec<Check> {
    Check::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(flatten)]
    pub sim: SimConfig,
    pub ticks: TickSource,
    /// Height at which the run stops.
    pub blocks: u64,
    #[serde(default)]
    pub fixtures: Vec<FixtureSpec>,
    #[serde(default)]
    pub schedule: Vec<ScheduledAction>,
    #[serde(default = "default_checks")]
    pub checks: Vec<Check>,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| SimError::Scenario(format!("{}: {e}", path.as_ref().display())))?;
        serde_json::from_str(&text).map_err(|e| SimError::Scenario(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut last = 0;
        for entry in &self.schedule {
            if entry.block < last {
                return Err(SimError::Scenario(format!(
                    "schedule goes back from block {last} to {}",
                    entry.block
                )));
            }
            if entry.block == 0 || entry.block > self.blocks {
                return Err(SimError::Scenario(format!(
                    "block {} outside 1..={}",
                    entry.block, self.blocks
                )));
            }
            last = entry.block;
        }
        Ok(())
    }

    /// Replaces a random walk's seed; other tick sources are left alone.
    pub fn reseed(&mut self, seed: u64) {
        if let TickSource::Walk(w) = &mut self.ticks {
            w.seed = seed;
        }
    }
}

/// Result of one scheduled action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    pub block: u64,
    pub action: Action,
    pub status: TxStatus,
    pub output: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub checks: Vec<CheckResult>,
    pub actions: Vec<ActionResult>,
    pub sweeps: Vec<SweepReport>,
    pub snapshots: Vec<Snapshot>,
    pub publisher: PublisherStatus,
    /// The full event log, JSON lines.
    #[serde(skip)]
    pub log: String,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, check: Check) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == check)
    }
}

pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome, SimError> {
    run_scenario_in(scenario, None)
}

/// Runs `scenario`, resolving relative tick paths against `base`.
pub fn run_scenario_in(scenario: &Scenario, base: Option<&Path>) -> Result<ScenarioOutcome, SimError> {
    Ok(run_with_sim(scenario, base)?.0)
}

/// Like [`run_scenario_in`] but also hands back the simulation.
pub fn run_with_sim(scenario: &Scenario, base: Option<&Path>) -> Result<(ScenarioOutcome, Sim), SimError> {
    scenario.validate()?;
    let store = Arc::new(scenario.ticks.load(base)?);
    let mut sim = Sim::new(scenario.sim.clone(), store)?;
    let market = sim.market();
    let mut controllers = Vec::new();
    for f in &scenario.fixtures {
        let addr = sim.ledger_mut().deploy(
            &f.name,
            Arc::new(Fixture::new(f.kind)),
            f.endowment,
            Fixture::init(market),
        )?;
        controllers.push((addr, sim.account(&f.controller)?));
    }
    let controller_of = |addr| controllers.iter().find(|(f, _)| *f == addr).map(|(_, c)| *c);
    let deposit = scenario.sim.market.entry_deposit;
    let miner = sim.ledger().miner();

    let mut actions = Vec::new();
    let mut sweeps = Vec::new();
    let mut snapshots = Vec::new();
    let mut cursor = 0;
    for n in 1..=scenario.blocks {
        let mut txs = Vec::new();
        // (index into txs, schedule entry), and sweep plans with their tx range
        let mut placed = Vec::new();
        let mut plans = Vec::new();
        while cursor < scenario.schedule.len() && scenario.schedule[cursor].block == n {
            let entry = &scenario.schedule[cursor];
            cursor += 1;
            match &entry.action {
                Action::Sweep => {
                    let plan = SweepPlan::new(sim.ledger(), market);
                    let start = txs.len();
                    txs.extend(plan.transactions(market, sim.sweeper()));
                    plans.push((start, plan));
                    continue;
                }
                Action::Enter {
                    account,
                    side,
                    deposit: amount,
                } => {
                    let who = sim.account(account)?;
                    let amount = amount.unwrap_or(deposit);
                    txs.push(match controller_of(who) {
                        Some(c) => Transaction::call(
                            c,
                            who,
                            CallData::new(
                                "enter",
                                vec![
                                    match side {
                                        Side::Long => "long",
                                        Side::Short => "short",
                                    }
                                    .into(),
                                    amount.into(),
                                ],
                            ),
                        ),
                        None => sim.entry_tx(who, *side, amount),
                    });
                }
                Action::Exercise { account, option } => {
                    let who = sim.account(account)?;
                    txs.push(match (controller_of(who), option) {
                        (Some(c), Some(id)) => Transaction::call(c, who, CallData::new("exercise", vec![(*id).into()])),
                        (Some(_), None) => {
                            return Err(SimError::Scenario(format!("fixture {account} needs an explicit option id")))
                        }
                        (None, _) => Transaction::call(
                            who,
                            market,
                            option.map_or_else(crate::market::calls::exercise_own, crate::market::calls::exercise),
                        ),
                    });
                }
                Action::Transfer { from, to, amount } => {
                    txs.push(Transaction::transfer(sim.account(from)?, sim.account(to)?, *amount));
                }
            }
            placed.push((txs.len() - 1, entry.clone()));
        }

        let queued = sim.ledger().pending().len();
        let (block, receipts) = sim.ledger_mut().produce_block(txs)?;
        let receipts = &receipts[queued..];
        for (i, entry) in placed {
            let r = &receipts[i];
            actions.push(ActionResult {
                block: block.number,
                action: entry.action,
                status: r.status,
                output: r.output.clone(),
                reason: r.reason.clone().or_else(|| r.error.clone()),
            });
        }
        for (start, plan) in plans {
            sweeps.push(plan.report(block.number, &receipts[start..start + plan.due.len()]));
        }
        let ledger = sim.ledger();
        snapshots.push(Snapshot {
            block: block.number,
            total_supply: ledger.total_supply(),
            miner_balance: ledger.balance(miner),
            locked: sim.market_view().locked(),
        });
    }

    let records: Vec<LogRecord> = sim.ledger().log().records().collect();
    let view = sim.market_view();
    let cfg = &scenario.sim.market;
    let mut results = Vec::new();
    for check in &scenario.checks {
        results.push(match check {
            Check::Conservation => checks::conservation(&records, &snapshots),
            Check::Cap => checks::cap(&records, market),
            Check::Escrow => checks::escrow(&records, market, &snapshots),
            Check::Fidelity => {
                checks::fidelity(&sim.history_view(), sim.store(), |b| sim.ledger().timestamp_of(b))
            }
            Check::Payouts => checks::payouts(&records, market, &sim.history_view(), cfg.pair, cfg.lot_size, |id| {
                view.option(id).map(|o| (o.start_price, o.expiry_block))
            }),
        });
    }

    let outcome = ScenarioOutcome {
        name: scenario.name.clone(),
        checks: results,
        actions,
        sweeps,
        snapshots,
        publisher: sim.publisher_status(),
        log: sim.ledger().log().to_jsonl(),
    };
    Ok((outcome, sim))
}
