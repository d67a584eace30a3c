//! Shared plumbing for the `velocity` and `pricefeed` binaries.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context};
use serde::Serialize;
use velocity_core::harness::{run_scenario_in, Scenario, ScenarioOutcome, TickSource, HISTORY, PUBLISHER};
use velocity_core::ledger::{Amount, Genesis, Ledger};
use velocity_core::pricefeed::{
    GapPolicy, PriceHistory, PriceHistoryView, PricePublisher, PublisherStatus, RandomWalk, TickStore,
};

/// Loads a scenario, applies the command-line overrides and runs it.
pub fn run_scenario_file(
    path: &Path,
    ticks: Option<PathBuf>,
    seed: Option<u64>,
) -> anyhow::Result<ScenarioOutcome> {
    let mut scenario = Scenario::load(path)?;
    if let Some(path) = ticks {
        scenario.ticks = TickSource::File { path, lenient: false };
    }
    if let Some(seed) = seed {
        if !matches!(scenario.ticks, TickSource::Walk(_)) {
            bail!("--seed only applies to scenarios with a random-walk tick source");
        }
        scenario.reseed(seed);
    }
    Ok(run_scenario_in(&scenario, path.parent())?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplaySummary {
    pub blocks: u64,
    pub first_block: Option<u64>,
    pub last_block: Option<u64>,
    /// Blocks whose stored feed differs from the tick store.
    pub mismatches: Vec<u64>,
    pub publisher: PublisherStatus,
}

impl ReplaySummary {
    pub fn faithful(&self) -> bool {
        self.mismatches.is_empty() && self.first_block.is_some()
    }
}

/// Publishes `store` into a fresh price history block by block until the
/// ticks run out or `max_blocks` is reached.
pub fn replay(store: TickStore, genesis: &Genesis, max_blocks: Option<u64>) -> anyhow::Result<(ReplaySummary, Ledger)> {
    let store = Arc::new(store);
    let mut genesis = genesis.clone();
    if !genesis.accounts.iter().any(|a| a.name == PUBLISHER) {
        genesis = genesis.with_account(PUBLISHER, Amount::ether(1_000));
    }
    let start = genesis.timestamp.unwrap_or(store.first_timestamp());
    let mut ledger = Ledger::new(&genesis, start)?;
    let owner = ledger.resolve(PUBLISHER)?;
    let history = ledger.deploy(HISTORY, Arc::new(PriceHistory), Amount::ZERO, PriceHistory::init(owner))?;
    let publisher = Arc::new(Mutex::new(PricePublisher::new(store.clone(), history, owner)));
    ledger.add_listener(Box::new(publisher.clone()));

    let status = || publisher.lock().expect("publisher lock").status().clone();
    loop {
        if max_blocks.is_some_and(|max| ledger.height() >= max) {
            break;
        }
        // One more block includes the final setPrice already queued.
        let halted = !matches!(status(), PublisherStatus::Running);
        ledger.produce_block(Vec::new())?;
        if halted {
            break;
        }
    }

    let view = PriceHistoryView::new(&ledger, history);
    let mut mismatches = Vec::new();
    if let Some((first, last)) = view.range() {
        for feed in view.feeds(first, last)? {
            let tick = store
                .price_at(ledger.timestamp_of(feed.block_number))
                .with_context(|| format!("block {}", feed.block_number))?;
            if feed.prices() != tick.prices || feed.timestamp != tick.timestamp {
                mismatches.push(feed.block_number);
            }
        }
    }
    let summary = ReplaySummary {
        blocks: ledger.height(),
        first_block: view.first_block(),
        last_block: view.last_block(),
        mismatches,
        publisher: status(),
    };
    Ok((summary, ledger))
}

pub fn load_ticks(path: &Path, lenient: bool) -> anyhow::Result<TickStore> {
    let policy = if lenient { GapPolicy::Lenient } else { GapPolicy::Strict };
    TickStore::load(path, policy).with_context(|| format!("loading ticks from {}", path.display()))
}

pub fn walk(walk: &RandomWalk) -> anyhow::Result<TickStore> {
    if walk.seconds == 0 {
        bail!("--seconds must be positive");
    }
    if !(walk.vol.is_finite() && walk.vol >= 0.0) {
        bail!("--vol must be a non-negative number");
    }
    Ok(TickStore::ingest(walk.generate(), GapPolicy::Strict)?)
}
