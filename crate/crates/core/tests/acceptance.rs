//! Acceptance gate. Runs each criterion against its time budget and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use velocity_core::harness::{
    canonical_demo, misuse_demo, random_demo, run_attack, run_scenario, AttackConfig, Check, FaultSettings,
    FixtureKind, Sim, SimConfig, DEMO_START,
};
use velocity_core::ledger::{Address, Amount, Genesis, LogRecord, Transaction, TxStatus, Value};
use velocity_core::market::{compute_payout, MarketConfig, Side};
use velocity_core::pricefeed::{
    monotone_ticks, FaultPlan, Feed, GapPolicy, PriceHistory, PriceHistoryView, PricePoint, PricePublisher,
    Prices, RandomWalk, TickStore,
};

type Outcome = Result<String, String>;
/// Name, time budget, check.
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn payout_oracle() -> Outcome {
    let cfg = MarketConfig::default();
    let r = cfg.margin_points as i128;
    let amount = cfg.entry_deposit.as_wei();
    let lot = cfg.lot_size.as_wei() as i128;
    let k1 = 5 * r;
    let mut n = 0;
    for d in -3 * r..=3 * r {
        // amount + clamp(d * lot, -amount, +amount)
        let long = (amount as i128 + (d * lot).clamp(-(amount as i128), amount as i128)) as u128;
        let short = 2 * amount - long;
        let got = compute_payout(
            cfg.entry_deposit,
            PricePoint::from_points(k1 as u64),
            PricePoint::from_points((k1 + d) as u64),
            cfg.lot_size,
        );
        ensure((got.long.as_wei(), got.short.as_wei()) == (long, short), || {
            format!("d={d}: got {:?}, oracle ({long}, {short})", got)
        })?;
        ensure(got.long.as_wei() + got.short.as_wei() == 2 * amount, || format!("d={d}: not conserved"))?;
        ensure(got.long.as_wei() <= 2 * amount && got.short.as_wei() <= 2 * amount, || format!("d={d}: over cap"))?;
        if d >= r {
            ensure(got.long.as_wei() == 2 * amount, || format!("d={d}: limit up not 2*amount"))?;
        }
        n += 1;
    }
    Ok(format!("{n} price diffs in [-3R, 3R], R={r}"))
}

fn paid_events(log: &str) -> Vec<(Address, Amount)> {
    log.lines()
        .filter_map(|l| match serde_json::from_str::<LogRecord>(l).ok()? {
            LogRecord::Event { name, fields, .. } if name == "optionPaid" => Some((
                fields.get("addr")?.as_address()?,
                fields.get("amount")?.as_amount()?,
            )),
            _ => None,
        })
        .collect()
}

fn end_to_end_demo() -> Outcome {
    let amount = MarketConfig::default().entry_deposit;
    let alice = Address::from_name("alice");
    let market = Address::from_name(velocity_core::harness::MARKET);

    let flat = run_scenario(&canonical_demo(0)).map_err(|e| e.to_string())?;
    ensure(flat.passed(), || format!("flat checks: {:?}", flat.checks))?;
    let paid = paid_events(&flat.log);
    ensure(paid == vec![(alice, amount), (market, amount)], || format!("flat payouts {paid:?}"))?;

    let r = MarketConfig::default().margin_points as i64;
    let up = run_scenario(&canonical_demo(r)).map_err(|e| e.to_string())?;
    ensure(up.passed(), || format!("jump checks: {:?}", up.checks))?;
    let paid = paid_events(&up.log);
    let double = amount.checked_mul(2).unwrap();
    ensure(paid == vec![(alice, double)], || format!("limit-up payouts {paid:?}"))?;
    Ok(format!("flat refunds {amount} each; +R pays long {double}; settled in block {}", up.sweeps[0].block))
}

fn reentrancy_differential() -> Outcome {
    let mut gains = Vec::new();
    for depth in 1..=10 {
        let patched = run_attack(&AttackConfig::new(FixtureKind::ReentrantReceiver { depth }, false))
            .map_err(|e| e.to_string())?;
        ensure(patched.gain == 0 && patched.settled, || {
            format!("patched depth {depth}: gain {} settled {}", patched.gain, patched.settled)
        })?;
        let vulnerable = run_attack(&AttackConfig::new(FixtureKind::ReentrantReceiver { depth }, true))
            .map_err(|e| e.to_string())?;
        ensure(vulnerable.gain > 0, || format!("unpatched depth {depth}: gain {}", vulnerable.gain))?;
        gains.push(vulnerable.gain);
    }
    Ok(format!(
        "patched gain 0 at depths 1-10; unpatched gain {} .. {} wei",
        gains[0],
        gains[gains.len() - 1]
    ))
}

fn price_feed_fidelity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("ticks.csv");
    let walk = RandomWalk {
        seed: 2017,
        start_time: DEMO_START,
        seconds: 1000,
        start: PricePoint::from_points(7_505),
        vol: 0.002,
    };
    velocity_core::pricefeed::write_csv(walk.generate(), std::fs::File::create(&path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let store = Arc::new(TickStore::load(&path, GapPolicy::Strict).map_err(|e| e.to_string())?);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut genesis = Genesis::default().with_account("pricegeth", Amount::ether(10));
    let intruders: Vec<String> = (0..20).map(|i| format!("intruder-{i}")).collect();
    for name in &intruders {
        genesis = genesis.with_account(name, Amount::ether(10));
    }
    let mut ledger =
        velocity_core::ledger::Ledger::new(&genesis, store.first_timestamp()).map_err(|e| e.to_string())?;
    let owner = ledger.resolve("pricegeth").map_err(|e| e.to_string())?;
    let intruders: Vec<Address> = intruders.iter().map(|n| ledger.resolve(n).unwrap()).collect();
    let history = ledger
        .deploy("price-history", Arc::new(PriceHistory), Amount::ZERO, PriceHistory::init(owner))
        .map_err(|e| e.to_string())?;
    let publisher = Arc::new(Mutex::new(PricePublisher::new(store.clone(), history, owner)));
    ledger.add_listener(Box::new(publisher.clone()));

    let mut attempts = 0;
    let mut fuzz_blocks = 0u64;
    while ledger.timestamp_of(ledger.height() + 1) <= store.last_timestamp() {
        let next = ledger.height() + 1;
        let count = 13.min(1000 - attempts);
        let txs: Vec<Transaction> = (0..count)
            .map(|_| {
                let who = intruders[rng.random_range(0..intruders.len())];
                // Mostly plausible writes: the very next block with a real timestamp.
                let block = if rng.random_bool(0.7) { next } else { rng.random_range(0..next + 5) };
                let ts = ledger.timestamp_of(next) - rng.random_range(0..30);
                let p = PricePoint::from_points(rng.random_range(1..1_000_000));
                Transaction::call(who, history, Feed::new(block, ts, Prices::uniform(p)).set_price_call())
            })
            .collect();
        attempts += count;
        if count > 0 {
            fuzz_blocks += 1;
        }
        let (_, receipts) = ledger.produce_block(txs).map_err(|e| e.to_string())?;
        let fuzzed = &receipts[receipts.len() - count..];
        ensure(fuzzed.iter().all(|r| r.status == TxStatus::Reverted), || {
            format!("block {next}: a non-owner setPrice did not revert")
        })?;
    }
    ensure(attempts == 1000, || format!("only {attempts} fuzz attempts"))?;
    // Every non-owner write reverted: count successes by sender.
    let mut intruder_successes = 0;
    for rec in ledger.log().records() {
        if let LogRecord::Tx { tx, status, .. } = rec {
            if tx.sender != owner && status == TxStatus::Success {
                intruder_successes += 1;
            }
        }
    }
    ensure(intruder_successes == 0, || format!("{intruder_successes} non-owner writes succeeded"))?;

    let view = PriceHistoryView::new(&ledger, history);
    let (first, last) = view.range().ok_or("nothing published")?;
    let blocks = last - first + 1;
    ensure((75..=90).contains(&blocks), || format!("{blocks} blocks published"))?;
    for b in first..=last {
        let feed = view.get_price(b).map_err(|e| format!("gap at {b}: {e}"))?;
        let tick = store.price_at(ledger.timestamp_of(b)).map_err(|e| e.to_string())?;
        ensure(feed.usdbtc == tick.prices.usdbtc && feed.prices() == tick.prices, || {
            format!("block {b}: feed {:?} != tick {:?}", feed.prices(), tick.prices)
        })?;
    }
    Ok(format!(
        "{blocks} gapless blocks match the tick file; {attempts} non-owner writes over {fuzz_blocks} blocks all reverted"
    ))
}

fn callback_sim(plan: FaultPlan) -> Result<Sim, String> {
    let mut genesis = Genesis::default();
    for i in 0..10 {
        genesis = genesis.with_account(&format!("trader-{i}"), Amount::ether(10));
    }
    let cfg = SimConfig {
        genesis,
        callback_oracle: true,
        faults: FaultSettings {
            default: plan,
            ..FaultSettings::default()
        },
        ..SimConfig::default()
    };
    let ticks = monotone_ticks(DEMO_START, 2000, PricePoint::from_points(7_505), 1);
    Sim::new(cfg, Arc::new(TickStore::ingest(ticks, GapPolicy::Strict).map_err(|e| e.to_string())?))
        .map_err(|e| e.to_string())
}

fn callback_faults() -> Outcome {
    let deposit = MarketConfig::default().entry_deposit;

    // Drop: nothing settles until the sweeper comes by.
    let mut sim = callback_sim(FaultPlan::DropCallback)?;
    let t0 = sim.account("trader-0").map_err(|e| e.to_string())?;
    sim.step().map_err(|e| e.to_string())?;
    sim.enter(t0, Side::Long, deposit).map_err(|e| e.to_string())?;
    sim.step_until(30).map_err(|e| e.to_string())?;
    ensure(!sim.market_view().option(1).unwrap().closed, || "dropped callback settled".into())?;
    let report = sim.sweep().map_err(|e| e.to_string())?;
    ensure(report.settled == 1 && sim.market_view().option(1).unwrap().closed, || {
        format!("sweep after drop: {report:?}")
    })?;

    // Delay: every delivered price differs from the scheduled block's.
    let mut trials = 0;
    for k in 1..=5 {
        let mut sim = callback_sim(FaultPlan::DelayCallback(k))?;
        sim.step().map_err(|e| e.to_string())?;
        for i in 0..10 {
            let who = sim.account(&format!("trader-{i}")).map_err(|e| e.to_string())?;
            let side = if i % 2 == 0 { Side::Long } else { Side::Short };
            sim.enter(who, side, deposit).map_err(|e| e.to_string())?;
        }
        sim.step_until(40).map_err(|e| e.to_string())?;
        let oracle = sim.oracle().unwrap().lock().unwrap();
        for req in oracle.requests() {
            trials += 1;
            let scheduled = sim
                .store()
                .price_at(sim.ledger().timestamp_of(req.scheduled_block))
                .map_err(|e| e.to_string())?
                .prices
                .btceth;
            let delivered = req.delivered_price.ok_or(format!("request {} never delivered", req.id))?;
            ensure(req.delivery_block == Some(req.scheduled_block + k), || format!("request {} late by wrong amount", req.id))?;
            ensure(delivered != scheduled, || format!("k={k} request {}: same price {delivered}", req.id))?;
        }
    }

    // Underfunded: the callback runs out of gas and pays nothing.
    let mut sim = callback_sim(FaultPlan::UnderfundedCallback(400))?;
    let t0 = sim.account("trader-0").map_err(|e| e.to_string())?;
    sim.step().map_err(|e| e.to_string())?;
    sim.enter(t0, Side::Long, deposit).map_err(|e| e.to_string())?;
    sim.step_until(6).map_err(|e| e.to_string())?;
    let before = sim.ledger().balance(t0);
    let market_before = sim.ledger().balance(sim.market());
    let (_, receipts) = sim.ledger_mut().produce_block(Vec::new()).map_err(|e| e.to_string())?;
    let oog = receipts.iter().filter(|r| r.status == TxStatus::OutOfGas).count();
    ensure(oog == 1, || format!("{oog} out-of-gas receipts"))?;
    ensure(sim.ledger().balance(t0) == before && sim.ledger().balance(sim.market()) == market_before, || {
        "underfunded callback moved funds".into()
    })?;
    ensure(!sim.market_view().option(1).unwrap().closed, || "underfunded callback settled".into())?;
    Ok(format!("drop left option open until sweep; delay differed in {trials}/{trials}; underfunded ended OutOfGas"))
}

fn conservation_and_determinism() -> Outcome {
    let scenario = random_demo(2017, 50);
    let a = run_scenario(&scenario).map_err(|e| e.to_string())?;
    let conservation = a.check(Check::Conservation).ok_or("conservation not evaluated")?;
    ensure(conservation.passed, || conservation.detail.clone())?;
    ensure(a.passed(), || format!("{:?}", a.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>()))?;
    let b = run_scenario(&scenario).map_err(|e| e.to_string())?;
    ensure(a.log.as_bytes() == b.log.as_bytes(), || "logs differ between runs".into())?;
    let entries = a
        .actions
        .iter()
        .filter(|x| x.status == TxStatus::Success && matches!(x.output, Value::Uint(_)))
        .count();
    Ok(format!(
        "{entries} positions, {} blocks conserved, logs identical ({} bytes)",
        a.snapshots.len(),
        a.log.len()
    ))
}

fn misuse() -> Outcome {
    let pool = Amount::ether(2);
    let report = misuse_demo(pool).map_err(|e| e.to_string())?;
    ensure(report.rounds == report.predicted_rounds, || {
        format!("{} rounds, predicted {}", report.rounds, report.predicted_rounds)
    })?;
    ensure(report.free_pool_after < report.entry_deposit, || format!("free pool {}", report.free_pool_after))?;
    Ok(format!(
        "pool {} / deposit {} = {} rounds; free pool left {}",
        report.pool, report.entry_deposit, report.rounds, report.free_pool_after
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("payout oracle equivalence", Duration::from_secs(1), payout_oracle),
        ("end-to-end demo reproduction", Duration::from_secs(5), end_to_end_demo),
        ("reentrancy differential", Duration::from_secs(5), reentrancy_differential),
        ("price-feed fidelity", Duration::from_secs(10), price_feed_fidelity),
        ("callback-oracle fault taxonomy", Duration::from_secs(5), callback_faults),
        ("conservation and determinism", Duration::from_secs(30), conservation_and_determinism),
        ("market-maker misuse", Duration::from_secs(30), misuse),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; over budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
