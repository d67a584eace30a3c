use std::sync::Arc;

use proptest::prelude::*;
use velocity_core::harness::{Fixture, FixtureKind, Sim, SimConfig, DEMO_START};
use velocity_core::ledger::{Amount, CallData, Genesis, Transaction, TxStatus, Value, DEFAULT_GAS_PRICE};
use velocity_core::market::{calls, compute_payout, MarketConfig, Side, INVALID_MARGIN};
use velocity_core::pricefeed::{flat_ticks, step_ticks, GapPolicy, PricePoint, TickStore};

const START: PricePoint = PricePoint::from_points(7_505);

/// amount + clamp(d * lot, -amount, +amount), written out with signed ints.
fn oracle(amount: u128, d: i128, lot: u128) -> (u128, u128) {
    let a = amount as i128;
    let moved = (d * lot as i128).clamp(-a, a);
    let long = (a + moved) as u128;
    (long, 2 * amount - long)
}

fn point(x: i128) -> PricePoint {
    PricePoint::from_points(x as u64)
}

#[test]
fn payout_matches_oracle_over_three_collars() {
    let cfg = MarketConfig::default();
    let r = cfg.margin_points as i128;
    let amount = cfg.entry_deposit;
    let k1 = 10 * r;
    for d in -3 * r..=3 * r {
        let out = compute_payout(amount, point(k1), point(k1 + d), cfg.lot_size);
        let (long, short) = oracle(amount.as_wei(), d, cfg.lot_size.as_wei());
        assert_eq!((out.long.as_wei(), out.short.as_wei()), (long, short), "d={d}");
        assert_eq!(out.long.as_wei() + out.short.as_wei(), 2 * amount.as_wei());
        assert!(out.long.as_wei() <= 2 * amount.as_wei() && out.short.as_wei() <= 2 * amount.as_wei());
        if d >= r {
            assert_eq!(out.long.as_wei(), 2 * amount.as_wei());
        }
        if d <= -r {
            assert_eq!(out.short.as_wei(), 2 * amount.as_wei());
        }
    }
}

proptest! {
    #[test]
    fn payouts_conserve_and_cap(
        amount in 1u128..1_000_000_000_000_000_000,
        lot in 1u128..1_000_000_000_000_000,
        start in 1u64..10_000_000,
        end in 1u64..10_000_000,
    ) {
        let out = compute_payout(Amount::wei(amount), PricePoint::from_points(start), PricePoint::from_points(end), Amount::wei(lot));
        prop_assert_eq!(out.long.as_wei() + out.short.as_wei(), 2 * amount);
        prop_assert!(out.long.as_wei() <= 2 * amount);
        prop_assert!(out.short.as_wei() <= 2 * amount);
        let (l, s) = oracle(amount, end as i128 - start as i128, lot);
        prop_assert_eq!((out.long.as_wei(), out.short.as_wei()), (l, s));
    }

    #[test]
    fn linear_inside_the_collar(d in -99i64..=99, start in 200u64..1_000_000) {
        let cfg = MarketConfig::default();
        let out = compute_payout(cfg.entry_deposit, PricePoint::from_points(start), PricePoint::from_points((start as i64 + d) as u64), cfg.lot_size);
        prop_assert_eq!(out.long.as_wei() as i128 - cfg.entry_deposit.as_wei() as i128, d as i128 * cfg.lot_size.as_wei() as i128);
    }

    #[test]
    fn monotone_in_end_price(start in 1u64..100_000, a in 1u64..100_000, b in 1u64..100_000) {
        let cfg = MarketConfig::default();
        let (lo, hi) = (a.min(b), a.max(b));
        let p = |e| compute_payout(cfg.entry_deposit, PricePoint::from_points(start), PricePoint::from_points(e), cfg.lot_size);
        prop_assert!(p(lo).long <= p(hi).long);
        prop_assert!(p(lo).short >= p(hi).short);
    }
}

fn sim_with(ticks: Vec<velocity_core::pricefeed::Tick>, pool: Amount) -> Sim {
    let cfg = SimConfig {
        genesis: Genesis::default()
            .with_account("alice", Amount::ether(10))
            .with_account("bob", Amount::ether(10)),
        pool,
        ..SimConfig::default()
    };
    Sim::new(cfg, Arc::new(TickStore::ingest(ticks, GapPolicy::Strict).unwrap())).unwrap()
}

fn flat_sim() -> Sim {
    sim_with(flat_ticks(DEMO_START, 600, START), Amount::ether(10))
}

fn deposit() -> Amount {
    MarketConfig::default().entry_deposit
}

fn gas_cost(gas: u64) -> Amount {
    DEFAULT_GAS_PRICE.checked_mul(gas as u128).unwrap()
}

#[test]
fn go_long_creates_an_option() {
    let mut sim = flat_sim();
    let alice = sim.account("alice").unwrap();
    sim.step().unwrap();
    let r = sim.enter(alice, Side::Long, deposit()).unwrap();
    assert_eq!(r.status, TxStatus::Success, "{:?}", r.reason);
    assert_eq!(r.output, Value::Uint(1));
    let ev: Vec<_> = r.events_named("LongOption").collect();
    assert_eq!(ev.len(), 1);
    assert_eq!(ev[0].uint("optionId"), Some(1));
    assert_eq!(ev[0].address_field("sender"), Some(alice));
    assert_eq!(ev[0].amount("amount"), Some(deposit()));
    assert_eq!(ev[0].uint("blockNumber"), Some(2));

    let view = sim.market_view();
    let opt = view.option(1).unwrap();
    assert_eq!((opt.long, opt.short), (alice, sim.market()));
    assert_eq!((opt.start_block, opt.expiry_block, opt.price_block), (2, 7, 1));
    assert_eq!(opt.start_price, START);
    assert!(!opt.closed);
    assert_eq!(view.locked(), deposit());
    assert_eq!(view.last_option_id(), 1);
}

#[test]
fn go_short_mirrors() {
    let mut sim = flat_sim();
    let bob = sim.account("bob").unwrap();
    sim.step().unwrap();
    let r = sim.enter(bob, Side::Short, deposit()).unwrap();
    assert_eq!(r.events_named("ShortOption").count(), 1);
    let opt = sim.market_view().option(1).unwrap();
    assert_eq!((opt.long, opt.short), (sim.market(), bob));
}

#[test]
fn wrong_margin_is_refunded() {
    let mut sim = flat_sim();
    let alice = sim.account("alice").unwrap();
    sim.step().unwrap();
    let before = sim.ledger().balance(alice);
    let pool = sim.ledger().balance(sim.market());
    let r = sim.enter(alice, Side::Long, Amount::milli_ether(90)).unwrap();
    assert_eq!(r.status, TxStatus::Success);
    assert_eq!(r.output, Value::Unit);
    let errors: Vec<_> = r.events_named("Error").collect();
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0].field("message"), Some(&Value::Text(INVALID_MARGIN.into())));
    assert_eq!(sim.ledger().balance(alice), before.checked_sub(gas_cost(r.gas_used)).unwrap());
    assert_eq!(sim.ledger().balance(sim.market()), pool);
    assert_eq!(sim.market_view().last_option_id(), 0);
}

#[test]
fn thin_pool_refuses_entry() {
    let mut sim = sim_with(flat_ticks(DEMO_START, 600, START), Amount::milli_ether(150));
    let alice = sim.account("alice").unwrap();
    let bob = sim.account("bob").unwrap();
    sim.step().unwrap();
    assert!(sim.enter(alice, Side::Long, deposit()).unwrap().is_success());
    // 0.15 held, 0.1 + 0.1 committed: 0.05 free
    let before = sim.ledger().balance(bob);
    let r = sim.enter(bob, Side::Long, deposit()).unwrap();
    assert_eq!(r.status, TxStatus::Reverted);
    assert_eq!(sim.ledger().balance(bob), before.checked_sub(gas_cost(r.gas_used)).unwrap());
    assert_eq!(sim.market_view().last_option_id(), 1);
}

#[test]
fn no_entry_before_the_first_price() {
    let mut sim = flat_sim();
    let alice = sim.account("alice").unwrap();
    // block 1: no feed for block 0 exists
    let r = sim.enter(alice, Side::Long, deposit()).unwrap();
    assert_eq!(r.status, TxStatus::Reverted);
}

fn settle_flat_case() -> (Sim, u64) {
    let mut sim = flat_sim();
    let alice = sim.account("alice").unwrap();
    sim.step().unwrap();
    sim.enter(alice, Side::Long, deposit()).unwrap();
    sim.step_until(7).unwrap();
    (sim, 1)
}

#[test]
fn flat_settlement_refunds_both_sides() {
    let (mut sim, id) = settle_flat_case();
    let alice = sim.account("alice").unwrap();
    let bob = sim.account("bob").unwrap();
    let before = sim.ledger().balance(alice);
    let r = sim.exercise(bob, Some(id)).unwrap();
    assert_eq!(r.status, TxStatus::Success, "{:?}", r.reason);
    let paid: Vec<_> = r.events_named("optionPaid").map(|e| (e.address_field("addr").unwrap(), e.amount("amount").unwrap())).collect();
    assert_eq!(paid, vec![(alice, deposit()), (sim.market(), deposit())]);
    assert_eq!(sim.ledger().balance(alice), before.checked_add(deposit()).unwrap());
    assert_eq!(sim.market_view().locked(), Amount::ZERO);
    assert!(sim.market_view().option(id).unwrap().closed);

    let again = sim.exercise(bob, Some(id)).unwrap();
    assert_eq!(again.status, TxStatus::Reverted);
    assert_eq!(again.events.len(), 0);
    assert_eq!(sim.ledger().balance(alice), before.checked_add(deposit()).unwrap());
}

#[test]
fn exercise_waits_for_expiry_and_its_price() {
    let mut sim = flat_sim();
    let alice = sim.account("alice").unwrap();
    sim.step().unwrap();
    sim.enter(alice, Side::Long, deposit()).unwrap();
    sim.step_until(5).unwrap();
    // block 6 < expiry 7
    assert_eq!(sim.exercise(alice, Some(1)).unwrap().status, TxStatus::Reverted);
    // Inside block 7 the price for block 7 is not yet published.
    assert_eq!(sim.exercise(alice, Some(1)).unwrap().status, TxStatus::Reverted);
    assert!(!sim.market_view().option(1).unwrap().closed);
    assert_eq!(sim.exercise(alice, Some(1)).unwrap().status, TxStatus::Success);
}

#[test]
fn limit_up_pays_long_everything_and_skips_the_empty_leg() {
    let ticks = step_ticks(DEMO_START, 600, START, DEMO_START + 48, 100);
    let mut sim = sim_with(ticks, Amount::ether(10));
    let alice = sim.account("alice").unwrap();
    sim.step().unwrap();
    sim.enter(alice, Side::Long, deposit()).unwrap();
    sim.step_until(7).unwrap();
    let market_before = sim.ledger().balance(sim.market());
    let r = sim.exercise(alice, None).unwrap();
    assert!(r.is_success(), "{:?}", r.reason);
    let paid: Vec<_> = r.events_named("optionPaid").map(|e| (e.address_field("addr").unwrap(), e.amount("amount").unwrap())).collect();
    assert_eq!(paid, vec![(alice, deposit().checked_mul(2).unwrap())]);
    assert_eq!(
        sim.ledger().balance(sim.market()),
        market_before.checked_sub(deposit().checked_mul(2).unwrap()).unwrap()
    );
}

#[test]
fn find_option_id_picks_the_oldest_expired() {
    let mut sim = flat_sim();
    let alice = sim.account("alice").unwrap();
    let bob = sim.account("bob").unwrap();
    sim.step().unwrap();
    let txs = vec![
        sim.entry_tx(bob, Side::Long, deposit()),
        sim.entry_tx(alice, Side::Short, deposit()),
        sim.entry_tx(alice, Side::Long, deposit()),
    ];
    sim.execute(txs).unwrap();
    sim.step().unwrap();
    sim.enter(alice, Side::Long, deposit()).unwrap(); // id 4, expires at 9
    sim.step_until(7).unwrap();

    let market = sim.market();
    let found = sim.ledger_mut().view(market, &calls::find_option_id(alice));
    assert_eq!(found.unwrap(), Value::Uint(2));
    // Scanning oracle over the stored book.
    let height = sim.height();
    let expected = sim.market_view().options().filter(|o| !o.closed && o.is_expired(height) && o.is_party(alice)).map(|o| o.id).min();
    assert_eq!(expected, Some(2));

    let r = sim.exercise(alice, None).unwrap();
    assert!(r.is_success());
    assert!(sim.market_view().option(2).unwrap().closed);
    assert!(!sim.market_view().option(3).unwrap().closed);
    let r = sim.exercise(alice, None).unwrap();
    assert!(r.is_success());
    assert!(sim.market_view().option(3).unwrap().closed);
}

#[test]
fn find_option_id_without_expired_reverts() {
    let mut sim = flat_sim();
    let alice = sim.account("alice").unwrap();
    sim.step().unwrap();
    sim.enter(alice, Side::Long, deposit()).unwrap();
    sim.step().unwrap();
    let market = sim.market();
    assert!(sim.ledger_mut().view(market, &calls::find_option_id(alice)).is_err());
    assert_eq!(sim.exercise(alice, None).unwrap().status, TxStatus::Reverted);
}

#[test]
fn throwing_recipient_reverts_the_whole_settlement() {
    let mut sim = flat_sim();
    let alice = sim.account("alice").unwrap();
    let market = sim.market();
    let fixture = sim
        .ledger_mut()
        .deploy("thrower", Arc::new(Fixture::new(FixtureKind::ThrowingReceiver)), Amount::ether(1), Fixture::init(market))
        .unwrap();
    sim.step().unwrap();
    let enter = Transaction::call(alice, fixture, CallData::new("enter", vec!["long".into(), deposit().into()]));
    let (_, r) = sim.execute(vec![enter]).unwrap();
    assert_eq!(r[0].output, Value::Uint(1));
    sim.step_until(7).unwrap();
    let locked = sim.market_view().locked();
    let r = sim.exercise(alice, Some(1)).unwrap();
    assert_eq!(r.status, TxStatus::Reverted);
    assert!(r.reason.as_deref().unwrap().contains("payout"), "{:?}", r.reason);
    assert!(!sim.market_view().option(1).unwrap().closed);
    assert_eq!(sim.market_view().locked(), locked);
}

#[test]
fn invalid_config_cannot_be_deployed() {
    let cfg = SimConfig {
        market: MarketConfig {
            entry_deposit: Amount::milli_ether(90),
            ..MarketConfig::default()
        },
        ..SimConfig::default()
    };
    let store = Arc::new(TickStore::ingest(flat_ticks(DEMO_START, 60, START), GapPolicy::Strict).unwrap());
    assert!(Sim::new(cfg, store).is_err());
}
