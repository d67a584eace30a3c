//! Deterministic simulation of a fully collateralized collared-option
//! market running on a miniature block ledger.
//!
//! * [`ledger`] is the substrate: accounts, gas, nested calls, revert.
//! * [`pricefeed`] publishes per-block prices on chain and models a
//!   callback oracle with injectable faults.
//! * [`market`] is the option contract and its pure payout rule.
//! * [`harness`] holds attack fixtures, the settlement sweeper and the
//!   scenario runner.

pub mod harness;
pub mod ledger;
pub mod market;
pub mod pricefeed;
