//! Simulation driver, adversarial fixtures, the settlement sweeper and the
//! scenario runner.

mod attack;
pub mod checks;
mod demo;
mod fixtures;
mod scenario;
mod sim;
mod sweep;

pub use attack::{run_attack, AttackConfig, AttackOutcome, ATTACK_STIPEND};
pub use checks::{brute_force_payout, Check, CheckResult, Snapshot};
pub use demo::{canonical_demo, misuse_demo, random_demo, MisuseReport, DEMO_START};
pub use fixtures::{Fixture, FixtureKind};
pub use scenario::{
    run_scenario, run_scenario_in, run_with_sim, Action, ActionResult, FixtureSpec, Scenario, ScenarioOutcome,
    ScheduledAction, TickSource,
};
pub use sim::{
    FaultSettings, Sim, SimConfig, SimError, CALLBACK_ACCOUNT, HISTORY, MARKET, ORACLE, PUBLISHER, SWEEPER,
};
pub use sweep::{run_sweep, SweepFailure, SweepPlan, SweepReport};
