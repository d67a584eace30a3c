//! Hostile payout recipients. Each fixture is a contract that enters the
//! market with its own funds and settles through the market like any
//! trader, but reacts to incoming payments according to its kind.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ledger::{Address, Amount, CallData, Contract, Env, Value, VmError};
use crate::market::{calls, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    /// Calls `exercise` again from its receive hook, up to `depth` times.
    ReentrantReceiver { depth: u32 },
    /// Receive hook always throws.
    ThrowingReceiver,
    /// Receive hook burns `cost` compute steps.
    GasHog { cost: u64 },
}

impl FixtureKind {
    pub fn label(&self) -> &'static str {
        match self {
            FixtureKind::ReentrantReceiver { .. } => "reentrant",
            FixtureKind::ThrowingReceiver => "throwing",
            FixtureKind::GasHog { .. } => "gashog",
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixtureKind::ReentrantReceiver { depth } => write!(f, "reentrant(depth={depth})"),
            FixtureKind::ThrowingReceiver => f.write_str("throwing"),
            FixtureKind::GasHog { cost } => write!(f, "gashog(cost={cost})"),
        }
    }
}

impl FromStr for FixtureKind {
    type Err = String;

    /// `reentrant`, `reentrant:4`, `throwing`, `gashog`, `gashog:5000`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |default: u64| -> Result<u64, String> {
            arg.map_or(Ok(default), |a| a.parse().map_err(|_| format!("bad fixture argument `{a}`")))
        };
        match name {
            "reentrant" => Ok(FixtureKind::ReentrantReceiver { depth: num(1)? as u32 }),
            "throwing" => Ok(FixtureKind::ThrowingReceiver),
            "gashog" => Ok(FixtureKind::GasHog { cost: num(1_000)? }),
            other => Err(format!("unknown fixture `{other}`")),
        }
    }
}

const MARKET: &str = "market";
const OPTION: &str = "optionId";
const REENTRIES: &str = "reentries";
const TRACE: &str = "trace";

/// Fixture contract.
///
/// * `enter(side, amount)`: opens a position paying `amount` from its own
///   balance and remembers the option id.
/// * `exercise(id)`: settles through the market, propagating failure.
/// * `trace()`: what the receive hook saw.
#[derive(Debug, Clone)]
pub struct Fixture {
    kind: FixtureKind,
}

impl Fixture {
    pub fn new(kind: FixtureKind) -> Self {
        Fixture { kind }
    }

    pub fn init(market: Address) -> impl FnOnce(&mut Env<'_>) -> Result<(), VmError> {
        move |env| env.sstore(MARKET, &market)
    }

    fn market(env: &mut Env<'_>) -> Result<Address, VmError> {
        env.sload(MARKET)?.ok_or_else(|| VmError::Storage("fixture has no market".into()))
    }
}

impl Contract for Fixture {
    fn name(&self) -> &str {
        self.kind.label()
    }

    fn invoke(&self, env: &mut Env<'_>, call: &CallData) -> Result<Value, VmError> {
        let market = Self::market(env)?;
        match call.method.as_str() {
            "enter" => {
                let side = match call.text(0)? {
                    "long" => Side::Long,
                    "short" => Side::Short,
                    other => return Err(VmError::revert(format!("bad side {other}"))),
                };
                let amount = call.amount(1)?;
                let out = env.call(market, amount, calls::enter(side))?;
                if let Some(id) = out.as_uint() {
                    env.sstore(OPTION, &id)?;
                }
                Ok(out)
            }
            "exercise" => env.call(market, Amount::ZERO, calls::exercise(call.uint(0)?)),
            "trace" => {
                let trace: Vec<String> = env.sload(TRACE)?.unwrap_or_default();
                Ok(Value::List(trace.into_iter().map(Value::Text).collect()))
            }
            other => Err(VmError::revert(format!("fixture: unknown method {other}"))),
        }
    }

    fn receive(&self, env: &mut Env<'_>) -> Result<(), VmError> {
        match self.kind {
            FixtureKind::ThrowingReceiver => Err(VmError::revert("receiver refuses payment")),
            FixtureKind::GasHog { cost } => {
                env.steps(cost)?;
                Ok(())
            }
            FixtureKind::ReentrantReceiver { depth } => {
                // Refunds and payments before the option exists are accepted quietly.
                let Some(id) = env.sload::<u64>(OPTION)? else {
                    return Ok(());
                };
                let done: u32 = env.sload(REENTRIES)?.unwrap_or(0);
                let mut trace: Vec<String> = env.sload(TRACE)?.unwrap_or_default();
                if done >= depth {
                    trace.push(format!("received {} (depth reached)", env.value()));
                    return env.sstore(TRACE, &trace);
                }
                env.sstore(REENTRIES, &(done + 1))?;
                let market = Self::market(env)?;
                let outcome = env.call(market, Amount::ZERO, calls::exercise(id));
                // Re-read: nested hooks append their own lines meanwhile.
                let mut trace: Vec<String> = env.sload(TRACE)?.unwrap_or(trace);
                trace.push(match outcome {
                    Ok(_) => format!("received {}, reentry {} paid", env.value(), done + 1),
                    Err(e) => format!(
                        "received {}, reentry {} refused: {}",
                        env.value(),
                        done + 1,
                        e.reason().unwrap_or("failed")
                    ),
                });
                env.sstore(TRACE, &trace)
            }
        }
    }
}
