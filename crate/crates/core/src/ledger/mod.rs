//! Deterministic block ledger: accounts, value transfer, gas metering,
//! nested contract calls and all-or-nothing transaction revert.

mod address;
mod amount;
mod chain;
mod event;
mod gas;
mod genesis;
mod log;
mod value;
mod vm;

use serde::{Deserialize, Serialize};

pub use address::{Address, ParseAddressError};
pub use amount::{Amount, AmountError, WEI_PER_ETHER};
pub use chain::{BlockListener, Ledger};
pub use event::{Event, Fields};
pub use gas::{GasCosts, GasMeter, OpClass};
pub use genesis::{Genesis, GenesisAccount};
pub use log::{EventLog, LogRecord};
pub use value::{CallData, Value};
pub use vm::{Contract, Env, MAX_CALL_DEPTH};

/// Default gas limit for transactions built with the helpers below.
pub const DEFAULT_GAS_LIMIT: u64 = 1_000_000;
/// Default gas price: 1 gwei.
pub const DEFAULT_GAS_PRICE: Amount = Amount::wei(1_000_000_000);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Block {
    pub number: u64,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub target: Address,
    pub value: Amount,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub call: Option<CallData>,
    pub gas_limit: u64,
    pub gas_price: Amount,
}

impl Transaction {
    pub fn transfer(sender: Address, target: Address, value: Amount) -> Self {
        Transaction {
            sender,
            target,
            value,
            call: None,
            gas_limit: DEFAULT_GAS_LIMIT,
            gas_price: DEFAULT_GAS_PRICE,
        }
    }

    pub fn call(sender: Address, target: Address, call: CallData) -> Self {
        Transaction {
            sender,
            target,
            value: Amount::ZERO,
            call: Some(call),
            gas_limit: DEFAULT_GAS_LIMIT,
            gas_price: DEFAULT_GAS_PRICE,
        }
    }

    pub fn with_value(mut self, value: Amount) -> Self {
        self.value = value;
        self
    }

    pub fn with_gas(mut self, gas_limit: u64, gas_price: Amount) -> Self {
        self.gas_limit = gas_limit;
        self.gas_price = gas_price;
        self
    }

    pub fn method(&self) -> Option<&str> {
        self.call.as_ref().map(|c| c.method.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxStatus {
    Success,
    Reverted,
    OutOfGas,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxReceipt {
    pub block: u64,
    pub index: usize,
    pub status: TxStatus,
    pub gas_used: u64,
    pub events: Vec<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub output: Value,
}

impl TxReceipt {
    pub fn is_success(&self) -> bool {
        self.status == TxStatus::Success
    }

    pub fn events_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events.iter().filter(move |e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VmError {
    #[error("out of gas")]
    OutOfGas,
    #[error("revert: {0}")]
    Revert(String),
    #[error("insufficient balance: need {need}, have {have}")]
    InsufficientBalance { need: Amount, have: Amount },
    #[error("call to {target} failed: {reason}")]
    CallFailed { target: Address, reason: Box<VmError> },
    #[error("call depth exceeded")]
    CallDepthExceeded,
    #[error(transparent)]
    Amount(#[from] AmountError),
    #[error("storage: {0}")]
    Storage(String),
}

impl VmError {
    pub fn revert(msg: impl Into<String>) -> Self {
        VmError::Revert(msg.into())
    }

    /// The innermost failure behind a chain of failed calls.
    pub fn root(&self) -> &VmError {
        match self {
            VmError::CallFailed { reason, .. } => reason.root(),
            other => other,
        }
    }

    /// Revert message of the innermost failure, when it is an explicit revert.
    pub fn reason(&self) -> Option<&str> {
        match self.root() {
            VmError::Revert(msg) => Some(msg),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("genesis already sealed; currency can only be minted before the first block")]
    GenesisSealed,
    #[error("address {0} already in use")]
    AddressInUse(Address),
    #[error("unknown account `{0}`")]
    UnknownAccount(String),
    #[error("constructor failed: {0}")]
    Constructor(VmError),
    #[error(transparent)]
    Amount(#[from] AmountError),
    #[error("event log: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
