//! World state, call frames and the execution environment handed to
//! contract code.
//!
//! State changes are journaled so that any frame can be rolled back to the
//! checkpoint taken when it was entered. Reentrancy is allowed; guards are
//! the contracts' business.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Address, Amount, Block, CallData, Event, Fields, GasCosts, GasMeter, OpClass, Value, VmError};

/// Maximum nesting of call frames, the transaction frame included.
pub const MAX_CALL_DEPTH: usize = 64;

/// Contract code. Implementations are stateless: everything mutable lives in
/// the contract's key-value storage, reached through [`Env`].
pub trait Contract: Send + Sync + fmt::Debug {
    /// Short code identifier used in logs and diagnostics.
    fn name(&self) -> &str;

    fn invoke(&self, env: &mut Env<'_>, call: &CallData) -> Result<Value, VmError>;

    /// Runs when value arrives without call data (plain transfers and `send`).
    fn receive(&self, env: &mut Env<'_>) -> Result<(), VmError> {
        let _ = env;
        Ok(())
    }
}

#[derive(Clone, Default)]
pub(crate) struct Account {
    pub(crate) balance: Amount,
    pub(crate) code: Option<Arc<dyn Contract>>,
    pub(crate) storage: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug)]
enum JournalEntry {
    Created(Address),
    Balance(Address, Amount),
    Storage(Address, String, Option<serde_json::Value>),
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Checkpoint {
    journal: usize,
    events: usize,
}

#[derive(Clone, Default)]
pub(crate) struct World {
    pub(crate) accounts: BTreeMap<Address, Account>,
    journal: Vec<JournalEntry>,
    pub(crate) events: Vec<Event>,
}

impl World {
    pub(crate) fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            journal: self.journal.len(),
            events: self.events.len(),
        }
    }

    pub(crate) fn revert_to(&mut self, cp: Checkpoint) {
        while self.journal.len() > cp.journal {
            match self.journal.pop().expect("journal length checked") {
                JournalEntry::Created(addr) => {
                    self.accounts.remove(&addr);
                }
                JournalEntry::Balance(addr, prev) => {
                    if let Some(acct) = self.accounts.get_mut(&addr) {
                        acct.balance = prev;
                    }
                }
                JournalEntry::Storage(addr, key, prev) => {
                    if let Some(acct) = self.accounts.get_mut(&addr) {
                        match prev {
                            Some(v) => {
                                acct.storage.insert(key, v);
                            }
                            None => {
                                acct.storage.remove(&key);
                            }
                        }
                    }
                }
            }
        }
        self.events.truncate(cp.events);
    }

    /// Forgets undo information; called once a transaction is final.
    pub(crate) fn commit(&mut self) {
        self.journal.clear();
    }

    pub(crate) fn balance(&self, addr: &Address) -> Amount {
        self.accounts.get(addr).map(|a| a.balance).unwrap_or_default()
    }

    pub(crate) fn code(&self, addr: &Address) -> Option<Arc<dyn Contract>> {
        self.accounts.get(addr).and_then(|a| a.code.clone())
    }

    fn account_mut(&mut self, addr: Address) -> &mut Account {
        if !self.accounts.contains_key(&addr) {
            self.journal.push(JournalEntry::Created(addr));
        }
        self.accounts.entry(addr).or_default()
    }

    pub(crate) fn set_balance(&mut self, addr: Address, balance: Amount) {
        let acct = self.account_mut(addr);
        let prev = acct.balance;
        acct.balance = balance;
        self.journal.push(JournalEntry::Balance(addr, prev));
    }

    pub(crate) fn transfer(&mut self, from: Address, to: Address, amount: Amount) -> Result<(), VmError> {
        if amount.is_zero() || from == to {
            let have = self.balance(&from);
            if have < amount {
                return Err(VmError::InsufficientBalance { need: amount, have });
            }
            return Ok(());
        }
        let have = self.balance(&from);
        let debited = have
            .checked_sub(amount)
            .map_err(|_| VmError::InsufficientBalance { need: amount, have })?;
        let credited = self.balance(&to).checked_add(amount)?;
        self.set_balance(from, debited);
        self.set_balance(to, credited);
        Ok(())
    }

    pub(crate) fn storage_get(&self, addr: &Address, key: &str) -> Option<&serde_json::Value> {
        self.accounts.get(addr).and_then(|a| a.storage.get(key))
    }

    pub(crate) fn storage_set(&mut self, addr: Address, key: &str, value: Option<serde_json::Value>) {
        let acct = self.account_mut(addr);
        let prev = match value {
            Some(v) => acct.storage.insert(key.to_owned(), v),
            None => acct.storage.remove(key),
        };
        self.journal.push(JournalEntry::Storage(addr, key.to_owned(), prev));
    }

    pub(crate) fn install_code(&mut self, addr: Address, code: Arc<dyn Contract>) {
        self.account_mut(addr).code = Some(code);
    }
}

pub(crate) struct FrameRequest<'d> {
    pub caller: Address,
    pub origin: Address,
    pub target: Address,
    pub value: Amount,
    pub data: Option<&'d CallData>,
    pub gas_limit: u64,
    pub depth: usize,
}

pub(crate) struct FrameOutcome {
    pub result: Result<Value, VmError>,
    pub gas_used: u64,
}

/// Runs one call frame with its own revert scope: value moves to the target
/// before the callee body runs; any error rolls back every mutation the
/// frame (and its children) made.
pub(crate) fn execute_frame(
    world: &mut World,
    costs: &GasCosts,
    block: Block,
    req: FrameRequest<'_>,
) -> FrameOutcome {
    let cp = world.checkpoint();
    let mut gas = GasMeter::new(req.gas_limit);
    let result = run_frame(world, costs, block, &req, &mut gas);
    if let Err(err) = &result {
        if matches!(err, VmError::OutOfGas) {
            gas.exhaust();
        }
        world.revert_to(cp);
    }
    FrameOutcome {
        result,
        gas_used: gas.used(),
    }
}

fn run_frame(
    world: &mut World,
    costs: &GasCosts,
    block: Block,
    req: &FrameRequest<'_>,
    gas: &mut GasMeter,
) -> Result<Value, VmError> {
    world.transfer(req.caller, req.target, req.value)?;
    let Some(code) = world.code(&req.target) else {
        return Ok(Value::Unit);
    };
    let mut env = Env {
        world,
        costs,
        block,
        address: req.target,
        caller: req.caller,
        origin: req.origin,
        value: req.value,
        gas: *gas,
        depth: req.depth,
    };
    let result = match req.data {
        Some(call) => code.invoke(&mut env, call),
        None => code.receive(&mut env).map(|()| Value::Unit),
    };
    *gas = env.gas;
    result
}

/// Execution context of the running contract frame.
pub struct Env<'a> {
    world: &'a mut World,
    costs: &'a GasCosts,
    block: Block,
    address: Address,
    caller: Address,
    origin: Address,
    value: Amount,
    gas: GasMeter,
    depth: usize,
}

impl<'a> Env<'a> {
    /// An unmetered frame used for constructors at genesis.
    pub(crate) fn system(
        world: &'a mut World,
        costs: &'a GasCosts,
        block: Block,
        address: Address,
        caller: Address,
    ) -> Self {
        Env {
            world,
            costs,
            block,
            address,
            caller,
            origin: caller,
            value: Amount::ZERO,
            gas: GasMeter::new(u64::MAX),
            depth: 0,
        }
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn caller(&self) -> Address {
        self.caller
    }

    pub fn origin(&self) -> Address {
        self.origin
    }

    pub fn value(&self) -> Amount {
        self.value
    }

    pub fn block(&self) -> Block {
        self.block
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn gas_remaining(&self) -> u64 {
        self.gas.remaining()
    }

    pub fn gas_used(&self) -> u64 {
        self.gas.used()
    }

    pub fn costs(&self) -> &GasCosts {
        self.costs
    }

    pub fn charge(&mut self, class: OpClass) -> Result<u64, VmError> {
        self.gas.consume(self.costs.cost(class))
    }

    /// Charges `n` compute steps.
    pub fn steps(&mut self, n: u64) -> Result<u64, VmError> {
        let cost = self
            .costs
            .compute_step
            .checked_mul(n)
            .ok_or(VmError::OutOfGas)?;
        self.gas.consume(cost)
    }

    pub fn balance_of(&mut self, addr: Address) -> Result<Amount, VmError> {
        self.charge(OpClass::ComputeStep)?;
        Ok(self.world.balance(&addr))
    }

    pub fn self_balance(&mut self) -> Result<Amount, VmError> {
        self.balance_of(self.address)
    }

    pub fn is_contract(&self, addr: Address) -> bool {
        self.world.code(&addr).is_some()
    }

    pub fn sload<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>, VmError> {
        self.charge(OpClass::StorageRead)?;
        self.world
            .storage_get(&self.address, key)
            .map(|raw| {
                serde_json::from_value(raw.clone())
                    .map_err(|e| VmError::Storage(format!("decode `{key}`: {e}")))
            })
            .transpose()
    }

    pub fn sstore<T: Serialize>(&mut self, key: &str, value: &T) -> Result<(), VmError> {
        self.charge(OpClass::StorageWrite)?;
        let raw = serde_json::to_value(value)
            .map_err(|e| VmError::Storage(format!("encode `{key}`: {e}")))?;
        self.world.storage_set(self.address, key, Some(raw));
        Ok(())
    }

    pub fn sdelete(&mut self, key: &str) -> Result<(), VmError> {
        self.charge(OpClass::StorageWrite)?;
        self.world.storage_set(self.address, key, None);
        Ok(())
    }

    pub fn emit(&mut self, name: &str, fields: Fields) -> Result<(), VmError> {
        self.charge(OpClass::ComputeStep)?;
        self.world.events.push(Event {
            address: self.address,
            name: name.to_owned(),
            fields,
        });
        Ok(())
    }

    /// Throw-style call forwarding all remaining gas. A failing callee has
    /// its frame rolled back and the failure is returned for the caller to
    /// propagate with `?` or inspect.
    pub fn call(&mut self, target: Address, value: Amount, data: CallData) -> Result<Value, VmError> {
        self.charge(OpClass::Call)?;
        let budget = self.gas.remaining();
        self.nested(target, value, Some(&data), budget)
    }

    /// Like [`Env::call`] but with the callee budget capped at `gas`.
    pub fn call_with_gas(
        &mut self,
        target: Address,
        value: Amount,
        data: CallData,
        gas: u64,
    ) -> Result<Value, VmError> {
        self.charge(OpClass::Call)?;
        let budget = gas.min(self.gas.remaining());
        self.nested(target, value, Some(&data), budget)
    }

    /// Plain value transfer that propagates failure.
    pub fn transfer(&mut self, to: Address, amount: Amount) -> Result<(), VmError> {
        self.charge(OpClass::Call)?;
        let budget = self.gas.remaining();
        self.nested(to, amount, None, budget).map(|_| ())
    }

    /// Bool-style transfer. The receive hook of a contract recipient runs
    /// with at most the configured stipend; if the hook fails or runs out of
    /// gas nothing moves and `Ok(false)` is returned. `Err` is reserved for
    /// the sending frame itself running out of gas.
    pub fn send(&mut self, to: Address, amount: Amount) -> Result<bool, VmError> {
        self.charge(OpClass::Call)?;
        let budget = self.costs.send_stipend.min(self.gas.remaining());
        Ok(self.nested(to, amount, None, budget).is_ok())
    }

    fn nested(
        &mut self,
        target: Address,
        value: Amount,
        data: Option<&CallData>,
        budget: u64,
    ) -> Result<Value, VmError> {
        if self.depth + 1 >= MAX_CALL_DEPTH {
            return Err(VmError::CallDepthExceeded);
        }
        let outcome = execute_frame(
            self.world,
            self.costs,
            self.block,
            FrameRequest {
                caller: self.address,
                origin: self.origin,
                target,
                value,
                data,
                gas_limit: budget,
                depth: self.depth + 1,
            },
        );
        self.gas
            .consume(outcome.gas_used)
            .expect("child gas never exceeds the parent's remaining budget");
        outcome.result.map_err(|reason| VmError::CallFailed {
            target,
            reason: Box::new(reason),
        })
    }
}
