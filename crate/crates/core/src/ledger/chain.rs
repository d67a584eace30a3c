use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::de::DeserializeOwned;

use super::log::{EventLog, LogRecord};
use super::vm::{execute_frame, Contract, Env, FrameRequest, World};
use super::{
    Address, Amount, Block, CallData, GasCosts, Genesis, LedgerError, Transaction, TxReceipt, TxStatus, Value,
    VmError,
};

/// Gas far beyond anything a view needs; views are never charged.
const VIEW_GAS: u64 = u64::MAX / 4;

/// Notified after every produced block, once all of its transactions have
/// committed. Returned transactions are queued for the next block.
pub trait BlockListener: Send {
    fn on_block(&mut self, block: &Block, receipts: &[TxReceipt], ledger: &Ledger) -> Vec<Transaction>;
}

impl<L: BlockListener> BlockListener for Arc<Mutex<L>> {
    fn on_block(&mut self, block: &Block, receipts: &[TxReceipt], ledger: &Ledger) -> Vec<Transaction> {
        self.lock()
            .expect("listener mutex poisoned")
            .on_block(block, receipts, ledger)
    }
}

/// The simulated chain. All mutation happens through `&mut self`, so a
/// ledger has exactly one writer at a time.
pub struct Ledger {
    world: World,
    costs: GasCosts,
    block_time: u64,
    miner: Address,
    head: Block,
    sealed: bool,
    genesis_supply: Amount,
    names: BTreeMap<String, Address>,
    mempool: Vec<Transaction>,
    listeners: Vec<Box<dyn BlockListener>>,
    log: EventLog,
}

impl fmt::Debug for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ledger")
            .field("head", &self.head)
            .field("accounts", &self.world.accounts.len())
            .field("mempool", &self.mempool.len())
            .finish()
    }
}

impl Ledger {
    pub fn new(genesis: &Genesis, timestamp: u64) -> Result<Self, LedgerError> {
        let miner = Address::from_name(&genesis.miner);
        let mut ledger = Ledger {
            world: World::default(),
            costs: genesis.gas_costs,
            block_time: genesis.block_time.max(1),
            miner,
            head: Block { number: 0, timestamp },
            sealed: false,
            genesis_supply: Amount::ZERO,
            names: BTreeMap::new(),
            mempool: Vec::new(),
            listeners: Vec::new(),
            log: EventLog::new(),
        };
        ledger.names.insert(genesis.miner.clone(), miner);
        ledger.world.set_balance(miner, Amount::ZERO);
        for acct in &genesis.accounts {
            let addr = ledger.register_name(&acct.name);
            ledger.mint(addr, acct.balance)?;
        }
        ledger.world.commit();
        Ok(ledger)
    }

    /// Ledger whose block 0 carries the genesis file's timestamp (or 0).
    pub fn from_genesis(genesis: &Genesis) -> Result<Self, LedgerError> {
        Self::new(genesis, genesis.timestamp.unwrap_or(0))
    }

    pub fn register_name(&mut self, name: &str) -> Address {
        *self
            .names
            .entry(name.to_owned())
            .or_insert_with(|| Address::from_name(name))
    }

    /// Resolves a named identity or a `0x` address.
    pub fn resolve(&self, name_or_address: &str) -> Result<Address, LedgerError> {
        if let Some(addr) = self.names.get(name_or_address) {
            return Ok(*addr);
        }
        match name_or_address.parse::<Address>() {
            Ok(addr) if self.world.accounts.contains_key(&addr) => Ok(addr),
            _ => Err(LedgerError::UnknownAccount(name_or_address.to_owned())),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, Address)> {
        self.names.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn name_of(&self, addr: Address) -> Option<&str> {
        self.names.iter().find(|(_, a)| **a == addr).map(|(n, _)| n.as_str())
    }

    /// Creates currency. Only allowed before the first block is produced.
    pub fn mint(&mut self, to: Address, amount: Amount) -> Result<(), LedgerError> {
        if self.sealed {
            return Err(LedgerError::GenesisSealed);
        }
        let balance = self.world.balance(&to).checked_add(amount)?;
        self.world.set_balance(to, balance);
        self.world.commit();
        Ok(())
    }

    /// Installs contract code at the address derived from `name`, endows it
    /// with freshly minted currency and runs `init` as its constructor.
    pub fn deploy<F>(
        &mut self,
        name: &str,
        code: Arc<dyn Contract>,
        endowment: Amount,
        init: F,
    ) -> Result<Address, LedgerError>
    where
        F: FnOnce(&mut Env<'_>) -> Result<(), VmError>,
    {
        let addr = Address::from_name(name);
        if self.world.code(&addr).is_some() {
            return Err(LedgerError::AddressInUse(addr));
        }
        self.names.insert(name.to_owned(), addr);
        self.world.install_code(addr, code);
        if !endowment.is_zero() {
            self.mint(addr, endowment)?;
        }
        let mut env = Env::system(&mut self.world, &self.costs, self.head, addr, addr);
        init(&mut env).map_err(LedgerError::Constructor)?;
        self.world.commit();
        Ok(addr)
    }

    pub fn add_listener(&mut self, listener: Box<dyn BlockListener>) {
        self.listeners.push(listener);
    }

    pub fn set_log_sink(&mut self, sink: Option<Box<dyn std::io::Write + Send>>) {
        self.log.set_sink(sink);
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn head(&self) -> Block {
        self.head
    }

    pub fn height(&self) -> u64 {
        self.head.number
    }

    pub fn block_time(&self) -> u64 {
        self.block_time
    }

    /// Timestamp block `number` has (or will have) under the fixed cadence.
    pub fn timestamp_of(&self, number: u64) -> u64 {
        let genesis_ts = self.head.timestamp - self.head.number * self.block_time;
        genesis_ts + number * self.block_time
    }

    pub fn miner(&self) -> Address {
        self.miner
    }

    pub fn gas_costs(&self) -> &GasCosts {
        &self.costs
    }

    pub fn balance(&self, addr: Address) -> Amount {
        self.world.balance(&addr)
    }

    pub fn is_contract(&self, addr: Address) -> bool {
        self.world.code(&addr).is_some()
    }

    pub fn code_name(&self, addr: Address) -> Option<String> {
        self.world.code(&addr).map(|c| c.name().to_owned())
    }

    pub fn has_account(&self, addr: Address) -> bool {
        self.world.accounts.contains_key(&addr)
    }

    /// Every account with its balance, in address order.
    pub fn balances(&self) -> Vec<(Address, Amount)> {
        self.world.accounts.iter().map(|(a, acct)| (*a, acct.balance)).collect()
    }

    pub fn total_supply(&self) -> Amount {
        self.world.accounts.values().map(|a| a.balance).sum()
    }

    /// Supply fixed when the first block was produced.
    pub fn genesis_supply(&self) -> Amount {
        if self.sealed {
            self.genesis_supply
        } else {
            self.total_supply()
        }
    }

    /// Reads and decodes a storage slot without charging gas.
    pub fn storage<T: DeserializeOwned>(&self, addr: Address, key: &str) -> Option<T> {
        self.world
            .storage_get(&addr, key)
            .and_then(|raw| serde_json::from_value(raw.clone()).ok())
    }

    /// Off-chain read-only call: executes with a generous budget and then
    /// discards every effect. Costs nothing.
    pub fn view(&mut self, target: Address, call: &CallData) -> Result<Value, VmError> {
        let cp = self.world.checkpoint();
        let outcome = execute_frame(
            &mut self.world,
            &self.costs,
            self.head,
            FrameRequest {
                caller: Address::ZERO,
                origin: Address::ZERO,
                target,
                value: Amount::ZERO,
                data: Some(call),
                gas_limit: VIEW_GAS,
                depth: 0,
            },
        );
        self.world.revert_to(cp);
        self.world.commit();
        outcome.result
    }

    pub fn submit(&mut self, tx: Transaction) {
        self.mempool.push(tx);
    }

    pub fn pending(&self) -> &[Transaction] {
        &self.mempool
    }

    /// Produces the next block: queued transactions first, then `txs`, each
    /// in its own revert scope. Listeners run after everything committed.
    pub fn produce_block(&mut self, txs: Vec<Transaction>) -> Result<(Block, Vec<TxReceipt>), LedgerError> {
        self.seal_genesis()?;
        let block = Block {
            number: self.head.number + 1,
            timestamp: self.head.timestamp + self.block_time,
        };
        let mut all = std::mem::take(&mut self.mempool);
        all.extend(txs);

        let mut receipts = Vec::with_capacity(all.len());
        for (index, tx) in all.iter().enumerate() {
            receipts.push(self.apply(block, index, tx));
        }
        self.head = block;

        self.log.append(&LogRecord::Block {
            number: block.number,
            timestamp: block.timestamp,
            tx_count: all.len(),
            gas_used: receipts.iter().map(|r| r.gas_used).sum(),
        })?;
        for (tx, receipt) in all.into_iter().zip(&receipts) {
            self.log.append(&LogRecord::Tx {
                block: block.number,
                index: receipt.index,
                tx,
                status: receipt.status,
                gas_used: receipt.gas_used,
                error: receipt.error.clone(),
                output: receipt.output.clone(),
            })?;
            for ev in &receipt.events {
                self.log.append(&LogRecord::event(block.number, receipt.index, ev))?;
            }
        }

        let mut listeners = std::mem::take(&mut self.listeners);
        for listener in listeners.iter_mut() {
            let queued = listener.on_block(&block, &receipts, self);
            self.mempool.extend(queued);
        }
        listeners.append(&mut self.listeners);
        self.listeners = listeners;

        Ok((block, receipts))
    }

    /// Re-executes a recorded block verbatim: whatever listeners queued is
    /// dropped in favour of the recorded transaction list.
    pub fn replay_block(&mut self, txs: Vec<Transaction>) -> Result<(Block, Vec<TxReceipt>), LedgerError> {
        self.mempool.clear();
        self.produce_block(txs)
    }

    fn seal_genesis(&mut self) -> Result<(), LedgerError> {
        if self.sealed {
            return Ok(());
        }
        self.sealed = true;
        self.genesis_supply = self.total_supply();
        self.log.append(&LogRecord::Genesis {
            timestamp: self.head.timestamp,
            block_time: self.block_time,
            miner: self.miner,
            total_supply: self.genesis_supply,
            accounts: self.balances(),
        })
    }

    fn apply(&mut self, block: Block, index: usize, tx: &Transaction) -> TxReceipt {
        let rejected = |msg: &str| TxReceipt {
            block: block.number,
            index,
            status: TxStatus::Reverted,
            gas_used: 0,
            events: Vec::new(),
            error: Some(msg.to_owned()),
            reason: Some(msg.to_owned()),
            output: Value::Unit,
        };
        if tx.gas_limit == 0 {
            return rejected("gas limit must be positive");
        }
        let Ok(prepay) = tx.gas_price.checked_mul(tx.gas_limit as u128) else {
            return rejected("gas prepayment overflows");
        };
        let sender_balance = self.world.balance(&tx.sender);
        let Ok(after_prepay) = sender_balance.checked_sub(prepay) else {
            return rejected("insufficient funds for gas");
        };
        self.world.set_balance(tx.sender, after_prepay);
        self.world.commit();

        let intrinsic = self.costs.call;
        let (result, gas_used) = if tx.gas_limit < intrinsic {
            (Err(VmError::OutOfGas), tx.gas_limit)
        } else {
            let outcome = execute_frame(
                &mut self.world,
                &self.costs,
                block,
                FrameRequest {
                    caller: tx.sender,
                    origin: tx.sender,
                    target: tx.target,
                    value: tx.value,
                    data: tx.call.as_ref(),
                    gas_limit: tx.gas_limit - intrinsic,
                    depth: 0,
                },
            );
            (outcome.result, intrinsic + outcome.gas_used)
        };

        let fee = tx.gas_price.checked_mul(gas_used as u128).expect("fee bounded by prepay");
        let refund = prepay.checked_sub(fee).expect("gas used never exceeds the limit");
        let sender_balance = self.world.balance(&tx.sender);
        self.world.set_balance(
            tx.sender,
            sender_balance.checked_add(refund).expect("refund restores at most the prepay"),
        );
        let miner_balance = self.world.balance(&self.miner);
        self.world.set_balance(
            self.miner,
            miner_balance.checked_add(fee).expect("fee came out of the sender"),
        );
        self.world.commit();

        let events = std::mem::take(&mut self.world.events);
        match result {
            Ok(output) => TxReceipt {
                block: block.number,
                index,
                status: TxStatus::Success,
                gas_used,
                events,
                error: None,
                reason: None,
                output,
            },
            Err(err) => TxReceipt {
                block: block.number,
                index,
                status: if matches!(err.root(), VmError::OutOfGas) {
                    TxStatus::OutOfGas
                } else {
                    TxStatus::Reverted
                },
                gas_used,
                events: Vec::new(),
                error: Some(err.to_string()),
                reason: err.reason().map(str::to_owned),
                output: Value::Unit,
            },
        }
    }
}
