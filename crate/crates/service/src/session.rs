//! The single-writer session thread. It owns the simulation, applies
//! commands in arrival order and publishes an immutable snapshot after
//! every block.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, LineWriter, Write};
use std::path::Path;
use std::sync::{mpsc, Arc};
use std::thread::JoinHandle;
use std::time::Instant;

use serde::Serialize;
use tokio::sync::{broadcast, oneshot, watch};
use velocity_core::harness::{Sim, SimError, SweepReport};
use velocity_core::ledger::{Address, Amount, LogRecord, Transaction, TxReceipt};
use velocity_core::market::{MarketConfig, OptionContract, Payout, Side, INSUFFICIENT_POOL, INVALID_MARGIN};
use velocity_core::pricefeed::{Feed, Pair, PricePoint, PublisherStatus};

use crate::config::{Config, Mode};
use crate::error::ApiError;

/// Upper bound for a single `step` command.
pub const MAX_STEP: u64 = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("ticks: {0}")]
    Ticks(#[from] velocity_core::pricefeed::TickError),
    #[error("event log {path}: {message}")]
    Log { path: String, message: String },
    #[error("session thread exited during start-up")]
    Startup,
}

#[derive(Debug, Clone, Serialize)]
pub struct AccountInfo {
    pub name: String,
    pub address: Address,
    pub balance: Amount,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarketInfo {
    pub address: Address,
    pub balance: Amount,
    pub locked: Amount,
    pub free_pool: Amount,
    pub last_option_id: u64,
    pub config: MarketConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Settlement {
    pub block: u64,
    pub long: Amount,
    pub short: Amount,
}

/// Payout at the latest published price. Never binding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Preview {
    pub binding: bool,
    pub price: PricePoint,
    pub price_block: u64,
    pub long: Amount,
    pub short: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OptionRecord {
    pub option_id: u64,
    pub side: Side,
    pub trader: Address,
    pub trader_name: Option<String>,
    pub long: Address,
    pub short: Address,
    pub amount: Amount,
    pub start_block: u64,
    pub expiry_block: u64,
    pub start_price: PricePoint,
    pub price_block: u64,
    pub state: &'static str,
    pub blocks_remaining: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preview: Option<Preview>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settlement: Option<Settlement>,
}

impl OptionRecord {
    pub fn is_open(&self) -> bool {
        self.state == "open"
    }
}

/// Read-side view of the session at a block boundary.
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub height: u64,
    pub timestamp: u64,
    pub mode: Mode,
    pub pair: Pair,
    pub first_price_block: Option<u64>,
    pub last_price_block: Option<u64>,
    pub publisher: PublisherStatus,
    pub market: MarketInfo,
    pub accounts: Vec<AccountInfo>,
    #[serde(skip)]
    pub feeds: Arc<Vec<Feed>>,
    #[serde(skip)]
    pub options: Arc<Vec<OptionRecord>>,
}

impl Snapshot {
    pub fn feed(&self, block: u64) -> Option<&Feed> {
        let first = self.first_price_block?;
        self.feeds.get(block.checked_sub(first)? as usize)
    }

    pub fn option(&self, id: u64) -> Option<&OptionRecord> {
        self.options.get(id.checked_sub(1)? as usize)
    }

    pub fn account(&self, name_or_address: &str) -> Option<&AccountInfo> {
        self.accounts
            .iter()
            .find(|a| a.name == name_or_address || a.address.to_string() == name_or_address)
    }
}

/// Pushed to `/events` subscribers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServiceEvent {
    Block {
        number: u64,
        timestamp: u64,
        tx_count: usize,
    },
    Price {
        feed: Feed,
        price: PricePoint,
    },
    Position {
        option_id: u64,
        side: Side,
        trader: Address,
        amount: Amount,
        block: u64,
    },
    Settlement {
        option_id: u64,
        block: u64,
        long: Amount,
        short: Amount,
    },
}

impl ServiceEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceEvent::Block { .. } => "block",
            ServiceEvent::Price { .. } => "price",
            ServiceEvent::Position { .. } => "position",
            ServiceEvent::Settlement { .. } => "settlement",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PositionAccepted {
    pub option_id: u64,
    pub block: u64,
    pub option: OptionRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepReport {
    pub from: u64,
    pub to: u64,
}

pub type Reply<T> = oneshot::Sender<Result<T, ApiError>>;

pub enum Command {
    Position {
        account: String,
        side: Side,
        deposit: Amount,
        reply: Reply<PositionAccepted>,
    },
    Step {
        blocks: u64,
        reply: Reply<StepReport>,
    },
    Sweep {
        reply: Reply<SweepReport>,
    },
    Shutdown,
}

/// Handle to a running session thread.
pub struct Session {
    commands: mpsc::Sender<Command>,
    snapshots: watch::Receiver<Arc<Snapshot>>,
    events: broadcast::Sender<ServiceEvent>,
    thread: Option<JoinHandle<()>>,
}

impl Session {
    pub fn start(config: Config) -> Result<Self, SessionError> {
        let (commands, rx) = mpsc::channel();
        let (events, _) = broadcast::channel(1024);
        let (ready_tx, ready_rx) = mpsc::channel();
        let events_out = events.clone();
        let thread = std::thread::Builder::new()
            .name("velocity-session".into())
            .spawn(move || {
                let mut worker = match Worker::open(config, events_out) {
                    Ok(w) => w,
                    Err(e) => {
                        let _ = ready_tx.send(Err(e));
                        return;
                    }
                };
                let (snap_tx, snap_rx) = watch::channel(Arc::new(worker.snapshot()));
                worker.snapshots = Some(snap_tx);
                if ready_tx.send(Ok(snap_rx)).is_err() {
                    return;
                }
                worker.run(rx);
            })
            .map_err(|_| SessionError::Startup)?;
        let snapshots = ready_rx.recv().map_err(|_| SessionError::Startup)??;
        Ok(Session {
            commands,
            snapshots,
            events,
            thread: Some(thread),
        })
    }

    pub fn commands(&self) -> mpsc::Sender<Command> {
        self.commands.clone()
    }

    pub fn snapshots(&self) -> watch::Receiver<Arc<Snapshot>> {
        self.snapshots.clone()
    }

    pub fn events(&self) -> broadcast::Sender<ServiceEvent> {
        self.events.clone()
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshots.borrow().clone()
    }

    /// Stops the thread after the commands already queued.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        let _ = self.commands.send(Command::Shutdown);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.stop();
    }
}

struct Worker {
    config: Config,
    sim: Sim,
    accounts: Vec<(String, Address)>,
    names: BTreeMap<Address, String>,
    /// Next unread line of the ledger log.
    cursor: usize,
    feeds: Arc<Vec<Feed>>,
    /// `optionPaid` legs per option.
    paid: BTreeMap<u64, Vec<(u64, Address, Amount)>>,
    settled: BTreeMap<u64, Settlement>,
    events: broadcast::Sender<ServiceEvent>,
    snapshots: Option<watch::Sender<Arc<Snapshot>>>,
    /// Auto mode: positions wait for the next timed block.
    waiting: Vec<(Transaction, Side, Reply<PositionAccepted>)>,
}

impl Worker {
    fn open(config: Config, events: broadcast::Sender<ServiceEvent>) -> Result<Self, SessionError> {
        let store = Arc::new(config.tick_store()?);
        let sim = Sim::new(config.sim_config(), store)?;
        let accounts = config
            .accounts
            .iter()
            .map(|a| Ok((a.name.clone(), sim.account(&a.name)?)))
            .collect::<Result<Vec<_>, SimError>>()?;
        let names = sim
            .ledger()
            .names()
            .map(|(n, a)| (a, n.to_owned()))
            .collect();
        let mut worker = Worker {
            config,
            sim,
            accounts,
            names,
            cursor: 0,
            feeds: Arc::new(Vec::new()),
            paid: BTreeMap::new(),
            settled: BTreeMap::new(),
            events,
            snapshots: None,
            waiting: Vec::new(),
        };
        if let Some(path) = worker.config.log.clone() {
            worker.recover(&path)?;
        }
        // Entries read the previous block's price, so block 1 must exist
        // before the first position can be placed.
        if worker.sim.height() == 0 {
            worker.sim.step()?;
            worker.absorb(false);
        }
        Ok(worker)
    }

    /// Replays an existing log, checks it line for line and then keeps
    /// appending to it.
    fn recover(&mut self, path: &Path) -> Result<(), SessionError> {
        let log_err = |message: String| SessionError::Log {
            path: path.display().to_string(),
            message,
        };
        let recorded: Vec<String> = match File::open(path) {
            Ok(f) => BufReader::new(f)
                .lines()
                .collect::<Result<_, _>>()
                .map_err(|e| log_err(e.to_string()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(log_err(e.to_string())),
        };

        let mut blocks: Vec<(u64, usize, Vec<Transaction>)> = Vec::new();
        for (i, line) in recorded.iter().enumerate() {
            let record: LogRecord = match serde_json::from_str(line) {
                Ok(r) => r,
                // A torn final line from a crash mid-write.
                Err(_) if i + 1 == recorded.len() => break,
                Err(e) => return Err(log_err(format!("line {}: {e}", i + 1))),
            };
            match record {
                LogRecord::Block { number, tx_count, .. } => blocks.push((number, tx_count, Vec::new())),
                LogRecord::Tx { block, tx, .. } => match blocks.last_mut() {
                    Some((n, _, txs)) if *n == block => txs.push(tx),
                    _ => return Err(log_err(format!("line {}: transaction outside its block", i + 1))),
                },
                _ => {}
            }
        }
        // Drop a trailing block whose transactions were not all written.
        if matches!(blocks.last(), Some((_, count, txs)) if *count != txs.len()) {
            blocks.pop();
        }

        for (number, _, txs) in blocks {
            if number != self.sim.height() + 1 {
                return Err(log_err(format!("block {number} follows {}", self.sim.height())));
            }
            let queued = self.sim.ledger().pending();
            if !txs.starts_with(queued) {
                return Err(log_err(format!(
                    "replay diverges at block {number}: the price feed would publish different transactions"
                )));
            }
            self.sim.ledger_mut().replay_block(txs).map_err(SimError::from)?;
            self.absorb(false);
        }

        let replayed = self.sim.ledger().log().lines();
        let common = replayed.len().min(recorded.len());
        if let Some(i) = (0..common).find(|&i| replayed[i] != recorded[i]) {
            return Err(log_err(format!(
                "replay diverges at line {}; was the log written with a different configuration?",
                i + 1
            )));
        }

        // Rewrite from the verified prefix so torn tails disappear.
        let file = OpenOptions::new()
            .create(true)
            .truncate(true)
            .write(true)
            .open(path)
            .map_err(|e| log_err(e.to_string()))?;
        let mut sink = LineWriter::new(file);
        for line in replayed {
            writeln!(sink, "{line}").map_err(|e| log_err(e.to_string()))?;
        }
        sink.flush().map_err(|e| log_err(e.to_string()))?;
        self.sim.ledger_mut().set_log_sink(Some(Box::new(sink)));
        Ok(())
    }

    fn run(mut self, rx: mpsc::Receiver<Command>) {
        let interval = self.config.block_interval();
        let mut next = Instant::now() + interval;
        loop {
            let cmd = match self.config.mode {
                Mode::Manual => match rx.recv() {
                    Ok(c) => Some(c),
                    Err(_) => return,
                },
                Mode::Auto => match rx.recv_timeout(next.saturating_duration_since(Instant::now())) {
                    Ok(c) => Some(c),
                    Err(mpsc::RecvTimeoutError::Timeout) => None,
                    Err(mpsc::RecvTimeoutError::Disconnected) => return,
                },
            };
            match cmd {
                None => {
                    next += interval;
                    if let Err(e) = self.timed_block() {
                        tracing::error!("block production failed: {e}");
                    }
                }
                Some(Command::Shutdown) => {
                    for (_, _, reply) in self.waiting.drain(..) {
                        let _ = reply.send(Err(ApiError::unavailable("session shut down")));
                    }
                    return;
                }
                Some(Command::Position {
                    account,
                    side,
                    deposit,
                    reply,
                }) => self.position(&account, side, deposit, reply),
                Some(Command::Step { blocks, reply }) => {
                    let _ = reply.send(self.step(blocks));
                }
                Some(Command::Sweep { reply }) => {
                    let _ = reply.send(self.sweep());
                }
            }
        }
    }

    fn position(&mut self, account: &str, side: Side, deposit: Amount, reply: Reply<PositionAccepted>) {
        let Some(&(_, address)) = self
            .accounts
            .iter()
            .find(|(n, a)| n == account || a.to_string() == account)
        else {
            let _ = reply.send(Err(ApiError::unknown_account(account)));
            return;
        };
        let tx = self.sim.entry_tx(address, side, deposit);
        self.waiting.push((tx, side, reply));
        if self.config.mode == Mode::Manual {
            if let Err(e) = self.timed_block() {
                tracing::error!("block production failed: {e}");
            }
        }
    }

    /// Produces one block carrying every waiting position.
    fn timed_block(&mut self) -> Result<(), SimError> {
        let waiting = std::mem::take(&mut self.waiting);
        let txs = waiting.iter().map(|(tx, _, _)| tx.clone()).collect();
        let result = self.sim.execute(txs);
        let receipts = match result {
            Ok((_, receipts)) => receipts,
            Err(e) => {
                for (_, _, reply) in waiting {
                    let _ = reply.send(Err(ApiError::internal(e.to_string())));
                }
                return Err(e);
            }
        };
        self.absorb(true);
        let snapshot = self.publish();
        for ((_, side, reply), receipt) in waiting.into_iter().zip(receipts) {
            let _ = reply.send(entry_result(&snapshot, side, &receipt));
        }
        Ok(())
    }

    fn step(&mut self, blocks: u64) -> Result<StepReport, ApiError> {
        let from = self.sim.height();
        for _ in 0..blocks {
            self.timed_block().map_err(|e| ApiError::internal(e.to_string()))?;
        }
        Ok(StepReport {
            from,
            to: self.sim.height(),
        })
    }

    fn sweep(&mut self) -> Result<SweepReport, ApiError> {
        let report = self.sim.sweep().map_err(|e| ApiError::internal(e.to_string()))?;
        self.absorb(true);
        self.publish();
        Ok(report)
    }

    /// Reads log lines written since the last call, updating the derived
    /// state and optionally broadcasting.
    fn absorb(&mut self, broadcast: bool) {
        let market = self.sim.market();
        let history = self.sim.history_view();
        let mut out = Vec::new();

        let lines = &self.sim.ledger().log().lines()[self.cursor..];
        self.cursor += lines.len();
        for line in lines {
            let Ok(record) = serde_json::from_str::<LogRecord>(line) else {
                continue;
            };
            match record {
                LogRecord::Block {
                    number,
                    timestamp,
                    tx_count,
                    ..
                } => out.push(ServiceEvent::Block {
                    number,
                    timestamp,
                    tx_count,
                }),
                LogRecord::Event {
                    block,
                    address,
                    name,
                    fields,
                    ..
                } if address == market => {
                    let id = fields.get("optionId").and_then(|v| v.as_uint());
                    match (name.as_str(), id) {
                        ("LongOption" | "ShortOption", Some(option_id)) => out.push(ServiceEvent::Position {
                            option_id,
                            side: if name == "LongOption" { Side::Long } else { Side::Short },
                            trader: fields.get("sender").and_then(|v| v.as_address()).unwrap_or(market),
                            amount: fields.get("amount").and_then(|v| v.as_amount()).unwrap_or_default(),
                            block,
                        }),
                        ("optionPaid", Some(option_id)) => {
                            let to = fields.get("addr").and_then(|v| v.as_address());
                            let amount = fields.get("amount").and_then(|v| v.as_amount());
                            if let (Some(to), Some(amount)) = (to, amount) {
                                self.paid.entry(option_id).or_default().push((block, to, amount));
                            }
                        }
                        _ => {}
                    }
                }
                _ => {}
            }
        }

        if let Some((first, last)) = history.range() {
            let have = self.feeds.len() as u64;
            let next = first + have;
            if next <= last {
                let pair = self.config.market.pair;
                if let Ok(new) = history.feeds(next, last) {
                    let feeds = Arc::make_mut(&mut self.feeds);
                    for feed in new {
                        feeds.push(feed);
                        out.push(ServiceEvent::Price {
                            feed,
                            price: feed.price(pair),
                        });
                    }
                }
            }
        }

        let view = self.sim.market_view();
        for (&id, legs) in &self.paid {
            if self.settled.contains_key(&id) {
                continue;
            }
            let Some(option) = view.option(id) else { continue };
            if !option.closed {
                continue;
            }
            let mut s = Settlement {
                block: legs.iter().map(|l| l.0).max().unwrap_or(0),
                long: Amount::ZERO,
                short: Amount::ZERO,
            };
            for &(_, to, amount) in legs {
                if to == option.long {
                    s.long = amount;
                } else if to == option.short {
                    s.short = amount;
                }
            }
            out.push(ServiceEvent::Settlement {
                option_id: id,
                block: s.block,
                long: s.long,
                short: s.short,
            });
            self.settled.insert(id, s);
        }

        if broadcast {
            for ev in out {
                let _ = self.events.send(ev);
            }
        }
    }

    fn publish(&self) -> Arc<Snapshot> {
        let snapshot = Arc::new(self.snapshot());
        if let Some(tx) = &self.snapshots {
            tx.send_replace(snapshot.clone());
        }
        snapshot
    }

    fn snapshot(&self) -> Snapshot {
        let ledger = self.sim.ledger();
        let view = self.sim.market_view();
        let setup = view.setup();
        let height = ledger.height();
        let pair = setup.config.pair;
        let latest = self.feeds.last().map(|f| (f.block_number, f.price(pair)));

        let options = view
            .options()
            .map(|o| self.record(&o, height, latest))
            .collect();
        let history = self.sim.history_view();
        Snapshot {
            height,
            timestamp: ledger.timestamp_of(height),
            mode: self.config.mode,
            pair,
            first_price_block: history.first_block(),
            last_price_block: history.last_block(),
            publisher: self.sim.publisher_status(),
            market: MarketInfo {
                address: view.address(),
                balance: view.balance(),
                locked: view.locked(),
                free_pool: view.free_pool(),
                last_option_id: view.last_option_id(),
                config: setup.config,
            },
            accounts: self
                .accounts
                .iter()
                .map(|(name, address)| AccountInfo {
                    name: name.clone(),
                    address: *address,
                    balance: ledger.balance(*address),
                })
                .collect(),
            feeds: self.feeds.clone(),
            options: Arc::new(options),
        }
    }

    fn record(&self, o: &OptionContract, height: u64, latest: Option<(u64, PricePoint)>) -> OptionRecord {
        let market = self.sim.market();
        let trader = o.trader(market);
        let view = self.sim.market_view();
        let preview = match (o.closed, latest) {
            (false, Some((price_block, price))) => {
                let Payout { long, short } = view.preview(o, price);
                Some(Preview {
                    binding: false,
                    price,
                    price_block,
                    long,
                    short,
                })
            }
            _ => None,
        };
        OptionRecord {
            option_id: o.id,
            side: o.side_of(market),
            trader,
            trader_name: self.names.get(&trader).cloned(),
            long: o.long,
            short: o.short,
            amount: o.amount,
            start_block: o.start_block,
            expiry_block: o.expiry_block,
            start_price: o.start_price,
            price_block: o.price_block,
            state: if o.closed { "closed" } else { "open" },
            blocks_remaining: o.expiry_block.saturating_sub(height),
            preview,
            settlement: self.settled.get(&o.id).cloned(),
        }
    }
}

fn entry_result(snapshot: &Snapshot, side: Side, receipt: &TxReceipt) -> Result<PositionAccepted, ApiError> {
    if receipt.is_success() {
        if let Some(id) = receipt
            .events_named(side.event_name())
            .find_map(|e| e.fields.get("optionId").and_then(|v| v.as_uint()))
        {
            let option = snapshot
                .option(id)
                .cloned()
                .ok_or_else(|| ApiError::internal(format!("option {id} missing from snapshot")))?;
            return Ok(PositionAccepted {
                option_id: id,
                block: receipt.block,
                option,
            });
        }
        let message = receipt
            .events_named("Error")
            .find_map(|e| e.fields.get("message").and_then(|v| v.as_text()).map(str::to_owned))
            .unwrap_or_default();
        if message == INVALID_MARGIN {
            return Err(ApiError::invalid_margin(receipt.block));
        }
        return Err(ApiError::rejected(receipt.block, message));
    }
    let reason = receipt.reason.clone().or_else(|| receipt.error.clone()).unwrap_or_default();
    if reason == INSUFFICIENT_POOL {
        return Err(ApiError::insufficient_pool(receipt.block));
    }
    Err(ApiError::rejected(receipt.block, reason))
}
