//! Append-only JSON-lines event log.
//!
//! Field order is fixed by the record definitions, so identical runs
//! produce byte-identical logs.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Address, Amount, Event, Fields, LedgerError, Transaction, TxStatus, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Genesis {
        timestamp: u64,
        block_time: u64,
        miner: Address,
        total_supply: Amount,
        accounts: Vec<(Address, Amount)>,
    },
    Block {
        number: u64,
        timestamp: u64,
        tx_count: usize,
        gas_used: u64,
    },
    Tx {
        block: u64,
        index: usize,
        tx: Transaction,
        status: TxStatus,
        gas_used: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
        output: Value,
    },
    Event {
        block: u64,
        tx: usize,
        address: Address,
        name: String,
        fields: Fields,
    },
}

impl LogRecord {
    pub(crate) fn event(block: u64, tx: usize, ev: &Event) -> Self {
        LogRecord::Event {
            block,
            tx,
            address: ev.address,
            name: ev.name.clone(),
            fields: ev.fields.clone(),
        }
    }
}

/// In-memory copy of every line plus an optional streaming sink.
#[derive(Default)]
pub struct EventLog {
    lines: Vec<String>,
    sink: Option<Box<dyn Write + Send>>,
}

impl fmt::Debug for EventLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventLog")
            .field("lines", &self.lines.len())
            .field("sink", &self.sink.is_some())
            .finish()
    }
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_sink(&mut self, sink: Option<Box<dyn Write + Send>>) {
        self.sink = sink;
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), LedgerError> {
        let line = serde_json::to_string(record)?;
        if let Some(sink) = self.sink.as_mut() {
            sink.write_all(line.as_bytes())?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        self.lines.push(line);
        Ok(())
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    pub fn records(&self) -> impl Iterator<Item = LogRecord> + '_ {
        self.lines
            .iter()
            .map(|l| serde_json::from_str(l).expect("log lines are produced by this module"))
    }

    /// Parses a JSON-lines log produced by [`EventLog`].
    pub fn read(reader: impl BufRead) -> Result<Vec<LogRecord>, LedgerError> {
        let mut out = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line)
                .map_err(|e| LedgerError::Log(format!("line {}: {e}", n + 1)))?;
            out.push(rec);
        }
        Ok(out)
    }
}
