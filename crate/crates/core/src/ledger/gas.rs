use serde::{Deserialize, Serialize};

use super::VmError;

/// Classes of metered work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpClass {
    StorageWrite,
    StorageRead,
    ComputeStep,
    Call,
    SendStipend,
}

/// Gas units charged per operation class.
///
/// `send_stipend` is the budget handed to a receive hook by `send`, not a
/// fee: the hook draws at most that much from the sending frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GasCosts {
    pub storage_write: u64,
    pub storage_read: u64,
    pub compute_step: u64,
    pub call: u64,
    pub send_stipend: u64,
}

impl Default for GasCosts {
    fn default() -> Self {
        GasCosts {
            storage_write: 100,
            storage_read: 10,
            compute_step: 1,
            call: 40,
            send_stipend: 50,
        }
    }
}

impl GasCosts {
    pub fn cost(&self, class: OpClass) -> u64 {
        match class {
            OpClass::StorageWrite => self.storage_write,
            OpClass::StorageRead => self.storage_read,
            OpClass::ComputeStep => self.compute_step,
            OpClass::Call => self.call,
            OpClass::SendStipend => self.send_stipend,
        }
    }
}

/// Per-frame gas budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GasMeter {
    limit: u64,
    used: u64,
}

impl GasMeter {
    pub fn new(limit: u64) -> Self {
        GasMeter { limit, used: 0 }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.used
    }

    /// Deducts `amount`; fails without deducting when the budget would go
    /// negative. The frame owning the meter must then revert.
    pub fn consume(&mut self, amount: u64) -> Result<u64, VmError> {
        if amount > self.remaining() {
            return Err(VmError::OutOfGas);
        }
        self.used += amount;
        Ok(self.remaining())
    }

    /// Marks the whole budget as spent (out-of-gas frames forfeit it).
    pub fn exhaust(&mut self) {
        self.used = self.limit;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storage_write_from_budget_1000_leaves_900() {
        let costs = GasCosts::default();
        let mut meter = GasMeter::new(1000);
        assert_eq!(meter.consume(costs.cost(OpClass::StorageWrite)), Ok(900));
    }

    #[test]
    fn exact_budget_reaches_zero() {
        let mut meter = GasMeter::new(40);
        assert_eq!(meter.consume(40), Ok(0));
        assert_eq!(meter.remaining(), 0);
    }

    #[test]
    fn insufficient_budget_is_out_of_gas_and_charges_nothing() {
        let mut meter = GasMeter::new(99);
        assert_eq!(meter.consume(100), Err(VmError::OutOfGas));
        assert_eq!(meter.used(), 0);
    }
}
