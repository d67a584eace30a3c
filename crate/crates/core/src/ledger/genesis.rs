use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Amount, GasCosts, LedgerError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisAccount {
    pub name: String,
    pub balance: Amount,
}

/// Initial chain configuration, loaded from JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Genesis {
    /// Timestamp of block 0. When replaying ticks this is normally taken
    /// from the first tick instead.
    #[serde(default)]
    pub timestamp: Option<u64>,
    #[serde(default = "default_block_time")]
    pub block_time: u64,
    #[serde(default = "default_miner")]
    pub miner: String,
    #[serde(default)]
    pub gas_costs: GasCosts,
    #[serde(default)]
    pub accounts: Vec<GenesisAccount>,
}

fn default_block_time() -> u64 {
    12
}

fn default_miner() -> String {
    "miner".to_owned()
}

impl Default for Genesis {
    fn default() -> Self {
        Genesis {
            timestamp: None,
            block_time: default_block_time(),
            miner: default_miner(),
            gas_costs: GasCosts::default(),
            accounts: Vec::new(),
        }
    }
}

impl Genesis {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LedgerError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn with_account(mut self, name: &str, balance: Amount) -> Self {
        self.accounts.push(GenesisAccount {
            name: name.to_owned(),
            balance,
        });
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_takes_defaults() {
        let g: Genesis =
            serde_json::from_str(r#"{"accounts":[{"name":"alice","balance":"100"}]}"#).unwrap();
        assert_eq!(g.block_time, 12);
        assert_eq!(g.miner, "miner");
        assert_eq!(g.gas_costs, GasCosts::default());
        assert_eq!(g.accounts[0].balance, Amount::wei(100));
    }

    #[test]
    fn partial_gas_table_overrides_single_entries() {
        let g: Genesis = serde_json::from_str(r#"{"gas_costs":{"send_stipend":5000}}"#).unwrap();
        assert_eq!(g.gas_costs.send_stipend, 5000);
        assert_eq!(g.gas_costs.storage_write, 100);
    }
}
