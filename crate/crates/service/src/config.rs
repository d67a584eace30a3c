use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use velocity_core::harness::SimConfig;
use velocity_core::ledger::{Amount, Genesis};
use velocity_core::market::MarketConfig;
use velocity_core::pricefeed::{GapPolicy, PricePoint, RandomWalk, TickError, TickStore};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// A block every `block_interval_ms`.
    Auto,
    /// Blocks only on `POST /admin/step` or when a position is placed.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub name: String,
    pub balance: Amount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub port: u16,
    pub mode: Mode,
    pub block_interval_ms: u64,
    /// Tick CSV. Without one a seeded random walk is generated.
    pub ticks: Option<PathBuf>,
    pub seed: u64,
    pub start_time: u64,
    /// Length of the generated walk.
    pub walk_seconds: u64,
    pub walk_start: PricePoint,
    pub walk_vol: f64,
    /// Event log; replayed on start if it already has content.
    pub log: Option<PathBuf>,
    pub accounts: Vec<Account>,
    pub pool: Amount,
    pub market: MarketConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            port: 8080,
            mode: Mode::Manual,
            block_interval_ms: 12_000,
            ticks: None,
            seed: 1,
            start_time: 1_500_000_000,
            walk_seconds: 86_400,
            walk_start: PricePoint::from_points(7505),
            walk_vol: 0.0005,
            log: None,
            accounts: ["alice", "bob", "carol", "dave", "erin"]
                .into_iter()
                .map(|name| Account {
                    name: name.to_owned(),
                    balance: Amount::ether(100),
                })
                .collect(),
            pool: Amount::ether(100),
            market: MarketConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    /// `VELOCITY_PORT`, `VELOCITY_MODE`, `VELOCITY_TICKS`, `VELOCITY_SEED`
    /// and `VELOCITY_LOG` take precedence over the file.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = lookup("VELOCITY_PORT") {
            self.port = v.parse().map_err(|_| ConfigError::Env {
                name: "VELOCITY_PORT",
                message: format!("`{v}` is not a port"),
            })?;
        }
        if let Some(v) = lookup("VELOCITY_MODE") {
            self.mode = match v.as_str() {
                "auto" => Mode::Auto,
                "manual" => Mode::Manual,
                _ => {
                    return Err(ConfigError::Env {
                        name: "VELOCITY_MODE",
                        message: format!("`{v}` is neither auto nor manual"),
                    })
                }
            };
        }
        if let Some(v) = lookup("VELOCITY_TICKS") {
            self.ticks = Some(v.into());
        }
        if let Some(v) = lookup("VELOCITY_SEED") {
            self.seed = v.parse().map_err(|_| ConfigError::Env {
                name: "VELOCITY_SEED",
                message: format!("`{v}` is not an integer"),
            })?;
        }
        if let Some(v) = lookup("VELOCITY_LOG") {
            self.log = Some(v.into());
        }
        Ok(())
    }

    pub fn block_interval(&self) -> Duration {
        Duration::from_millis(self.block_interval_ms.max(1))
    }

    pub fn tick_store(&self) -> Result<TickStore, TickError> {
        match &self.ticks {
            Some(path) => TickStore::load(path, GapPolicy::default()),
            None => {
                let walk = RandomWalk {
                    seed: self.seed,
                    start_time: self.start_time,
                    seconds: self.walk_seconds,
                    start: self.walk_start,
                    vol: self.walk_vol,
                };
                TickStore::ingest(walk.generate(), GapPolicy::default())
            }
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut genesis = Genesis::default();
        for a in &self.accounts {
            genesis = genesis.with_account(&a.name, a.balance);
        }
        SimConfig {
            genesis,
            market: self.market.clone(),
            pool: self.pool,
            ..SimConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_env() {
        let mut cfg: Config = toml::from_str(
            r#"
            port = 9000
            mode = "auto"
            seed = 5
            [[accounts]]
            name = "zed"
            balance = "1000"
            "#,
        )
        .unwrap();
        assert_eq!((cfg.port, cfg.mode, cfg.seed), (9000, Mode::Auto, 5));
        assert_eq!(cfg.accounts.len(), 1);
        cfg.apply_env(|k| match k {
            "VELOCITY_MODE" => Some("manual".into()),
            "VELOCITY_SEED" => Some("9".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!((cfg.port, cfg.mode, cfg.seed), (9000, Mode::Manual, 9));
        assert!(cfg.apply_env(|k| (k == "VELOCITY_PORT").then(|| "x".into())).is_err());
    }
}
