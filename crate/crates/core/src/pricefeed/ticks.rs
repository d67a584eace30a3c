//! Per-second exchange ticks: CSV ingestion, synthetic walks and the
//! immutable store the publisher reads from.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Pair, PricePoint, Prices};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tick {
    pub timestamp: u64,
    pub prices: Prices,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TickError {
    #[error("tick source is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("timestamps must strictly increase: {next} follows {previous}")]
    NotIncreasing { previous: u64, next: u64 },
    #[error("gap of {} s between ticks {previous} and {next}", next - previous)]
    Gap { previous: u64, next: u64 },
    #[error("timestamp {timestamp} outside covered range [{first}, {last}]")]
    Uncovered { timestamp: u64, first: u64, last: u64 },
    #[error("io: {0}")]
    Io(String),
}

/// How ingestion treats gaps longer than one second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapPolicy {
    #[default]
    Strict,
    /// Repeat the last tick for every missing second and flag it.
    Lenient,
}

/// Gapless per-second price series. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickStore {
    first: u64,
    ticks: Vec<Prices>,
    filled: Vec<u64>,
}

impl TickStore {
    pub fn ingest(ticks: impl IntoIterator<Item = Tick>, policy: GapPolicy) -> Result<Self, TickError> {
        let mut iter = ticks.into_iter();
        let head = iter.next().ok_or(TickError::Empty)?;
        let mut store = TickStore {
            first: head.timestamp,
            ticks: vec![head.prices],
            filled: Vec::new(),
        };
        let mut previous = head.timestamp;
        for tick in iter {
            if tick.timestamp <= previous {
                return Err(TickError::NotIncreasing {
                    previous,
                    next: tick.timestamp,
                });
            }
            if tick.timestamp - previous > 1 {
                match policy {
                    GapPolicy::Strict => {
                        return Err(TickError::Gap {
                            previous,
                            next: tick.timestamp,
                        })
                    }
                    GapPolicy::Lenient => {
                        let last = *store.ticks.last().expect("store starts non-empty");
                        for t in previous + 1..tick.timestamp {
                            store.ticks.push(last);
                            store.filled.push(t);
                        }
                    }
                }
            }
            store.ticks.push(tick.prices);
            previous = tick.timestamp;
        }
        Ok(store)
    }

    pub fn from_csv(reader: impl Read, policy: GapPolicy) -> Result<Self, TickError> {
        Self::ingest(parse_csv(reader)?, policy)
    }

    pub fn load(path: impl AsRef<Path>, policy: GapPolicy) -> Result<Self, TickError> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| TickError::Io(e.to_string()))?;
        Self::from_csv(file, policy)
    }

    pub fn first_timestamp(&self) -> u64 {
        self.first
    }

    pub fn last_timestamp(&self) -> u64 {
        self.first + self.ticks.len() as u64 - 1
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    /// Timestamps synthesized by lenient ingestion.
    pub fn forward_filled(&self) -> &[u64] {
        &self.filled
    }

    /// The latest tick at or before `timestamp`.
    pub fn price_at(&self, timestamp: u64) -> Result<Tick, TickError> {
        if timestamp < self.first || timestamp > self.last_timestamp() {
            return Err(TickError::Uncovered {
                timestamp,
                first: self.first,
                last: self.last_timestamp(),
            });
        }
        Ok(Tick {
            timestamp,
            prices: self.ticks[(timestamp - self.first) as usize],
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = Tick> + '_ {
        self.ticks.iter().enumerate().map(move |(i, p)| Tick {
            timestamp: self.first + i as u64,
            prices: *p,
        })
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), TickError> {
        write_csv(self.iter(), writer)
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    timestamp: u64,
    usdbtc: String,
    btceth: String,
    btcetc: String,
    btcdoge: String,
}

/// Parses `timestamp,usdbtc,btceth,btcetc,btcdoge` rows (header required).
pub fn parse_csv(reader: impl Read) -> Result<Vec<Tick>, TickError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| TickError::Parse {
            line,
            message: e.to_string(),
        })?;
        let price = |s: &str| {
            s.parse::<PricePoint>().map_err(|e| TickError::Parse {
                line,
                message: e.to_string(),
            })
        };
        out.push(Tick {
            timestamp: row.timestamp,
            prices: Prices {
                usdbtc: price(&row.usdbtc)?,
                btceth: price(&row.btceth)?,
                btcetc: price(&row.btcetc)?,
                btcdoge: price(&row.btcdoge)?,
            },
        });
    }
    Ok(out)
}

pub fn write_csv(ticks: impl IntoIterator<Item = Tick>, writer: impl Write) -> Result<(), TickError> {
    let io = |e: csv::Error| TickError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "usdbtc", "btceth", "btcetc", "btcdoge"])
        .map_err(io)?;
    for t in ticks {
        w.write_record([
            t.timestamp.to_string(),
            t.prices.usdbtc.to_string(),
            t.prices.btceth.to_string(),
            t.prices.btcetc.to_string(),
            t.prices.btcdoge.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| TickError::Io(e.to_string()))
}

/// Seeded geometric random walk, one tick per second, every pair starting
/// from `start`. Prices never drop below 0.01.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomWalk {
    pub seed: u64,
    pub start_time: u64,
    pub seconds: u64,
    pub start: PricePoint,
    /// Per-second log-return standard deviation.
    pub vol: f64,
}

impl RandomWalk {
    pub fn generate(&self) -> Vec<Tick> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut level = [self.start.points() as f64; 4];
        let mut out = Vec::with_capacity(self.seconds as usize);
        for i in 0..self.seconds {
            let mut prices = Prices::uniform(self.start);
            for (k, pair) in Pair::ALL.into_iter().enumerate() {
                if i > 0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    level[k] *= (self.vol * z - 0.5 * self.vol * self.vol).exp();
                }
                *prices.get_mut(pair) = PricePoint::from_points(level[k].round().max(1.0) as u64);
            }
            out.push(Tick {
                timestamp: self.start_time + i,
                prices,
            });
        }
        out
    }
}

/// Every pair rises by exactly `step` points each second.
pub fn monotone_ticks(start_time: u64, seconds: u64, start: PricePoint, step: u64) -> Vec<Tick> {
    (0..seconds)
        .map(|i| Tick {
            timestamp: start_time + i,
            prices: Prices::uniform(PricePoint::from_points(start.points() + i * step)),
        })
        .collect()
}

/// Constant price for `seconds` seconds.
pub fn flat_ticks(start_time: u64, seconds: u64, price: PricePoint) -> Vec<Tick> {
    monotone_ticks(start_time, seconds, price, 0)
}

/// Flat at `start`, then every pair jumps by `jump` points (up if positive)
/// from `at` onwards.
pub fn step_ticks(start_time: u64, seconds: u64, start: PricePoint, at: u64, jump: i64) -> Vec<Tick> {
    let after = PricePoint::from_points((start.points() as i64 + jump).max(1) as u64);
    (0..seconds)
        .map(|i| {
            let t = start_time + i;
            Tick {
                timestamp: t,
                prices: Prices::uniform(if t >= at { after } else { start }),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(points: u64) -> PricePoint {
        PricePoint::from_points(points)
    }

    #[test]
    fn sixty_ticks_cover_sixty_seconds() {
        let store = TickStore::ingest(flat_ticks(1000, 60, p(7500)), GapPolicy::Strict).unwrap();
        assert_eq!(store.len(), 60);
        assert_eq!(store.first_timestamp(), 1000);
        assert_eq!(store.last_timestamp(), 1059);
        assert!(store.price_at(1059).is_ok());
        assert!(store.price_at(1060).is_err());
        assert!(store.price_at(999).is_err());
    }

    #[test]
    fn three_second_gap_rejected_in_strict_mode() {
        let mut ticks = monotone_ticks(0, 10, p(100), 1);
        ticks.drain(4..6); // 3 → 6 is a 3 s gap
        assert_eq!(
            TickStore::ingest(ticks.clone(), GapPolicy::Strict),
            Err(TickError::Gap { previous: 3, next: 6 })
        );
        let store = TickStore::ingest(ticks, GapPolicy::Lenient).unwrap();
        assert_eq!(store.forward_filled(), &[4, 5]);
        assert_eq!(store.price_at(5).unwrap().prices.btceth, p(103));
        assert_eq!(store.price_at(6).unwrap().prices.btceth, p(106));
    }

    #[test]
    fn non_increasing_rejected() {
        let mut ticks = flat_ticks(0, 3, p(1));
        ticks[2].timestamp = 1;
        assert!(matches!(
            TickStore::ingest(ticks, GapPolicy::Lenient),
            Err(TickError::NotIncreasing { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let walk = RandomWalk {
            seed: 7,
            start_time: 1_500_000_000,
            seconds: 30,
            start: p(7_512),
            vol: 0.001,
        };
        let store = TickStore::ingest(walk.generate(), GapPolicy::Strict).unwrap();
        let mut buf = Vec::new();
        store.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp,usdbtc,btceth,btcetc,btcdoge\n1500000000,75.12,"));
        let back = TickStore::from_csv(&buf[..], GapPolicy::Strict).unwrap();
        assert_eq!(back, store);
    }

    #[test]
    fn csv_parse_errors_carry_line_numbers() {
        let text = "timestamp,usdbtc,btceth,btcetc,btcdoge\n1,1.00,2.00,3.00,4.00\n2,1.00,x,3.00,4.00\n";
        match TickStore::from_csv(text.as_bytes(), GapPolicy::Strict) {
            Err(TickError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn walk_is_seed_deterministic() {
        let walk = RandomWalk {
            seed: 42,
            start_time: 0,
            seconds: 100,
            start: p(7_000),
            vol: 0.002,
        };
        assert_eq!(walk.generate(), walk.generate());
        let other = RandomWalk { seed: 43, ..walk };
        assert_ne!(walk.generate(), other.generate());
    }
}
