use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A price with two implied decimal places (`value = price × 100`).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PricePoint(u64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid price `{0}`: expected a non-negative decimal with at most 2 places")]
pub struct ParsePriceError(pub String);

impl PricePoint {
    pub const fn from_points(points: u64) -> Self {
        PricePoint(points)
    }

    pub const fn points(&self) -> u64 {
        self.0
    }

    /// Signed difference `self − start`, in price points.
    pub fn diff(self, start: PricePoint) -> i128 {
        self.0 as i128 - start.0 as i128
    }

    /// Parses the leading numeric prefix scaled to two decimal places,
    /// the way an oracle client parses a textual price.
    pub fn parse_int_2(text: &str) -> Result<Self, ParsePriceError> {
        text.trim().parse()
    }
}

impl fmt::Display for PricePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl fmt::Debug for PricePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for PricePoint {
    type Err = ParsePriceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParsePriceError(s.to_owned());
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() || frac.len() > 2 || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        if !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let whole: u64 = whole.parse().map_err(|_| err())?;
        let mut cents: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
        if frac.len() == 1 {
            cents *= 10;
        }
        whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(cents))
            .map(PricePoint)
            .ok_or_else(err)
    }
}

impl Serialize for PricePoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PricePoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The four published price pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pair {
    UsdBtc,
    #[default]
    BtcEth,
    BtcEtc,
    BtcDoge,
}

impl Pair {
    pub const ALL: [Pair; 4] = [Pair::UsdBtc, Pair::BtcEth, Pair::BtcEtc, Pair::BtcDoge];

    pub fn as_str(&self) -> &'static str {
        match self {
            Pair::UsdBtc => "usdbtc",
            Pair::BtcEth => "btceth",
            Pair::BtcEtc => "btcetc",
            Pair::BtcDoge => "btcdoge",
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pair::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown price pair `{s}`"))
    }
}

/// One price per pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prices {
    pub usdbtc: PricePoint,
    pub btceth: PricePoint,
    pub btcetc: PricePoint,
    pub btcdoge: PricePoint,
}

impl Prices {
    pub fn uniform(p: PricePoint) -> Self {
        Prices {
            usdbtc: p,
            btceth: p,
            btcetc: p,
            btcdoge: p,
        }
    }

    pub fn get(&self, pair: Pair) -> PricePoint {
        match pair {
            Pair::UsdBtc => self.usdbtc,
            Pair::BtcEth => self.btceth,
            Pair::BtcEtc => self.btcetc,
            Pair::BtcDoge => self.btcdoge,
        }
    }

    pub fn get_mut(&mut self, pair: Pair) -> &mut PricePoint {
        match pair {
            Pair::UsdBtc => &mut self.usdbtc,
            Pair::BtcEth => &mut self.btceth,
            Pair::BtcEtc => &mut self.btcetc,
            Pair::BtcDoge => &mut self.btcdoge,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_decimal_places() {
        assert_eq!("1234.56".parse::<PricePoint>().unwrap().points(), 123_456);
        assert_eq!("75.5".parse::<PricePoint>().unwrap().points(), 7_550);
        assert_eq!("12".parse::<PricePoint>().unwrap().points(), 1_200);
        assert_eq!("0.07".parse::<PricePoint>().unwrap().points(), 7);
        for bad in ["", ".5", "1.234", "-1.00", "1e3", "1.x"] {
            assert!(bad.parse::<PricePoint>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_is_fixed_two_places() {
        assert_eq!(PricePoint::from_points(7_505).to_string(), "75.05");
        assert_eq!(PricePoint::from_points(3).to_string(), "0.03");
    }

    #[test]
    fn signed_diff() {
        let a = PricePoint::from_points(100);
        let b = PricePoint::from_points(40);
        assert_eq!(b.diff(a), -60);
        assert_eq!(a.diff(b), 60);
    }
}
