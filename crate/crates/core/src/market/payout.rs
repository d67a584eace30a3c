use serde::{Deserialize, Serialize};

use crate::ledger::Amount;
use crate::pricefeed::PricePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payout {
    pub long: Amount,
    pub short: Amount,
}

/// Settlement of a collared position: the long side gets its escrow plus
/// the price move in wei, clamped so that neither side loses more than its
/// own escrow. Always sums to `2 * amount`.
pub fn compute_payout(amount: Amount, start: PricePoint, end: PricePoint, lot_size: Amount) -> Payout {
    let a = amount.as_wei();
    let d = end.diff(start);
    // |d| * lot, saturating: anything at or past the collar pays the same.
    let moved = d
        .unsigned_abs()
        .checked_mul(lot_size.as_wei())
        .map_or(a, |m| m.min(a));
    let long = if d >= 0 { a + moved } else { a - moved };
    Payout {
        long: Amount::wei(long),
        short: Amount::wei(2 * a - long),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: u64) -> PricePoint {
        PricePoint::from_points(x)
    }

    #[test]
    fn inside_the_collar() {
        // amount 100, one wei per point, +40
        let out = compute_payout(Amount::wei(100), p(1000), p(1040), Amount::wei(1));
        assert_eq!((out.long.as_wei(), out.short.as_wei()), (140, 60));
    }

    #[test]
    fn limits() {
        let amt = Amount::wei(100);
        let up = compute_payout(amt, p(1000), p(1100), Amount::wei(1));
        assert_eq!((up.long.as_wei(), up.short.as_wei()), (200, 0));
        let down = compute_payout(amt, p(1000), p(1), Amount::wei(1));
        assert_eq!((down.long.as_wei(), down.short.as_wei()), (0, 200));
        let flat = compute_payout(amt, p(1000), p(1000), Amount::wei(1));
        assert_eq!((flat.long, flat.short), (amt, amt));
    }

    #[test]
    fn huge_lot_does_not_overflow() {
        let out = compute_payout(Amount::wei(5), p(1), p(u64::MAX), Amount::wei(u128::MAX));
        assert_eq!(out.long.as_wei(), 10);
    }
}
