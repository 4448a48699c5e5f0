//! Objective metrics: acceptable-price bounds, utilities and susceptibility.
//!
//! The two targets only pin the outer ends of the price range. The seller's
//! minimum and the buyer's maximum acceptable prices are placed inside the
//! spread so the three gaps `seller_target - buyer_max`,
//! `buyer_max - seller_min` and `seller_min - buyer_target` stand in a fixed
//! ratio, 3:4:3 by default. Bounds are derived in exact decimal arithmetic;
//! utilities are ratios of exact differences evaluated in `f64`.
//!
//! Utilities are not clamped. A price above the seller target gives a seller
//! utility above 1 and a negative buyer utility, which is how negative mean
//! buyer utilities arise. Under 3:4:3 the two utilities always sum to 4/7.

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("seller target {seller_target} must exceed buyer target {buyer_target}")]
    DegenerateSpread {
        seller_target: Money,
        buyer_target: Money,
    },
    #[error("bound ratio parts must be positive")]
    InvalidRatio,
}

/// Relative sizes of the three gaps between the four bounds, outermost seller
/// gap first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundRatio {
    pub seller_gap: u32,
    pub overlap: u32,
    pub buyer_gap: u32,
}

impl Default for BoundRatio {
    fn default() -> Self {
        BoundRatio {
            seller_gap: 3,
            overlap: 4,
            buyer_gap: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceBounds {
    pub seller_target: Money,
    pub seller_min: Money,
    pub buyer_max: Money,
    pub buyer_target: Money,
}

pub fn derive_price_bounds(seller_target: Money, buyer_target: Money) -> Result<PriceBounds, MetricsError> {
    derive_price_bounds_with_ratio(seller_target, buyer_target, BoundRatio::default())
}

pub fn derive_price_bounds_with_ratio(
    seller_target: Money,
    buyer_target: Money,
    ratio: BoundRatio,
) -> Result<PriceBounds, MetricsError> {
    if seller_target <= buyer_target {
        return Err(MetricsError::DegenerateSpread {
            seller_target,
            buyer_target,
        });
    }
    if ratio.seller_gap == 0 || ratio.overlap == 0 || ratio.buyer_gap == 0 {
        return Err(MetricsError::InvalidRatio);
    }
    let parts = Decimal::from(ratio.seller_gap + ratio.overlap + ratio.buyer_gap);
    let unit = (seller_target - buyer_target) / parts;
    Ok(PriceBounds {
        seller_target,
        buyer_max: seller_target - unit * Decimal::from(ratio.seller_gap),
        seller_min: buyer_target + unit * Decimal::from(ratio.buyer_gap),
        buyer_target,
    })
}

fn ratio(num: Decimal, den: Decimal) -> f64 {
    // Both operands are exact; dividing in Decimal first keeps 28 digits before
    // the single rounding to f64.
    (num / den).to_f64().unwrap_or(f64::NAN)
}

/// `(price - seller_min) / (seller_target - seller_min)`.
pub fn seller_utility(bounds: &PriceBounds, price: Money) -> f64 {
    ratio(
        (price - bounds.seller_min).decimal(),
        (bounds.seller_target - bounds.seller_min).decimal(),
    )
}

/// `(buyer_max - price) / (buyer_max - buyer_target)`.
pub fn buyer_utility(bounds: &PriceBounds, price: Money) -> f64 {
    ratio(
        (bounds.buyer_max - price).decimal(),
        (bounds.buyer_max - bounds.buyer_target).decimal(),
    )
}

/// Drop in buyer utility from the baseline run to the anchored run of the same
/// cell. Positive means the anchor cost the buyer.
pub fn susceptibility(buyer_utility_baseline: f64, buyer_utility_anchor: f64) -> f64 {
    buyer_utility_baseline - buyer_utility_anchor
}

/// [`susceptibility`] in exact decimal arithmetic, for tabulated means.
pub fn susceptibility_exact(buyer_utility_baseline: Decimal, buyer_utility_anchor: Decimal) -> Decimal {
    buyer_utility_baseline - buyer_utility_anchor
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    #[test]
    fn apartment_bounds() {
        let b = derive_price_bounds(m("2550"), m("1530")).unwrap();
        assert_eq!(b.buyer_max, m("2244"));
        assert_eq!(b.seller_min, m("1836"));
    }

    #[test]
    fn unit_and_bar_stool_bounds() {
        let b = derive_price_bounds(m("10"), m("0")).unwrap();
        assert_eq!((b.buyer_max, b.seller_min), (m("7"), m("3")));
        let b = derive_price_bounds(m("15"), m("13")).unwrap();
        assert_eq!((b.buyer_max, b.seller_min), (m("14.4"), m("13.6")));
    }

    #[test]
    fn degenerate_spread() {
        assert!(matches!(
            derive_price_bounds(m("10"), m("10")),
            Err(MetricsError::DegenerateSpread { .. })
        ));
        assert!(derive_price_bounds(m("9"), m("10")).is_err());
    }

    #[test]
    fn custom_ratio() {
        let r = BoundRatio { seller_gap: 1, overlap: 2, buyer_gap: 1 };
        let b = derive_price_bounds_with_ratio(m("100"), m("60"), r).unwrap();
        assert_eq!((b.buyer_max, b.seller_min), (m("90"), m("70")));
        let bad = BoundRatio { seller_gap: 0, ..r };
        assert_eq!(derive_price_bounds_with_ratio(m("100"), m("60"), bad), Err(MetricsError::InvalidRatio));
    }

    #[test]
    fn utility_spot_values() {
        let b = derive_price_bounds(m("2550"), m("1530")).unwrap();
        assert!((seller_utility(&b, m("2150")) - 314.0 / 714.0).abs() < 1e-12);
        assert!((buyer_utility(&b, m("2450")) - (-206.0 / 714.0)).abs() < 1e-12);
        assert_eq!(seller_utility(&b, b.seller_target), 1.0);
        assert_eq!(seller_utility(&b, b.seller_min), 0.0);
        assert_eq!(buyer_utility(&b, b.buyer_target), 1.0);
        assert_eq!(buyer_utility(&b, b.buyer_max), 0.0);
    }

    #[test]
    fn susceptibility_values() {
        assert!((susceptibility(-0.04, -0.41) - 0.37).abs() < 1e-12);
        assert!((susceptibility(0.42, -0.21) - 0.63).abs() < 1e-12);
        assert_eq!(susceptibility(0.3, 0.3), 0.0);
    }

    fn cents() -> impl Strategy<Value = i64> {
        1i64..10_000_000
    }

    proptest! {
        #[test]
        fn zero_sum_and_ratio(a in cents(), b in cents(), p in 0i64..20_000_000) {
            prop_assume!(a != b);
            let (hi, lo) = (a.max(b), a.min(b));
            let bounds = derive_price_bounds(Money::from_cents(hi), Money::from_cents(lo)).unwrap();
            let price = Money::from_cents(p);
            let total = seller_utility(&bounds, price) + buyer_utility(&bounds, price);
            prop_assert!((total - 4.0 / 7.0).abs() < 1e-9);
            let g1 = bounds.seller_target - bounds.buyer_max;
            let g2 = bounds.buyer_max - bounds.seller_min;
            let g3 = bounds.seller_min - bounds.buyer_target;
            prop_assert_eq!(g1, g3);
            prop_assert_eq!(g1.decimal() * Decimal::from(4), g2.decimal() * Decimal::from(3));
            prop_assert!(bounds.seller_target > bounds.buyer_max);
            prop_assert!(bounds.buyer_max > bounds.seller_min);
            prop_assert!(bounds.seller_min > bounds.buyer_target);
        }

        #[test]
        fn monotone_in_price(p in 0i64..1_000_000, dp in 1i64..1000) {
            let bounds = derive_price_bounds(Money::from_units(2550), Money::from_units(1530)).unwrap();
            let lo = Money::from_cents(p);
            let hi = Money::from_cents(p + dp);
            prop_assert!(seller_utility(&bounds, hi) > seller_utility(&bounds, lo));
            prop_assert!(buyer_utility(&bounds, hi) < buyer_utility(&bounds, lo));
        }

        #[test]
        fn scale_invariant(lam in 1i64..50, p in 0i64..5000) {
            let base = derive_price_bounds(Money::from_units(2550), Money::from_units(1530)).unwrap();
            let l = Decimal::from(lam);
            let scaled = derive_price_bounds(Money::from_units(2550) * l, Money::from_units(1530) * l).unwrap();
            let price = Money::from_units(p);
            prop_assert!((seller_utility(&base, price) - seller_utility(&scaled, price * l)).abs() < 1e-12);
            prop_assert!((buyer_utility(&base, price) - buyer_utility(&scaled, price * l)).abs() < 1e-12);
        }

        #[test]
        fn susceptibility_antisymmetric(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            prop_assert_eq!(susceptibility(a, b), -susceptibility(b, a));
        }
    }
}
