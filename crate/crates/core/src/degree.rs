//! Degree groups and exact slope comparison.
//!
//! Two ordered groups cover every backend: the additive group of rationals,
//! and the multiplicative group of positive rationals read through
//! `d ↦ −½·log d`. The second one carries covolume degrees of euclidean
//! lattices without ever touching a logarithm: all comparisons reduce to
//! comparisons of rational powers.

use std::cmp::Ordering;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Result, SlopeError};
use crate::rational::{fmt_q, pow_q, Q};

/// An element of the degree group.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DegreeValue {
    Rational(Q),
    /// Stands for the real number `−½·log(d)`, `d > 0`.
    LogPositive(Q),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Rational,
    LogPositive,
}

impl DegreeValue {
    pub fn rational(x: Q) -> Self {
        DegreeValue::Rational(x)
    }

    pub fn log_positive(d: Q) -> Result<Self> {
        if !d.is_positive() {
            return Err(SlopeError::invalid(format!(
                "log-positive degree needs d > 0, got {}",
                fmt_q(&d)
            )));
        }
        Ok(DegreeValue::LogPositive(d))
    }

    pub fn zero(variant: Variant) -> Self {
        match variant {
            Variant::Rational => DegreeValue::Rational(Q::zero()),
            Variant::LogPositive => DegreeValue::LogPositive(Q::one()),
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            DegreeValue::Rational(_) => Variant::Rational,
            DegreeValue::LogPositive(_) => Variant::LogPositive,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DegreeValue::Rational(x) => x.is_zero(),
            DegreeValue::LogPositive(d) => d.is_one(),
        }
    }

    pub fn as_rational(&self) -> Option<&Q> {
        match self {
            DegreeValue::Rational(x) => Some(x),
            DegreeValue::LogPositive(_) => None,
        }
    }

    fn mismatch(&self, other: &Self) -> SlopeError {
        SlopeError::VariantMismatch(format!("{self} vs {other}"))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (DegreeValue::Rational(a), DegreeValue::Rational(b)) => Ok(DegreeValue::Rational(a + b)),
            (DegreeValue::LogPositive(a), DegreeValue::LogPositive(b)) => {
                Ok(DegreeValue::LogPositive(a * b))
            }
            _ => Err(self.mismatch(other)),
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            DegreeValue::Rational(a) => DegreeValue::Rational(-a),
            DegreeValue::LogPositive(d) => DegreeValue::LogPositive(d.recip()),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// `n·self`.
    pub fn scale(&self, n: i64) -> Self {
        match self {
            DegreeValue::Rational(a) => DegreeValue::Rational(a * Q::from_integer(n.into())),
            DegreeValue::LogPositive(d) => DegreeValue::LogPositive(pow_q(d, n)),
        }
    }

    /// Group order. Larger `d` means smaller degree in the log variant.
    pub fn try_cmp(&self, other: &Self) -> Result<Ordering> {
        match (self, other) {
            (DegreeValue::Rational(a), DegreeValue::Rational(b)) => Ok(a.cmp(b)),
            (DegreeValue::LogPositive(a), DegreeValue::LogPositive(b)) => Ok(b.cmp(a)),
            _ => Err(self.mismatch(other)),
        }
    }

    pub fn sum<'a>(variant: Variant, items: impl IntoIterator<Item = &'a DegreeValue>) -> Result<Self> {
        let mut acc = DegreeValue::zero(variant);
        for it in items {
            acc = acc.add(it)?;
        }
        Ok(acc)
    }

    /// Approximate real value, for display only.
    pub fn approx(&self) -> f64 {
        use num_traits::ToPrimitive;
        match self {
            DegreeValue::Rational(a) => a.to_f64().unwrap_or(f64::NAN),
            DegreeValue::LogPositive(d) => -0.5 * d.to_f64().unwrap_or(f64::NAN).ln(),
        }
    }
}

impl fmt::Display for DegreeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreeValue::Rational(a) => write!(f, "{}", fmt_q(a)),
            DegreeValue::LogPositive(d) => write!(f, "-1/2*log({})", fmt_q(d)),
        }
    }
}

/// A slope `deg / rk`, kept as the pair so comparisons never divide.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlopeKey {
    pub deg: DegreeValue,
    pub rk: u64,
}

impl SlopeKey {
    pub fn new(deg: DegreeValue, rk: u64) -> Result<Self> {
        if rk == 0 {
            return Err(SlopeError::ZeroObject);
        }
        Ok(SlopeKey { deg, rk })
    }

    pub fn rational(value: Q) -> Self {
        SlopeKey {
            deg: DegreeValue::Rational(value),
            rk: 1,
        }
    }

    pub fn variant(&self) -> Variant {
        self.deg.variant()
    }

    /// `deg / rk` when the degree is rational.
    pub fn rational_value(&self) -> Option<Q> {
        self.deg
            .as_rational()
            .map(|d| d / Q::from_integer(self.rk.into()))
    }

    pub fn approx(&self) -> f64 {
        self.deg.approx() / self.rk as f64
    }
}

impl fmt::Display for SlopeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rational_value() {
            Some(v) => write!(f, "{}", fmt_q(&v)),
            None => write!(f, "({})/{}", self.deg, self.rk),
        }
    }
}

/// Compares `a.deg/a.rk` with `b.deg/b.rk` via `b.rk·a.deg` vs `a.rk·b.deg`.
pub fn cmp_slope(a: &SlopeKey, b: &SlopeKey) -> Result<Ordering> {
    let lhs = a.deg.scale(b.rk as i64);
    let rhs = b.deg.scale(a.rk as i64);
    lhs.try_cmp(&rhs)
}

pub fn slope_eq(a: &SlopeKey, b: &SlopeKey) -> Result<bool> {
    Ok(cmp_slope(a, b)? == Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qf};
    use proptest::prelude::*;

    fn rk(d: i64, r: u64) -> SlopeKey {
        SlopeKey::new(DegreeValue::Rational(q(d)), r).unwrap()
    }

    fn lk(n: i64, den: i64, r: u64) -> SlopeKey {
        SlopeKey::new(DegreeValue::LogPositive(qf(n, den)), r).unwrap()
    }

    #[test]
    fn rational_examples() {
        assert_eq!(cmp_slope(&rk(3, 2), &rk(1, 1)).unwrap(), Ordering::Greater);
        assert_eq!(cmp_slope(&rk(2, 4), &rk(1, 2)).unwrap(), Ordering::Equal);
    }

    #[test]
    fn log_positive_order_is_reversed() {
        assert_eq!(cmp_slope(&lk(2, 1, 1), &lk(1, 1, 1)).unwrap(), Ordering::Less);
        // d=4 over rank 2 equals d=2 over rank 1
        assert_eq!(cmp_slope(&lk(4, 1, 2), &lk(2, 1, 1)).unwrap(), Ordering::Equal);
    }

    #[test]
    fn mixed_variants_rejected() {
        let e = cmp_slope(&rk(1, 1), &lk(1, 1, 1)).unwrap_err();
        assert!(matches!(e, SlopeError::VariantMismatch(_)));
        assert!(DegreeValue::Rational(q(1))
            .add(&DegreeValue::LogPositive(q(2)))
            .is_err());
    }

    #[test]
    fn zero_rank_rejected() {
        assert_eq!(
            SlopeKey::new(DegreeValue::Rational(q(1)), 0).unwrap_err(),
            SlopeError::ZeroObject
        );
    }

    #[test]
    fn scaling_in_both_variants() {
        assert_eq!(DegreeValue::Rational(qf(1, 3)).scale(3), DegreeValue::Rational(q(1)));
        assert_eq!(
            DegreeValue::LogPositive(q(2)).scale(-2),
            DegreeValue::LogPositive(qf(1, 4))
        );
    }

    fn arb_key() -> impl Strategy<Value = SlopeKey> {
        (-20i64..20, 1i64..5, 1u64..5).prop_map(|(n, d, r)| {
            SlopeKey::new(DegreeValue::Rational(qf(n, d)), r).unwrap()
        })
    }

    fn arb_log_key() -> impl Strategy<Value = SlopeKey> {
        (1i64..30, 1i64..30, 1u64..4).prop_map(|(n, d, r)| lk(n, d, r))
    }

    proptest! {
        #[test]
        fn cmp_is_antisymmetric(a in arb_key(), b in arb_key()) {
            prop_assert_eq!(cmp_slope(&a, &b).unwrap(), cmp_slope(&b, &a).unwrap().reverse());
        }

        #[test]
        fn cmp_matches_division(a in arb_key(), b in arb_key()) {
            let va = a.rational_value().unwrap();
            let vb = b.rational_value().unwrap();
            prop_assert_eq!(cmp_slope(&a, &b).unwrap(), va.cmp(&vb));
        }

        #[test]
        fn log_cmp_is_transitive(a in arb_log_key(), b in arb_log_key(), c in arb_log_key()) {
            let ab = cmp_slope(&a, &b).unwrap();
            let bc = cmp_slope(&b, &c).unwrap();
            if ab != Ordering::Greater && bc != Ordering::Greater {
                prop_assert_ne!(cmp_slope(&a, &c).unwrap(), Ordering::Greater);
            }
        }

        #[test]
        fn log_cmp_agrees_with_floats(a in arb_log_key(), b in arb_log_key()) {
            let exact = cmp_slope(&a, &b).unwrap();
            let (fa, fb) = (a.approx(), b.approx());
            if (fa - fb).abs() > 1e-9 {
                prop_assert_eq!(exact, fa.partial_cmp(&fb).unwrap());
            }
        }
    }
}
