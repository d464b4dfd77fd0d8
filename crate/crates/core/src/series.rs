//! Truncated Laurent series over ℚ with absolute precision.
//!
//! A series is `Σ_{k ≥ start} c_k x^k + O(x^prec)`; coefficients at or
//! beyond `prec` are unknown. Exact Laurent polynomials use the precision
//! [`EXACT`]. Every operation propagates the precision it can guarantee.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::error::{Result, SlopeError};
use crate::rational::{fmt_q, parse_q, pow_q, Q};

/// Integer numerators over a common denominator.
fn common_denominator(cs: &[Q]) -> (Vec<BigInt>, BigInt) {
    let den = cs.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let nums = cs.iter().map(|c| c.numer() * (&den / c.denom())).collect();
    (nums, den)
}

/// First `len` coefficients of the product of two coefficient lists. The
/// convolution runs over integers so that only the final entries are reduced.
fn convolve(a: &[Q], b: &[Q], len: usize) -> Vec<Q> {
    let (na, da) = common_denominator(a);
    let (nb, db) = common_denominator(b);
    let mut acc = vec![BigInt::zero(); len];
    for (i, x) in na.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in nb.iter().enumerate().take(len - i) {
            if !y.is_zero() {
                acc[i + j] += x * y;
            }
        }
    }
    let den = da * db;
    acc.into_iter().map(|n| Q::new(n, den.clone())).collect()
}

/// Precision of exact (finitely supported) series.
pub const EXACT: i64 = i64::MAX / 4;

fn cap(p: i64) -> i64 {
    p.min(EXACT)
}

#[derive(Clone, PartialEq, Eq)]
pub struct Series {
    start: i64,
    coeffs: Vec<Q>,
    prec: i64,
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                terms.push(format!("{}*x^{}", fmt_q(c), self.start + i as i64));
            }
        }
        if terms.is_empty() {
            terms.push("0".into());
        }
        if self.prec < EXACT {
            terms.push(format!("O(x^{})", self.prec));
        }
        write!(f, "{}", terms.join(" + "))
    }
}

impl Series {
    /// `Σ coeffs[i] x^{start+i} + O(x^prec)`, normalized.
    pub fn new(start: i64, coeffs: Vec<Q>, prec: i64) -> Self {
        let mut s = Series {
            start,
            coeffs,
            prec: cap(prec),
        };
        s.normalize();
        s
    }

    pub fn exact(start: i64, coeffs: Vec<Q>) -> Self {
        Self::new(start, coeffs, EXACT)
    }

    pub fn zero() -> Self {
        Self::exact(0, Vec::new())
    }

    /// `O(x^prec)`.
    pub fn big_o(prec: i64) -> Self {
        Self::new(prec, Vec::new(), prec)
    }

    pub fn one() -> Self {
        Self::monomial(Q::one(), 0)
    }

    pub fn constant(c: Q) -> Self {
        Self::monomial(c, 0)
    }

    pub fn monomial(c: Q, k: i64) -> Self {
        Self::exact(k, vec![c])
    }

    fn normalize(&mut self) {
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        self.coeffs.drain(..lead);
        self.start += lead as i64;
        let keep = (self.prec - self.start).max(0) as usize;
        if self.coeffs.len() > keep {
            self.coeffs.truncate(keep);
        }
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.start = self.prec.min(0);
        }
    }

    pub fn prec(&self) -> i64 {
        self.prec
    }

    pub fn is_exact(&self) -> bool {
        self.prec >= EXACT
    }

    /// First exponent with a known non-zero coefficient.
    pub fn valuation(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.start)
        }
    }

    /// The valuation, or the precision when no coefficient is known.
    pub fn val_bound(&self) -> i64 {
        self.valuation().unwrap_or(self.prec)
    }

    pub fn is_zero_to_precision(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Highest exponent with a stored coefficient.
    pub fn top(&self) -> Option<i64> {
        self.valuation().map(|v| v + self.coeffs.len() as i64 - 1)
    }

    pub fn coeff(&self, k: i64) -> Q {
        if k < self.start || k >= self.start + self.coeffs.len() as i64 {
            Q::zero()
        } else {
            self.coeffs[(k - self.start) as usize].clone()
        }
    }

    /// Number of stored terms from the valuation to the last non-zero one.
    pub fn coeffs_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn lead_coeff(&self) -> Option<Q> {
        self.coeffs.first().cloned()
    }

    /// The known terms below `n`, taken as an exact Laurent polynomial.
    pub fn truncate(&self, n: i64) -> Self {
        let keep = (n - self.start).clamp(0, self.coeffs.len() as i64) as usize;
        Self::exact(self.start, self.coeffs[..keep].to_vec())
    }

    pub fn with_prec(&self, prec: i64) -> Self {
        Self::new(self.start, self.coeffs.clone(), self.prec.min(prec))
    }

    pub fn add(&self, other: &Series) -> Series {
        let prec = self.prec.min(other.prec);
        if self.coeffs.is_empty() {
            return other.with_prec(prec);
        }
        if other.coeffs.is_empty() {
            return self.with_prec(prec);
        }
        let start = self.start.min(other.start);
        let end = self.top().unwrap().max(other.top().unwrap()) + 1;
        let coeffs = (start..end.min(prec)).map(|k| self.coeff(k) + other.coeff(k)).collect();
        Series::new(start, coeffs, prec)
    }

    pub fn neg(&self) -> Series {
        Series {
            start: self.start,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            prec: self.prec,
        }
    }

    pub fn sub(&self, other: &Series) -> Series {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Q) -> Series {
        if c.is_zero() {
            return Series::new(0, Vec::new(), self.prec);
        }
        Series {
            start: self.start,
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
            prec: self.prec,
        }
    }

    /// Multiplication by `x^k`.
    pub fn shift(&self, k: i64) -> Series {
        Series {
            start: self.start + k,
            coeffs: self.coeffs.clone(),
            prec: if self.is_exact() { EXACT } else { self.prec + k },
        }
    }

    pub fn mul(&self, other: &Series) -> Series {
        let (va, vb) = (self.val_bound(), other.val_bound());
        let bound = |v: i64, p: i64| if p >= EXACT { EXACT } else { cap(v.saturating_add(p)) };
        let prec = bound(va, other.prec).min(bound(vb, self.prec));
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Series::big_o(prec);
        }
        let start = va + vb;
        let top = (self.top().unwrap() + other.top().unwrap()).min(prec.saturating_sub(1));
        if top < start {
            return Series::big_o(prec);
        }
        let len = (top - start + 1) as usize;
        let out = convolve(&self.coeffs, &other.coeffs, len);
        Series::new(start, out, prec)
    }

    /// Substitution `x ↦ q^t x`.
    pub fn dilate(&self, q: &Q, t: i64) -> Series {
        if t == 0 {
            return self.clone();
        }
        let base = pow_q(q, t);
        let mut factor = pow_q(&base, self.start);
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            coeffs.push(c * &factor);
            factor *= &base;
        }
        Series {
            start: self.start,
            coeffs,
            prec: self.prec,
        }
    }

    /// `x·d/dx`.
    pub fn theta(&self) -> Series {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * Q::from_integer((self.start + i as i64).into()))
            .collect();
        Series::new(self.start, coeffs, self.prec)
    }

    /// Multiplicative inverse. Relative precision is preserved.
    pub fn inverse(&self) -> Result<Series> {
        let v = self
            .valuation()
            .ok_or_else(|| SlopeError::Precision("cannot invert a series that is zero to precision".into()))?;
        if self.is_exact() {
            if self.coeffs.len() == 1 {
                return Ok(Series::monomial(self.coeffs[0].recip(), -v));
            }
            return Err(SlopeError::Precision(
                "inverse of a non-monomial exact series needs a target precision".into(),
            ));
        }
        let rel = self.prec - v;
        Ok(self.inverse_to(rel))
    }

    /// Inverse with `rel` known terms (relative precision), even for exact
    /// inputs.
    pub fn inverse_to(&self, rel: i64) -> Series {
        let v = self.start;
        let n = rel.max(0) as usize;
        let unit: Vec<Q> = self.coeffs.iter().take(n).cloned().collect();
        // Newton iteration y ← y(2 − uy) doubles the number of correct terms
        let mut y = vec![self.coeffs[0].recip()];
        while y.len() < n {
            let m = (2 * y.len()).min(n);
            let uy = convolve(&unit[..unit.len().min(m)], &y, m);
            let mut corr: Vec<Q> = uy.into_iter().map(|c| -c).collect();
            corr[0] += Q::from_integer(2.into());
            y = convolve(&y, &corr, m);
        }
        y.truncate(n);
        let rel_in = if self.is_exact() { rel } else { self.prec - v };
        Series::new(-v, y, -v + rel.min(rel_in))
    }

    /// Whether the coefficients below `n` are known and agree.
    pub fn agrees_mod(&self, other: &Series, n: i64) -> bool {
        if self.prec < n || other.prec < n {
            return false;
        }
        let lo = self.val_bound().min(other.val_bound());
        (lo..n).all(|k| self.coeff(k) == other.coeff(k))
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "vmin": self.start,
            "c": self.coeffs.iter().map(fmt_q).collect::<Vec<_>>(),
        });
        if !self.is_exact() {
            v["prec"] = json!(self.prec);
        }
        v
    }

    /// `{"vmin": k, "c": [...], "prec": p}`; without `prec` the series is an
    /// exact Laurent polynomial.
    pub fn from_json(v: &Value, loc: &str) -> Result<Series> {
        let vmin = v
            .get("vmin")
            .and_then(Value::as_i64)
            .ok_or_else(|| SlopeError::schema(loc, "series needs integer vmin"))?;
        let cs = v
            .get("c")
            .and_then(Value::as_array)
            .ok_or_else(|| SlopeError::schema(loc, "series needs coefficient list c"))?;
        let coeffs = cs
            .iter()
            .map(|c| match c {
                Value::String(s) => parse_q(s),
                Value::Number(n) => parse_q(&n.to_string()),
                _ => Err(SlopeError::schema(loc, "coefficients must be rational strings")),
            })
            .collect::<Result<Vec<_>>>()?;
        let prec = match v.get("prec") {
            None => EXACT,
            Some(p) => p
                .as_i64()
                .ok_or_else(|| SlopeError::schema(loc, "prec must be an integer"))?,
        };
        Ok(Series::new(vmin, coeffs, prec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qf};
    use proptest::prelude::*;

    fn s(start: i64, cs: &[i64]) -> Series {
        Series::exact(start, cs.iter().map(|&c| q(c)).collect())
    }

    #[test]
    fn normalization_and_valuation() {
        let a = s(-2, &[0, 0, 3, 0]);
        assert_eq!(a.valuation(), Some(0));
        assert_eq!(a.coeff(0), q(3));
        assert_eq!(Series::big_o(5).valuation(), None);
        assert_eq!(Series::big_o(5).val_bound(), 5);
    }

    #[test]
    fn precision_propagates_through_products() {
        let a = Series::new(-1, vec![q(1), q(1)], 10);
        let b = Series::new(-2, vec![q(1)], 4);
        let p = a.mul(&b);
        assert_eq!(p.prec(), 3);
        assert_eq!(p.valuation(), Some(-3));
    }

    #[test]
    fn dilation_and_theta() {
        let a = s(-1, &[1, 1, 1]);
        let d = a.dilate(&q(2), 1);
        assert_eq!(d.coeff(-1), qf(1, 2));
        assert_eq!(d.coeff(1), q(2));
        let t = a.theta();
        assert_eq!(t.coeff(-1), q(-1));
        assert_eq!(t.coeff(0), q(0));
        assert_eq!(t.coeff(1), q(1));
    }

    #[test]
    fn inverse_of_monomial_is_exact() {
        let a = Series::monomial(q(2), -3);
        let inv = a.inverse().unwrap();
        assert!(inv.is_exact());
        assert_eq!(a.mul(&inv), Series::one());
        assert!(Series::big_o(3).inverse().is_err());
    }

    proptest! {
        #[test]
        fn inverse_roundtrip(v in -3i64..3, cs in proptest::collection::vec(-4i64..5, 1..6)) {
            prop_assume!(cs[0] != 0);
            let a = Series::new(v, cs.iter().map(|&c| q(c)).collect(), v + 12);
            let inv = a.inverse().unwrap();
            let p = a.mul(&inv);
            prop_assert!(p.agrees_mod(&Series::one(), p.prec()));
            prop_assert_eq!(p.prec(), 12);
        }

        #[test]
        fn product_valuation_is_additive(a in proptest::collection::vec(-3i64..4, 1..5),
                                         b in proptest::collection::vec(-3i64..4, 1..5),
                                         va in -3i64..3, vb in -3i64..3) {
            let x = s(va, &a);
            let y = s(vb, &b);
            if let (Some(p), Some(r)) = (x.valuation(), y.valuation()) {
                prop_assert_eq!(x.mul(&y).valuation(), Some(p + r));
            }
        }

        #[test]
        fn dilation_is_a_ring_map(a in proptest::collection::vec(-3i64..4, 1..5),
                                  b in proptest::collection::vec(-3i64..4, 1..5), t in -2i64..3) {
            let x = s(-1, &a);
            let y = s(0, &b);
            let q2 = q(2);
            prop_assert_eq!(x.mul(&y).dilate(&q2, t), x.dilate(&q2, t).mul(&y.dilate(&q2, t)));
            prop_assert_eq!(x.add(&y).dilate(&q2, t), x.dilate(&q2, t).add(&y.dilate(&q2, t)));
        }
    }
}
