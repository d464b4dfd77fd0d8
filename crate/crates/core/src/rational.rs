//! Small helpers around `BigRational`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::str::FromStr;

use crate::error::{Result, SlopeError};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn parse_q(s: &str) -> Result<Q> {
    Q::from_str(s.trim()).map_err(|_| SlopeError::invalid(format!("not a rational: {s:?}")))
}

/// Canonical string: `p/q` in lowest terms, or `p` when integral.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// `x^n` for any integer `n` (negative exponents invert).
pub fn pow_q(x: &Q, n: i64) -> Q {
    if n >= 0 {
        num_traits::pow(x.clone(), n as usize)
    } else {
        num_traits::pow(x.recip(), (-n) as usize)
    }
}

pub fn floor_q(x: &Q) -> BigInt {
    x.floor().to_integer()
}

pub fn ceil_q(x: &Q) -> BigInt {
    x.ceil().to_integer()
}

pub fn is_integer(x: &Q) -> bool {
    x.denom().is_one()
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    a.abs().gcd(&b.abs())
}

pub fn abs_q(x: &Q) -> Q {
    x.abs()
}

pub fn is_zero(x: &Q) -> bool {
    x.is_zero()
}
