//! Twisted polynomials and φ-modules over truncated Laurent series.
//!
//! The coefficient field is ℚ((x)) with the q-dilation `φ(a)(x) = a(qx)`,
//! which preserves the x-adic valuation. A twisted polynomial
//! `P = Σ a_i φ^i` multiplies by the rule `φ·a = φ(a)·φ`; a φ-module is a
//! square matrix `A` acting by `Φ(v) = A·φ(v)`.

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::degree::{DegreeValue, Variant};
use crate::error::{Result, SlopeError};
use crate::polygon::{upper_hull, NewtonPolygon};
use crate::rational::{ceil_q, fmt_q, parse_q, q, Q};
use crate::series::{Series, EXACT};

/// Default number of x-adic terms for factorizations and cyclic forms.
pub const DEFAULT_PRECISION: i64 = 40;

/// The twist `x ↦ qx`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwistSpec {
    q: Q,
}

impl TwistSpec {
    /// `q` must be a non-zero rational other than ±1 (the roots of unity in ℚ).
    pub fn new(q: Q) -> Result<Self> {
        if q.is_zero() || q.abs().is_one() {
            return Err(SlopeError::invalid(format!(
                "twist parameter q = {} must be non-zero and not a root of unity",
                fmt_q(&q)
            )));
        }
        Ok(TwistSpec { q })
    }

    pub fn q(&self) -> &Q {
        &self.q
    }

    /// `φ^t(a)`, for any integer `t`.
    pub fn apply(&self, a: &Series, t: i64) -> Series {
        a.dilate(&self.q, t)
    }

    pub fn to_json(&self) -> Value {
        json!({ "q": fmt_q(&self.q) })
    }

    pub fn from_json(v: &Value, loc: &str) -> Result<Self> {
        let raw = v
            .get("q")
            .ok_or_else(|| SlopeError::schema(loc, "twist needs q"))?;
        let qv = match raw {
            Value::String(s) => parse_q(s)?,
            Value::Number(n) => parse_q(&n.to_string())?,
            _ => return Err(SlopeError::schema(loc, "q must be a rational string")),
        };
        Self::new(qv)
    }
}

/// An element `Σ a_i φ^i` of the twisted polynomial ring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwistedPolynomial {
    coeffs: Vec<Series>,
    twist: TwistSpec,
}

impl TwistedPolynomial {
    /// Coefficients `a_0..a_n`; trailing exact zeros are dropped.
    pub fn new(mut coeffs: Vec<Series>, twist: TwistSpec) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.is_exact() && c.is_zero_to_precision()) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Series::zero());
        }
        TwistedPolynomial { coeffs, twist }
    }

    /// A monic polynomial; rejects anything whose leading coefficient is
    /// not exactly one.
    pub fn monic(coeffs: Vec<Series>, twist: TwistSpec) -> Result<Self> {
        let p = Self::new(coeffs, twist);
        if !p.is_monic() {
            return Err(SlopeError::invalid("twisted polynomial must be monic"));
        }
        if p.degree() == 0 {
            return Err(SlopeError::invalid("twisted polynomial must have degree at least 1"));
        }
        Ok(p)
    }

    pub fn one(twist: TwistSpec) -> Self {
        Self::new(vec![Series::one()], twist)
    }

    pub fn coeffs(&self) -> &[Series] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Series {
        self.coeffs.get(i).cloned().unwrap_or_else(Series::zero)
    }

    pub fn twist(&self) -> &TwistSpec {
        &self.twist
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_monic(&self) -> bool {
        let lead = self.coeffs.last().unwrap();
        lead.is_exact() && *lead == Series::one()
    }

    /// Smallest absolute precision among the coefficients.
    pub fn precision(&self) -> i64 {
        self.coeffs.iter().map(Series::prec).min().unwrap_or(EXACT)
    }

    fn check_twist(&self, other: &Self) -> Result<()> {
        if self.twist != other.twist {
            return Err(SlopeError::invalid(format!(
                "twist mismatch: q = {} against q = {}",
                fmt_q(&self.twist.q),
                fmt_q(&other.twist.q)
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_twist(other)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i).add(&other.coeff(i))).collect();
        Ok(Self::new(coeffs, self.twist.clone()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_twist(other)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i).sub(&other.coeff(i))).collect();
        Ok(Self::new(coeffs, self.twist.clone()))
    }

    /// Product in the twisted ring: `(cφ^i)(dφ^j) = c·φ^i(d)·φ^{i+j}`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_twist(other)?;
        Ok(self.mul_with(other, |s| s))
    }

    fn mul_with(&self, other: &Self, post: impl Fn(Series) -> Series) -> Self {
        let mut out = vec![Series::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_exact() && c.is_zero_to_precision() {
                continue;
            }
            for (j, d) in other.coeffs.iter().enumerate() {
                let term = post(c.mul(&self.twist.apply(d, i as i64)));
                out[i + j] = post(out[i + j].add(&term));
            }
        }
        Self::new(out, self.twist.clone())
    }

    /// Left multiplication by a scalar: `c·Σ a_i φ^i = Σ (c a_i) φ^i`.
    pub fn scalar_left(&self, c: &Series) -> Self {
        Self::new(self.coeffs.iter().map(|a| c.mul(a)).collect(), self.twist.clone())
    }

    /// Right multiplication by a scalar: `Σ a_i φ^i · c = Σ a_i φ^i(c) φ^i`.
    pub fn scalar_right(&self, c: &Series) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a.mul(&self.twist.apply(c, i as i64)))
            .collect();
        Self::new(coeffs, self.twist.clone())
    }

    fn truncate(&self, n: i64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.truncate(n)).collect(), self.twist.clone())
    }

    /// Newton polygon from the coefficient valuations. A coefficient that
    /// is zero to precision must be known to lie on or below the hull.
    pub fn newton_polygon(&self) -> Result<NewtonPolygon> {
        if !self.is_monic() || self.degree() == 0 {
            return Err(SlopeError::invalid("Newton polygon needs a monic polynomial of degree ≥ 1"));
        }
        let vals: Vec<Option<i64>> = self.coeffs.iter().map(Series::valuation).collect();
        if vals[0].is_none() {
            return Err(indeterminate(&self.coeffs[0]));
        }
        let poly = np_twisted(&vals)?;
        let n = self.degree() as i64;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero_to_precision() && !c.is_exact() {
                let j = (n - i as i64) as u64;
                if !poly.point_below(j, &DegreeValue::Rational(q(-c.prec())))? {
                    return Err(indeterminate(c));
                }
            }
        }
        Ok(poly)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "twist": self.twist.to_json(),
            "coeffs": self.coeffs.iter().map(Series::to_json).collect::<Vec<_>>(),
        })
    }

    /// `{"twist": {...}, "coeffs": [a_0, ..., a_n]}` with `a_n = 1`.
    pub fn from_json(v: &Value) -> Result<Self> {
        let twist = TwistSpec::from_json(
            v.get("twist").ok_or_else(|| SlopeError::schema("/twist", "missing twist"))?,
            "/twist",
        )?;
        let cs = v
            .get("coeffs")
            .and_then(Value::as_array)
            .ok_or_else(|| SlopeError::schema("/coeffs", "missing coefficient list"))?;
        let coeffs = cs
            .iter()
            .enumerate()
            .map(|(i, c)| Series::from_json(c, &format!("/coeffs/{i}")))
            .collect::<Result<Vec<_>>>()?;
        Self::monic(coeffs, twist)
    }
}

fn indeterminate(c: &Series) -> SlopeError {
    SlopeError::Precision(format!(
        "polygon is indeterminate: a coefficient is only known to be O(x^{})",
        c.prec()
    ))
}

/// Newton polygon of a monic twisted polynomial from the valuations
/// `v(a_0), ..., v(a_n)` (`None` for a zero coefficient): the concave hull
/// of the points `(i, −v(a_{n−i}))`.
pub fn np_twisted(valuations: &[Option<i64>]) -> Result<NewtonPolygon> {
    let n = valuations.len().checked_sub(1).filter(|n| *n >= 1).ok_or_else(|| {
        SlopeError::invalid("need the valuations of a_0..a_n with n ≥ 1")
    })?;
    if valuations[n] != Some(0) {
        return Err(SlopeError::invalid("leading coefficient must be monic (valuation 0)"));
    }
    if valuations.iter().all(Option::is_none) || valuations[0].is_none() {
        return Err(SlopeError::Precision("polygon is indeterminate: a_0 vanishes".into()));
    }
    let points: Vec<(u64, DegreeValue)> = valuations
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| ((n - i) as u64, DegreeValue::Rational(q(-v)))))
        .collect();
    upper_hull(Variant::Rational, &points)
}

/// Valuations as listed in JSON, leading coefficient first
/// (`[v(a_n), ..., v(a_0)]`, `null` for zero).
pub fn valuations_from_json(v: &Value, loc: &str) -> Result<Vec<Option<i64>>> {
    let arr = v
        .as_array()
        .ok_or_else(|| SlopeError::schema(loc, "valuations must be a list"))?;
    let mut out = arr
        .iter()
        .enumerate()
        .map(|(i, x)| match x {
            Value::Null => Ok(None),
            _ => x
                .as_i64()
                .map(Some)
                .ok_or_else(|| SlopeError::schema(format!("{loc}/{i}"), "valuation must be an integer or null")),
        })
        .collect::<Result<Vec<_>>>()?;
    out.reverse();
    Ok(out)
}

/// Output of [`slope_factor`].
#[derive(Clone, Debug)]
pub struct Factorization {
    /// Monic single-slope factors, lowest slope on the left.
    pub factors: Vec<TwistedPolynomial>,
    /// The slope of each factor.
    pub slopes: Vec<Q>,
    /// The product of the factors agrees with the input modulo `x^attained`.
    pub attained: i64,
}

impl Factorization {
    pub fn product(&self) -> Result<TwistedPolynomial> {
        let mut it = self.factors.iter();
        let mut acc = it.next().cloned().ok_or_else(|| SlopeError::invalid("empty factorization"))?;
        for f in it {
            acc = acc.mul(f)?;
        }
        Ok(acc)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "factors": self.factors.iter().map(|f| json!({
                "coeffs": f.coeffs.iter().map(Series::to_json).collect::<Vec<_>>(),
                "degree": f.degree(),
            })).collect::<Vec<_>>(),
            "slopes": self.slopes.iter().map(fmt_q).collect::<Vec<_>>(),
            "attained_precision": self.attained,
        })
    }
}

/// Factors a monic `P` as `P_{λ_r} ··· P_{λ_1}` with `λ_1 > ··· > λ_r`, each
/// factor monic with a single slope, the lowest slope leftmost. The factors
/// are exact Laurent polynomials whose product is checked to agree with
/// `P` modulo `x^precision`; failure to reach that is an error.
pub fn slope_factor(p: &TwistedPolynomial, precision: i64) -> Result<Factorization> {
    if !p.is_monic() {
        return Err(SlopeError::invalid("slope_factor needs a monic polynomial"));
    }
    if p.precision() < precision {
        return Err(SlopeError::Precision(format!(
            "input known to O(x^{}) but O(x^{precision}) was requested",
            p.precision()
        )));
    }
    p.newton_polygon()?;
    let spread: i64 = p
        .coeffs
        .iter()
        .filter_map(Series::valuation)
        .map(|v| v.abs())
        .max()
        .unwrap_or(0);
    let n = p.degree() as i64;
    let mut margin = 8 + n * (spread + 1) / 2;
    let mut last_err = None;
    for _ in 0..4 {
        let work = precision + margin;
        match factor_at(&p.truncate(work), work, precision) {
            Ok(factors) => {
                let slopes = factors
                    .iter()
                    .map(|f| single_slope(f).ok_or_else(|| SlopeError::Precision("factor is not single-sloped".into())))
                    .collect::<Result<Vec<_>>>()?;
                let fz = Factorization {
                    factors,
                    slopes,
                    attained: 0,
                };
                let prod = fz.product()?;
                let attained = agreement(&prod, p);
                if attained >= precision {
                    return Ok(Factorization { attained, ..fz });
                }
                last_err = Some(SlopeError::Precision(format!(
                    "factor product only agrees modulo x^{attained}"
                )));
            }
            Err(e @ SlopeError::Precision(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        margin *= 2;
    }
    Err(last_err.unwrap())
}

/// First exponent where two polynomials differ, capped by the precision of `p`.
fn agreement(prod: &TwistedPolynomial, p: &TwistedPolynomial) -> i64 {
    let mut best = p.precision();
    for i in 0..prod.coeffs.len().max(p.coeffs.len()) {
        let (a, b) = (prod.coeff(i), p.coeff(i));
        let diff = a.sub(&b);
        if let Some(v) = diff.valuation() {
            best = best.min(v);
        }
    }
    best
}

fn single_slope(f: &TwistedPolynomial) -> Option<Q> {
    let poly = f.newton_polygon().ok()?;
    match poly.rational_breaks()?.as_slice() {
        [(s, _)] => Some(s.clone()),
        _ => None,
    }
}

fn factor_at(p: &TwistedPolynomial, work: i64, target: i64) -> Result<Vec<TwistedPolynomial>> {
    let poly = p.newton_polygon()?;
    let breaks = poly.rational_breaks().unwrap();
    if breaks.len() == 1 {
        return Ok(vec![p.clone()]);
    }
    let (lambda, k) = breaks.last().cloned().unwrap();
    let (a, b) = split_lowest(p, &lambda, k as usize, work, target)?;
    let mut out = vec![a];
    out.extend(factor_at(&b, work, target)?);
    Ok(out)
}

/// Weight `v(c) − λ·i` of the terms of `e` below `x^limit`; `None` when all
/// of them vanish.
fn weight(e: &TwistedPolynomial, lambda: &Q, limit: i64) -> Option<Q> {
    e.coeffs
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            c.truncate(limit)
                .valuation()
                .map(|v| q(v) - lambda * q(i as i64))
        })
        .min()
}

fn inverse_trunc(c: &Series, work: i64) -> Result<Series> {
    let v = c
        .valuation()
        .ok_or_else(|| SlopeError::Precision("cannot invert a coefficient that vanishes to precision".into()))?;
    Ok(c.inverse_to(work + v.abs() + 1).truncate(work + v.abs()))
}

/// Terms `c x^e φ^i` of `p` with weight `e − λi` in `[lo, hi)`.
fn layer(p: &TwistedPolynomial, lambda: &Q, lo: &Q, hi: &Q) -> TwistedPolynomial {
    let coeffs = p
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let shift = lambda * q(i as i64);
            let from = ceil_q(&(lo + &shift)).to_i64().unwrap();
            let to = ceil_q(&(hi + &shift)).to_i64().unwrap();
            c.truncate(to).sub(&c.truncate(from))
        })
        .collect();
    TwistedPolynomial::new(coeffs, p.twist.clone())
}

/// Splits `P = A·B` with `A` monic of the lowest slope `λ` and degree `k`.
///
/// With the weight `w(cφ^i) = v(c) − λi`, the initial guess `A = Σ_{i≤k} a_iφ^i`,
/// `B = 1` leaves a residual `E = P − AB` of weight `w(A) + g` for some
/// `g > 0`. Each round solves `A·δB + δA ≡ E` on the lowest weight layer
/// of `E`, of width `g`, and updates `E` incrementally, so every round
/// raises the weight of the residual by at least `g` while all corrections
/// stay short.
fn split_lowest(
    p: &TwistedPolynomial,
    lambda: &Q,
    k: usize,
    work: i64,
    target: i64,
) -> Result<(TwistedPolynomial, TwistedPolynomial)> {
    let twist = p.twist.clone();
    let n = p.degree();
    let cut = |t: TwistedPolynomial| t.truncate(work);
    let mut a = TwistedPolynomial::new(p.coeffs[..=k].to_vec(), twist.clone());
    let mut b = TwistedPolynomial::one(twist.clone());
    let mut e = TwistedPolynomial::new(
        (0..=n).map(|i| if i <= k { Series::zero() } else { p.coeffs[i].clone() }).collect(),
        twist.clone(),
    );
    let check = target + (work - target) / 2;
    let c_a = weight(&a, lambda, work).ok_or_else(|| SlopeError::Precision("lowest segment vanishes".into()))?;
    let Some(w0) = weight(&e, lambda, work) else {
        return normalize(a, b, k, n - k, work);
    };
    let g = &w0 - &c_a;
    if g <= Q::zero() {
        return Err(SlopeError::invalid("lowest slope segment is not separated from the others"));
    }
    let span = q(work) + lambda.abs() * q(n as i64) + w0.abs();
    let cap = ceil_q(&(span / &g)).to_i64().unwrap_or(i64::MAX).saturating_add(64);
    let mut prev: Option<Q> = None;
    for _ in 0..cap {
        let Some(w) = weight(&e, lambda, check) else {
            return normalize(a, b, k, n - k, work);
        };
        if prev.as_ref().is_some_and(|pw| w <= *pw) {
            return Err(SlopeError::Precision(
                "residual weight stopped increasing during the factor lift".into(),
            ));
        }
        let hi = &w + &g;
        let low = layer(&e, lambda, &w, &hi);
        let (quot, rem) = divide_layer(&low, &a, k, lambda, (&w, &hi), (&(&w - &c_a), &(&hi - &c_a)))?;
        let q0 = quot.coeff(0);
        let mut db = quot;
        db.coeffs[0] = Series::zero();
        let db = TwistedPolynomial::new(db.coeffs, twist.clone());
        let da = rem.add(&layer(&a.scalar_right(&q0), lambda, &w, &hi))?;
        // E − A·δB − δA·(B + δB), with B updated afterwards
        let b_next = b.add(&db)?;
        let step = cut(a.mul_with(&db, |s| s.truncate(work))).add(&cut(da.mul_with(&b_next, |s| s.truncate(work))))?;
        e = cut(e.sub(&step)?);
        a = cut(a.add(&da)?);
        b = b_next;
        prev = Some(w);
    }
    Err(SlopeError::Precision(format!(
        "factor lift did not converge within {cap} rounds"
    )))
}

/// Solves `A·Q + R ≡ E` modulo weight `≥ hi` for `E` supported on the
/// weight window `[w, hi)`, with `deg R < k`. Quotient terms live in the
/// window shifted by `w(A)`.
fn divide_layer(
    e: &TwistedPolynomial,
    a: &TwistedPolynomial,
    k: usize,
    lambda: &Q,
    (lo, hi): (&Q, &Q),
    (qlo, qhi): (&Q, &Q),
) -> Result<(TwistedPolynomial, TwistedPolynomial)> {
    let twist = a.twist.clone();
    let width = ceil_q(&(hi - lo)).to_i64().unwrap() + 2;
    let lead = &a.coeffs[k];
    let v = lead
        .valuation()
        .ok_or_else(|| SlopeError::Precision("leading coefficient vanishes to precision".into()))?;
    let lead_inv = lead.inverse_to(width).truncate(-v + width);
    let mut rem = e.clone();
    let top = e.degree();
    let mut quot = vec![Series::zero(); top.saturating_sub(k) + 1];
    if top >= k {
        for d in (0..=top - k).rev() {
            let t = rem.coeff(k + d);
            if t.is_zero_to_precision() {
                continue;
            }
            let raw = twist.apply(&t.mul(&lead_inv), -(k as i64));
            let mut mono = vec![Series::zero(); d + 1];
            mono[d] = raw;
            let c = layer(&TwistedPolynomial::new(mono, twist.clone()), lambda, qlo, qhi);
            let step = layer(&a.mul_with(&c, |s| s), lambda, lo, hi);
            rem = rem.sub(&step)?;
            if rem.coeffs.len() > k + d {
                rem.coeffs[k + d] = Series::zero();
            }
            rem = TwistedPolynomial::new(rem.coeffs, twist.clone());
            quot[d] = c.coeff(d);
        }
    }
    Ok((TwistedPolynomial::new(quot, twist), rem))
}

/// Rescales `A·B` so that `B` is monic: `A·B = (A·β)(β⁻¹·B)`.
fn normalize(
    a: TwistedPolynomial,
    b: TwistedPolynomial,
    k: usize,
    m: usize,
    work: i64,
) -> Result<(TwistedPolynomial, TwistedPolynomial)> {
    if b.degree() != m || a.degree() != k {
        return Err(SlopeError::Precision("factor degrees do not match the polygon".into()));
    }
    let beta = b.coeffs[m].clone();
    let beta_inv = inverse_trunc(&beta, work)?;
    let mut bm = b.scalar_left(&beta_inv).truncate(work);
    let mut am = a.scalar_right(&beta).truncate(work);
    bm.coeffs[m] = Series::one();
    am.coeffs[k] = Series::one();
    Ok((am, bm))
}

/// Monic single-slope polynomial of degree `d` and slope `λ` (with `λd`
/// integral) with small random coefficients.
pub fn random_single_slope<R: Rng>(rng: &mut R, d: usize, lambda: &Q, twist: &TwistSpec) -> Result<TwistedPolynomial> {
    let top = lambda * q(d as i64);
    if !top.is_integer() || d == 0 {
        return Err(SlopeError::invalid("slope times degree must be an integer, degree ≥ 1"));
    }
    let mut coeffs = Vec::with_capacity(d + 1);
    for i in 0..d {
        let floor_v = ceil_q(&(-(lambda * q((d - i) as i64)))).to_i64().unwrap();
        if i > 0 && rng.gen_bool(0.4) {
            coeffs.push(Series::zero());
            continue;
        }
        let start = if i == 0 { floor_v } else { floor_v + rng.gen_range(0..2) };
        let len = rng.gen_range(1..=3);
        let mut cs: Vec<Q> = (0..len).map(|_| q(rng.gen_range(-3..=3))).collect();
        if cs[0].is_zero() {
            cs[0] = q(1 + rng.gen_range(0..3));
        }
        coeffs.push(Series::exact(start, cs));
    }
    coeffs.push(Series::one());
    TwistedPolynomial::monic(coeffs, twist.clone())
}

/// A φ-module given by the matrix of `Φ` in a basis: `Φ(v) = A·φ(v)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhiMatrix {
    rows: Vec<Vec<Series>>,
    twist: TwistSpec,
}

impl PhiMatrix {
    pub fn new(rows: Vec<Vec<Series>>, twist: TwistSpec) -> Result<Self> {
        let r = rows.len();
        if r == 0 || rows.iter().any(|row| row.len() != r) {
            return Err(SlopeError::invalid("Φ must be a non-empty square matrix"));
        }
        let m = PhiMatrix { rows, twist };
        if m.det().is_zero_to_precision() {
            return Err(SlopeError::Precision("det Φ vanishes to precision".into()));
        }
        Ok(m)
    }

    pub fn diagonal(entries: Vec<Series>, twist: TwistSpec) -> Result<Self> {
        let r = entries.len();
        let rows = entries
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                let mut row = vec![Series::zero(); r];
                row[i] = d;
                row
            })
            .collect();
        Self::new(rows, twist)
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Series>] {
        &self.rows
    }

    pub fn twist(&self) -> &TwistSpec {
        &self.twist
    }

    pub fn det(&self) -> Series {
        det_series(&self.rows)
    }

    fn diagonal_entries(&self) -> Option<Vec<Series>> {
        let r = self.rank();
        for i in 0..r {
            for j in 0..r {
                let c = &self.rows[i][j];
                if i != j && !(c.is_exact() && c.is_zero_to_precision()) {
                    return None;
                }
            }
        }
        Some((0..r).map(|i| self.rows[i][i].clone()).collect())
    }

    /// `Φ(v) = A·φ(v)`.
    pub fn apply(&self, v: &[Series]) -> Vec<Series> {
        let tv: Vec<Series> = v.iter().map(|c| self.twist.apply(c, 1)).collect();
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&tv)
                    .fold(Series::zero(), |acc, (a, c)| acc.add(&a.mul(c)))
            })
            .collect()
    }

    /// `Φ_{M⊗N} = A_M ⊗ A_N` in the product basis.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.twist != other.twist {
            return Err(SlopeError::invalid("tensor of φ-modules with different twists"));
        }
        let (r, s) = (self.rank(), other.rank());
        let mut rows = vec![vec![Series::zero(); r * s]; r * s];
        for i in 0..r {
            for j in 0..r {
                for k in 0..s {
                    for l in 0..s {
                        rows[i * s + k][j * s + l] = self.rows[i][j].mul(&other.rows[k][l]);
                    }
                }
            }
        }
        Self::new(rows, self.twist.clone())
    }

    /// The dual module, with matrix `(Aᵀ)⁻¹`, computed to `precision`.
    pub fn dual(&self, precision: i64) -> Result<Self> {
        let r = self.rank();
        let det = self.det();
        let det_inv = if det.is_exact() && det.coeffs_len() == 1 {
            det.inverse()?
        } else {
            let v = det.valuation().unwrap();
            det.inverse_to(precision + v.abs() + 1)
        };
        // (Aᵀ)⁻¹ = cof(A) / det A
        let mut rows = vec![vec![Series::zero(); r]; r];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let minor: Vec<Vec<Series>> = (0..r)
                    .filter(|&a| a != i)
                    .map(|a| (0..r).filter(|&b| b != j).map(|b| self.rows[a][b].clone()).collect())
                    .collect();
                let mut c = if r == 1 { Series::one() } else { det_series(&minor) };
                if (i + j) % 2 == 1 {
                    c = c.neg();
                }
                *cell = c.mul(&det_inv);
            }
        }
        Self::new(rows, self.twist.clone())
    }

    /// Cyclic form `P` of the module: for a cyclic vector `e` with Krylov
    /// basis `e, Φe, ..., Φ^{r−1}e`, `P = φ^r − Σ c_i φ^i` where
    /// `Φ^r e = Σ c_i Φ^i e`.
    pub fn cyclic_form(&self, precision: i64) -> Result<TwistedPolynomial> {
        let r = self.rank();
        for e in candidate_vectors(r) {
            let mut krylov = vec![e];
            for _ in 0..r {
                let next = self.apply(krylov.last().unwrap());
                krylov.push(next);
            }
            let cols = &krylov[..r];
            let kmat: Vec<Vec<Series>> = (0..r).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect();
            let d = det_series(&kmat);
            if d.is_zero_to_precision() {
                continue;
            }
            let d_inv = if d.is_exact() && d.coeffs_len() == 1 {
                d.inverse()?
            } else {
                let v = d.valuation().unwrap();
                d.inverse_to(precision + v.abs() + 1)
            };
            let mut coeffs = Vec::with_capacity(r + 1);
            for i in 0..r {
                let mut m = kmat.clone();
                for (row, t) in m.iter_mut().zip(&krylov[r]) {
                    row[i] = t.clone();
                }
                coeffs.push(det_series(&m).mul(&d_inv).neg());
            }
            coeffs.push(Series::one());
            return TwistedPolynomial::monic(coeffs, self.twist.clone());
        }
        Err(SlopeError::Precision("no cyclic vector found among the candidates".into()))
    }

    /// Newton polygon of the module: the breaks `−v(d_i)` for a diagonal
    /// matrix, otherwise the polygon of the cyclic form.
    pub fn newton_polygon(&self, precision: i64) -> Result<NewtonPolygon> {
        if let Some(diag) = self.diagonal_entries() {
            let breaks = diag
                .iter()
                .map(|d| {
                    d.valuation()
                        .map(|v| (q(-v), 1))
                        .ok_or_else(|| indeterminate(d))
                })
                .collect::<Result<Vec<_>>>()?;
            return NewtonPolygon::from_rational_breaks(&breaks);
        }
        self.cyclic_form(precision)?.newton_polygon()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "twist": self.twist.to_json(),
            "matrix": self.rows.iter().map(|r| r.iter().map(Series::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let twist = TwistSpec::from_json(
            v.get("twist").ok_or_else(|| SlopeError::schema("/twist", "missing twist"))?,
            "/twist",
        )?;
        let rows = v
            .get("matrix")
            .and_then(Value::as_array)
            .ok_or_else(|| SlopeError::schema("/matrix", "missing matrix"))?;
        let rows = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.as_array()
                    .ok_or_else(|| SlopeError::schema(format!("/matrix/{i}"), "row must be a list"))?
                    .iter()
                    .enumerate()
                    .map(|(j, c)| Series::from_json(c, &format!("/matrix/{i}/{j}")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, twist)
    }
}

fn candidate_vectors(r: usize) -> Vec<Vec<Series>> {
    let mut out: Vec<Vec<Series>> = (0..r)
        .rev()
        .map(|i| {
            let mut v = vec![Series::zero(); r];
            v[i] = Series::one();
            v
        })
        .collect();
    out.push(vec![Series::one(); r]);
    out.push((0..r).map(|i| Series::constant(q(i as i64 + 1))).collect());
    out.push((0..r).map(|i| Series::monomial(Q::one(), i as i64)).collect());
    out
}

/// Determinant by the permutation expansion, organized over column subsets
/// so that no division is needed.
fn det_series(m: &[Vec<Series>]) -> Series {
    let r = m.len();
    let mut dp: Vec<Option<Series>> = vec![None; 1 << r];
    dp[0] = Some(Series::one());
    for mask in 0usize..(1 << r) {
        let row = mask.count_ones() as usize;
        if row >= r {
            continue;
        }
        let Some(cur) = dp[mask].clone() else { continue };
        for col in 0..r {
            if mask & (1 << col) != 0 {
                continue;
            }
            let entry = &m[row][col];
            if entry.is_exact() && entry.is_zero_to_precision() {
                continue;
            }
            // sign: number of used columns to the right of `col`
            let inv = (mask >> (col + 1)).count_ones();
            let mut term = cur.mul(entry);
            if inv % 2 == 1 {
                term = term.neg();
            }
            let slot = &mut dp[mask | (1 << col)];
            *slot = Some(match slot.take() {
                Some(s) => s.add(&term),
                None => term,
            });
        }
    }
    dp[(1 << r) - 1].clone().unwrap_or_else(Series::zero)
}

/// Degree `−v(det Φ)` of a φ-module.
pub fn dm_degree(phi: &PhiMatrix) -> Result<DegreeValue> {
    let d = phi.det();
    let v = d
        .valuation()
        .ok_or_else(|| SlopeError::Precision("det Φ vanishes to precision".into()))?;
    Ok(DegreeValue::Rational(q(-v)))
}

/// Degree `n − v(c)` of a rank-one filtered φ-module with filtration jump
/// `n` and Frobenius `c`.
pub fn fil_phi_degree(n: i64, c_valuation: i64) -> DegreeValue {
    DegreeValue::Rational(q(n) - q(c_valuation))
}

/// The matrix `((1/x, 1/x), (0, 1))`, twist `q = 2`, whose module has
/// breaks 1 and 0 while its filtration by slopes does not split in
/// this basis.
pub fn adams_sauloy() -> PhiMatrix {
    let xinv = Series::monomial(Q::one(), -1);
    PhiMatrix::new(
        vec![vec![xinv.clone(), xinv], vec![Series::zero(), Series::one()]],
        TwistSpec::new(q(2)).unwrap(),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::{polygon_combine, CombineMode};
    use crate::rational::qf;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two() -> TwistSpec {
        TwistSpec::new(q(2)).unwrap()
    }

    fn x(k: i64) -> Series {
        Series::monomial(Q::one(), k)
    }

    fn c(n: i64) -> Series {
        Series::constant(q(n))
    }

    fn poly(cs: Vec<Series>) -> TwistedPolynomial {
        TwistedPolynomial::new(cs, two())
    }

    fn breaks(p: &NewtonPolygon) -> Vec<(Q, u64)> {
        p.rational_breaks().unwrap()
    }

    #[test]
    fn twist_rejects_roots_of_unity() {
        assert!(TwistSpec::new(q(1)).is_err());
        assert!(TwistSpec::new(q(-1)).is_err());
        assert!(TwistSpec::new(q(0)).is_err());
        assert!(TwistSpec::new(qf(1, 3)).is_ok());
    }

    #[test]
    fn np_examples() {
        let p = np_twisted(&[Some(-1), Some(-1), Some(0)]).unwrap();
        assert_eq!(breaks(&p), vec![(q(1), 1), (q(0), 1)]);
        let p = np_twisted(&[Some(0), Some(2), None, Some(0)]).unwrap();
        assert_eq!(breaks(&p), vec![(q(0), 3)]);
        assert!(np_twisted(&[None, Some(0)]).is_err());
        assert!(np_twisted(&[Some(0), Some(1)]).is_err());
    }

    #[test]
    fn valuations_json_lists_leading_first() {
        let v = valuations_from_json(&json!([0, -1, -1]), "/valuations").unwrap();
        assert_eq!(v, vec![Some(-1), Some(-1), Some(0)]);
        assert_eq!(breaks(&np_twisted(&v).unwrap()), vec![(q(1), 1), (q(0), 1)]);
    }

    #[test]
    fn twisted_mul_examples() {
        // (φ − x⁻¹)(φ − 1) = φ² − (1 + x⁻¹)φ + x⁻¹
        let l = poly(vec![x(-1).neg(), Series::one()]);
        let r = poly(vec![c(-1), Series::one()]);
        let p = l.mul(&r).unwrap();
        assert_eq!(p, poly(vec![x(-1), c(-1).sub(&x(-1)), Series::one()]));
        assert_eq!(p.mul(&TwistedPolynomial::one(two())).unwrap(), p);
        // (φ − a)(φ − b) = φ² − (φ(b) + a)φ + ab
        let (a, b) = (x(2).scale(&q(3)), x(-1).scale(&q(5)));
        let p = poly(vec![a.neg(), Series::one()])
            .mul(&poly(vec![b.neg(), Series::one()]))
            .unwrap();
        let expect = poly(vec![a.mul(&b), b.dilate(&q(2), 1).add(&a).neg(), Series::one()]);
        assert_eq!(p, expect);
    }

    #[test]
    fn twist_mismatch_is_an_error() {
        let other = TwistSpec::new(q(3)).unwrap();
        let a = TwistedPolynomial::one(two());
        let b = TwistedPolynomial::one(other);
        assert!(a.mul(&b).is_err());
    }

    #[test]
    fn factor_single_slope_is_unchanged() {
        let p = poly(vec![x(-2), x(-1).scale(&q(3)), Series::one()]);
        let f = slope_factor(&p, 30).unwrap();
        assert_eq!(f.factors, vec![p]);
        assert_eq!(f.slopes, vec![q(1)]);
    }

    #[test]
    fn factor_reverses_slope_order() {
        let p = poly(vec![x(-1), c(-1).sub(&x(-1)), Series::one()]);
        let f = slope_factor(&p, 40).unwrap();
        assert_eq!(f.slopes, vec![q(0), q(1)]);
        assert!(f.factors.iter().all(|g| g.degree() == 1 && g.is_monic()));
        assert!(f.attained >= 40);
        let prod = f.product().unwrap();
        for i in 0..=2 {
            assert!(prod.coeff(i).truncate(40) == p.coeff(i).truncate(40));
        }
    }

    #[test]
    fn factor_three_slopes_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fs: Vec<TwistedPolynomial> = [2, 0, 1]
            .iter()
            .map(|s| random_single_slope(&mut rng, 1, &q(*s), &two()).unwrap())
            .collect();
        let p = fs[0].mul(&fs[1]).unwrap().mul(&fs[2]).unwrap();
        let f = slope_factor(&p, 40).unwrap();
        assert_eq!(f.slopes, vec![q(0), q(1), q(2)]);
    }

    #[test]
    fn factor_rejects_insufficient_input() {
        let p = poly(vec![x(-1).with_prec(5), c(-1).sub(&x(-1)), Series::one()]);
        assert!(matches!(slope_factor(&p, 40), Err(SlopeError::Precision(_))));
    }

    #[test]
    fn dm_degree_examples() {
        let d = PhiMatrix::diagonal(vec![x(1), Series::one()], two()).unwrap();
        assert_eq!(dm_degree(&d).unwrap(), DegreeValue::Rational(q(-1)));
        let id = PhiMatrix::diagonal(vec![Series::one(), Series::one()], two()).unwrap();
        assert_eq!(dm_degree(&id).unwrap(), DegreeValue::Rational(q(0)));
        let d = PhiMatrix::diagonal(vec![x(-1), x(-2)], two()).unwrap();
        assert_eq!(dm_degree(&d).unwrap(), DegreeValue::Rational(q(3)));
    }

    #[test]
    fn fil_phi_examples() {
        assert_eq!(fil_phi_degree(0, 0), DegreeValue::Rational(q(0)));
        assert_eq!(fil_phi_degree(1, 1), DegreeValue::Rational(q(0)));
        assert_eq!(fil_phi_degree(2, -1), DegreeValue::Rational(q(3)));
    }

    #[test]
    fn adams_sauloy_cyclic_form() {
        let m = adams_sauloy();
        let p = m.cyclic_form(DEFAULT_PRECISION).unwrap();
        // φ² − (1 + 1/(2x))φ + 1/(2x)
        let half = x(-1).scale(&qf(1, 2));
        assert_eq!(p, poly(vec![half.clone(), c(1).add(&half).neg(), Series::one()]));
        let np = m.newton_polygon(DEFAULT_PRECISION).unwrap();
        assert_eq!(breaks(&np), vec![(q(1), 1), (q(0), 1)]);
        assert_eq!(dm_degree(&m).unwrap(), DegreeValue::Rational(q(1)));
    }

    #[test]
    fn det_of_general_matrix() {
        let m = vec![
            vec![c(1), c(2), c(3)],
            vec![c(0), x(1), c(1)],
            vec![c(1), c(0), c(1)],
        ];
        // 1(x − 0) − 2(0 − 1) + 3(0 − x) = 2 − 2x
        assert_eq!(det_series(&m), c(2).sub(&x(1).scale(&q(2))));
    }

    #[test]
    fn dual_of_general_matrix_inverts() {
        let m = adams_sauloy();
        let d = m.dual(20).unwrap();
        // Aᵀ·(Aᵀ)⁻¹ = 1
        for i in 0..2 {
            for j in 0..2 {
                let s = (0..2).fold(Series::zero(), |acc, k| acc.add(&m.rows[k][i].mul(&d.rows[k][j])));
                let expect = if i == j { c(1) } else { Series::zero() };
                assert!(s.sub(&expect).truncate(15).is_zero_to_precision());
            }
        }
    }

    #[test]
    fn phi_json_roundtrip() {
        let m = adams_sauloy();
        assert_eq!(PhiMatrix::from_json(&m.to_json()).unwrap(), m);
        let p = m.cyclic_form(10).unwrap();
        assert_eq!(TwistedPolynomial::from_json(&p.to_json()).unwrap(), p);
    }

    fn diag_strategy() -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(-4i64..5, 1..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn factorization_roundtrip(seed in any::<u64>(), k in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut slopes: Vec<i64> = vec![-1, 0, 1, 2];
            for i in (1..slopes.len()).rev() {
                slopes.swap(i, rng.gen_range(0..=i));
            }
            slopes.truncate(k);
            let mut p = TwistedPolynomial::one(two());
            for s in &slopes {
                let d = rng.gen_range(1..=2);
                p = p.mul(&random_single_slope(&mut rng, d, &q(*s), &two()).unwrap()).unwrap();
            }
            let f = slope_factor(&p, 30).unwrap();
            let np = p.newton_polygon().unwrap();
            let mut expect: Vec<Q> = np.rational_breaks().unwrap().iter().rev().map(|b| b.0.clone()).collect();
            expect.dedup();
            prop_assert_eq!(&f.slopes, &expect);
            let degs: Vec<u64> = f.factors.iter().map(|g| g.degree() as u64).collect();
            let mults: Vec<u64> = np.rational_breaks().unwrap().iter().rev().map(|b| b.1).collect();
            prop_assert_eq!(degs, mults);
            prop_assert!(f.attained >= 30);
        }

        #[test]
        fn polygon_additive_under_product(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let make = |rng: &mut ChaCha8Rng| {
                let mut p = TwistedPolynomial::one(two());
                for _ in 0..rng.gen_range(1..=2) {
                    let s = rng.gen_range(-2i64..3);
                    p = p.mul(&random_single_slope(rng, 1, &q(s), &two()).unwrap()).unwrap();
                }
                p
            };
            let (a, b) = (make(&mut rng), make(&mut rng));
            let lhs = a.mul(&b).unwrap().newton_polygon().unwrap();
            let rhs = polygon_combine(&a.newton_polygon().unwrap(), &b.newton_polygon().unwrap(), CombineMode::DirectSum).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn diagonal_tensor_and_dual(a in diag_strategy(), b in diag_strategy()) {
            let mk = |v: &[i64]| PhiMatrix::diagonal(v.iter().map(|k| x(*k).scale(&q(3))).collect(), two()).unwrap();
            let (ma, mb) = (mk(&a), mk(&b));
            let t = ma.tensor(&mb).unwrap();
            let (da, db) = (dm_degree(&ma).unwrap(), dm_degree(&mb).unwrap());
            let expect = da.scale(b.len() as i64).add(&db.scale(a.len() as i64)).unwrap();
            prop_assert_eq!(dm_degree(&t).unwrap(), expect);
            let (pa, pb) = (ma.newton_polygon(10).unwrap(), mb.newton_polygon(10).unwrap());
            prop_assert_eq!(t.newton_polygon(10).unwrap(), polygon_combine(&pa, &pb, CombineMode::TensorMult).unwrap());
            let dual = ma.dual(10).unwrap();
            prop_assert_eq!(dual.newton_polygon(10).unwrap(), polygon_combine(&pa, &pa, CombineMode::Dual).unwrap());
        }
    }
}
