//! Euclidean lattices `(ℤʳ, G)` with covolume degrees.
//!
//! The degree of a lattice with Gram matrix `G` is `−½·log det G`, carried
//! exactly as `LogPositive(det G)`. Strict subobjects are saturated
//! sublattices with the induced metric; quotients carry the orthogonal
//! projection metric, whose Gram matrix is a Schur complement.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::category::{Budget, Certificate, Destabilizer, Enumeration, SlopeCategory};
use crate::degree::{cmp_slope, DegreeValue, SlopeKey, Variant};
use crate::error::{Result, SlopeError};
use crate::linalg::{det, inverse, rref, Matrix};
use crate::rational::{fmt_q, parse_q, pow_q, Q};

pub type IntMatrix = Vec<Vec<BigInt>>;

fn to_q(x: &BigInt) -> Q {
    Q::from_integer(x.clone())
}

fn int_rows_to_q(m: &IntMatrix) -> Matrix {
    m.iter().map(|r| r.iter().map(to_q).collect()).collect()
}

fn round_q(x: &Q) -> BigInt {
    (x + Q::new(BigInt::one(), BigInt::from(2))).floor().to_integer()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EuclideanLattice {
    gram: Matrix,
}

impl EuclideanLattice {
    /// Checks symmetry and positive definiteness (leading principal minors).
    pub fn new(gram: Matrix) -> Result<Self> {
        let r = gram.len();
        if gram.iter().any(|row| row.len() != r) {
            return Err(SlopeError::invalid("Gram matrix must be square"));
        }
        for i in 0..r {
            for j in 0..i {
                if gram[i][j] != gram[j][i] {
                    return Err(SlopeError::invalid("Gram matrix must be symmetric"));
                }
            }
        }
        for k in 1..=r {
            let minor: Matrix = gram[..k].iter().map(|row| row[..k].to_vec()).collect();
            if !det(&minor).is_positive() {
                return Err(SlopeError::invalid(format!(
                    "Gram matrix not positive definite (leading minor {k})"
                )));
            }
        }
        Ok(EuclideanLattice { gram })
    }

    pub fn standard(r: usize) -> Self {
        EuclideanLattice {
            gram: crate::linalg::identity(r),
        }
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn rank(&self) -> usize {
        self.gram.len()
    }

    pub fn det(&self) -> Q {
        det(&self.gram)
    }

    pub fn degree(&self) -> DegreeValue {
        if self.rank() == 0 {
            return DegreeValue::zero(Variant::LogPositive);
        }
        DegreeValue::LogPositive(self.det())
    }

    /// `xᵀ G y`.
    pub fn inner(&self, x: &[BigInt], y: &[BigInt]) -> Q {
        let mut acc = Q::zero();
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            for (j, yj) in y.iter().enumerate() {
                if !yj.is_zero() {
                    acc += &self.gram[i][j] * to_q(&(xi * yj));
                }
            }
        }
        acc
    }

    pub fn norm(&self, x: &[BigInt]) -> Q {
        self.inner(x, x)
    }

    /// Gram matrix of the vectors given as rows.
    pub fn induced_gram(&self, rows: &IntMatrix) -> Matrix {
        rows.iter()
            .map(|a| rows.iter().map(|b| self.inner(a, b)).collect())
            .collect()
    }

    pub fn to_json(&self) -> Value {
        json!({"gram": self.gram.iter().map(|r| r.iter().map(fmt_q).collect::<Vec<_>>()).collect::<Vec<_>>()})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let rows = v
            .get("gram")
            .and_then(Value::as_array)
            .ok_or_else(|| SlopeError::schema("gram", "expected an array of rows"))?;
        let mut gram = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            let loc = format!("gram[{i}]");
            let row = row
                .as_array()
                .ok_or_else(|| SlopeError::schema(&loc, "expected an array"))?;
            gram.push(
                row.iter()
                    .map(|x| match x {
                        Value::String(s) => parse_q(s),
                        Value::Number(n) => parse_q(&n.to_string()),
                        _ => Err(SlopeError::schema(&loc, "entries must be rational strings")),
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Self::new(gram).map_err(|e| SlopeError::schema("gram", e.to_string()))
    }
}

/// Column operations bringing `rows` (k × r, full row rank) to `[H | 0]`.
/// Returns the unimodular transform `W` with `rows · W = [H | 0]` and `H`.
fn column_reduce(rows: &IntMatrix, r: usize) -> (IntMatrix, IntMatrix) {
    let k = rows.len();
    let mut a = rows.clone();
    let mut w: IntMatrix = (0..r)
        .map(|i| (0..r).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    let col_op = |m: &mut IntMatrix, dst: usize, src: usize, f: &BigInt| {
        for row in m.iter_mut() {
            let t = &row[src] * f;
            row[dst] -= t;
        }
    };
    let swap_cols = |m: &mut IntMatrix, i: usize, j: usize| {
        for row in m.iter_mut() {
            row.swap(i, j);
        }
    };
    for i in 0..k {
        loop {
            let piv = (i..r)
                .filter(|&j| !a[i][j].is_zero())
                .min_by(|&x, &y| a[i][x].abs().cmp(&a[i][y].abs()));
            let Some(p) = piv else { break };
            swap_cols(&mut a, i, p);
            swap_cols(&mut w, i, p);
            let mut done = true;
            for j in i + 1..r {
                if a[i][j].is_zero() {
                    continue;
                }
                let f = a[i][j].div_floor(&a[i][i]);
                col_op(&mut a, j, i, &f);
                col_op(&mut w, j, i, &f);
                if !a[i][j].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
    }
    let h = a.iter().map(|row| row[..k].to_vec()).collect();
    (w, h)
}

fn int_inverse(w: &IntMatrix) -> IntMatrix {
    let inv = inverse(&int_rows_to_q(w)).expect("unimodular");
    inv.iter()
        .map(|row| row.iter().map(|x| x.to_integer()).collect())
        .collect()
}

/// Row Hermite normal form of a full-row-rank integer matrix: positive
/// pivots, entries above each pivot reduced into `[0, pivot)`.
pub fn hermite_rows(rows: &IntMatrix, r: usize) -> IntMatrix {
    let mut a = rows.clone();
    let mut row = 0;
    for c in 0..r {
        if row == a.len() {
            break;
        }
        loop {
            let piv = (row..a.len())
                .filter(|&i| !a[i][c].is_zero())
                .min_by(|&x, &y| a[x][c].abs().cmp(&a[y][c].abs()));
            let Some(p) = piv else { break };
            a.swap(row, p);
            let mut done = true;
            for i in row + 1..a.len() {
                if a[i][c].is_zero() {
                    continue;
                }
                let f = a[i][c].div_floor(&a[row][c]);
                let src = a[row].clone();
                for (x, y) in a[i].iter_mut().zip(&src) {
                    *x -= &f * y;
                }
                if !a[i][c].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if a[row][c].is_zero() {
            continue;
        }
        if a[row][c].is_negative() {
            for x in a[row].iter_mut() {
                *x = -x.clone();
            }
        }
        let src = a[row].clone();
        for i in 0..row {
            let f = a[i][c].div_floor(&src[c]);
            if f.is_zero() {
                continue;
            }
            for (x, y) in a[i].iter_mut().zip(&src) {
                *x -= &f * y;
            }
        }
        row += 1;
    }
    a.truncate(row);
    a
}

/// A sublattice of `ℤʳ` given by a row basis in Hermite normal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sublattice {
    basis: IntMatrix,
    ambient: usize,
}

impl Sublattice {
    /// Span of the given integer vectors, which must be independent.
    pub fn span(ambient: usize, vectors: &IntMatrix) -> Result<Self> {
        if vectors.iter().any(|v| v.len() != ambient) {
            return Err(SlopeError::invalid("vector length differs from the lattice rank"));
        }
        let (_, piv) = rref(&int_rows_to_q(vectors), ambient);
        if piv.len() != vectors.len() {
            return Err(SlopeError::invalid("sublattice generators are linearly dependent"));
        }
        Ok(Sublattice {
            basis: hermite_rows(vectors, ambient),
            ambient,
        })
    }

    pub fn whole(ambient: usize) -> Self {
        Sublattice {
            basis: (0..ambient)
                .map(|i| (0..ambient).map(|j| BigInt::from((i == j) as i64)).collect())
                .collect(),
            ambient,
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &IntMatrix {
        &self.basis
    }

    /// Index of the sublattice in its saturation; `1` iff saturated.
    pub fn saturation_index(&self) -> BigInt {
        if self.basis.is_empty() {
            return BigInt::one();
        }
        let (_, h) = column_reduce(&self.basis, self.ambient);
        let d = det(&int_rows_to_q(&h));
        d.abs().to_integer()
    }

    pub fn is_saturated(&self) -> bool {
        self.saturation_index().is_one()
    }

    /// `ℤʳ ∩ (ℚ-span)`.
    pub fn saturate(&self) -> Sublattice {
        if self.basis.is_empty() {
            return self.clone();
        }
        let (w, _) = column_reduce(&self.basis, self.ambient);
        let winv = int_inverse(&w);
        Sublattice {
            basis: hermite_rows(&winv[..self.rank()].to_vec(), self.ambient),
            ambient: self.ambient,
        }
    }

    /// Rows of a `ℤ`-basis of `ℤʳ` whose first rows span `self`; the rest
    /// map to a basis of the quotient. Requires saturation.
    fn completion(&self) -> IntMatrix {
        if self.basis.is_empty() {
            return Sublattice::whole(self.ambient).basis;
        }
        let (w, _) = column_reduce(&self.basis, self.ambient);
        let winv = int_inverse(&w);
        let mut out = self.basis.clone();
        out.extend(winv[self.rank()..].iter().cloned());
        out
    }

    pub fn to_json(&self) -> Value {
        json!(self
            .basis
            .iter()
            .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>())
            .collect::<Vec<_>>())
    }
}

/// Induced Gram matrix of a sublattice.
pub fn sub_lattice(l: &EuclideanLattice, s: &Sublattice) -> EuclideanLattice {
    EuclideanLattice {
        gram: l.induced_gram(&s.basis),
    }
}

pub fn degree_lattice(l: &EuclideanLattice) -> DegreeValue {
    l.degree()
}

pub fn saturate(l: &EuclideanLattice, vectors: &IntMatrix) -> Result<(Sublattice, EuclideanLattice)> {
    let s = Sublattice::span(l.rank(), vectors)?.saturate();
    let g = sub_lattice(l, &s);
    Ok((s, g))
}

/// `L / S` with the quotient norm. Its basis is the image of the
/// completion rows of `S`.
pub fn quotient_with_metric(l: &EuclideanLattice, s: &Sublattice) -> Result<EuclideanLattice> {
    if !s.is_saturated() {
        return Err(SlopeError::Quotient("sublattice is not saturated".into()));
    }
    let k = s.rank();
    let full = s.completion();
    let g = l.induced_gram(&full);
    let r = l.rank();
    if k == 0 {
        return Ok(EuclideanLattice { gram: g });
    }
    let block = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| -> Matrix {
        g[rows].iter().map(|row| row[cols.clone()].to_vec()).collect()
    };
    let a = block(0..k, 0..k);
    let b = block(0..k, k..r);
    let c = block(k..r, k..r);
    let ainv = inverse(&a)?;
    let bt = crate::linalg::transpose(&b);
    let corr = crate::linalg::mat_mul(&crate::linalg::mat_mul(&bt, &ainv), &b);
    let gram = c
        .iter()
        .zip(&corr)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect();
    Ok(EuclideanLattice { gram })
}

/// Coordinates of `x ∈ ℤʳ` on the quotient basis attached to `s`.
fn quotient_coordinates(s: &Sublattice, x: &[BigInt]) -> Vec<BigInt> {
    let full = s.completion();
    let inv = inverse(&int_rows_to_q(&full)).expect("unimodular completion");
    let r = s.ambient;
    (s.rank()..r)
        .map(|j| {
            let mut acc = Q::zero();
            for (i, xi) in x.iter().enumerate() {
                acc += to_q(xi) * &inv[i][j];
            }
            acc.to_integer()
        })
        .collect()
}

pub fn tensor_lattice(a: &EuclideanLattice, b: &EuclideanLattice) -> EuclideanLattice {
    let (ra, rb) = (a.rank(), b.rank());
    let mut gram = crate::linalg::zeros(ra * rb, ra * rb);
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    gram[i * rb + k][j * rb + l] = &a.gram[i][j] * &b.gram[k][l];
                }
            }
        }
    }
    EuclideanLattice { gram }
}

/// Lagrange–Gauss reduction of a rank-2 lattice; returns a reduced basis,
/// shortest vector first.
pub fn lagrange_gauss(l: &EuclideanLattice) -> Result<(Vec<BigInt>, Vec<BigInt>)> {
    if l.rank() != 2 {
        return Err(SlopeError::invalid("Lagrange-Gauss reduction needs rank 2"));
    }
    let mut b1 = vec![BigInt::one(), BigInt::zero()];
    let mut b2 = vec![BigInt::zero(), BigInt::one()];
    loop {
        if l.norm(&b1) > l.norm(&b2) {
            std::mem::swap(&mut b1, &mut b2);
        }
        let mu = round_q(&(l.inner(&b1, &b2) / l.norm(&b1)));
        if mu.is_zero() {
            return Ok((b1, b2));
        }
        for (x, y) in b2.iter_mut().zip(&b1) {
            *x -= &mu * y;
        }
    }
}

/// All non-zero `x` with `xᵀGx ≤ bound`, one per `±` pair (first non-zero
/// coordinate positive), sorted by norm then coordinates.
pub fn short_vectors(l: &EuclideanLattice, bound: &Q, cap: usize) -> Result<Vec<Vec<BigInt>>> {
    let r = l.rank();
    // G = Lᵀ D L with L unit upper triangular: q(x) = Σ dᵢ (xᵢ + Σ_{j>i} μᵢⱼ xⱼ)²
    let mut mu = crate::linalg::zeros(r, r);
    let mut d = vec![Q::zero(); r];
    let g = &l.gram;
    for i in 0..r {
        let mut s = g[i][i].clone();
        for k in 0..i {
            s -= &d[k] * &mu[k][i] * &mu[k][i];
        }
        d[i] = s;
        for j in i + 1..r {
            let mut s = g[i][j].clone();
            for k in 0..i {
                s -= &d[k] * &mu[k][i] * &mu[k][j];
            }
            mu[i][j] = s / &d[i];
        }
    }
    let mut out = Vec::new();
    let mut x = vec![BigInt::zero(); r];
    fn rec(
        i: usize,
        rem: Q,
        x: &mut Vec<BigInt>,
        mu: &Matrix,
        d: &[Q],
        out: &mut Vec<Vec<BigInt>>,
        cap: usize,
    ) -> bool {
        let r = x.len();
        let mut c = Q::zero();
        for j in i + 1..r {
            c += &mu[i][j] * to_q(&x[j]);
        }
        // (xᵢ + c)² ≤ rem / dᵢ
        let t = &rem / &d[i];
        let radius = t.to_f64().unwrap_or(0.0).max(0.0).sqrt();
        let cf = c.to_f64().unwrap_or(0.0);
        let lo = BigInt::from((-cf - radius).floor() as i64 - 1);
        let hi = BigInt::from((-cf + radius).ceil() as i64 + 1);
        let mut v = lo;
        while v <= hi {
            let y = to_q(&v) + &c;
            let used = &d[i] * &y * &y;
            if used <= rem {
                x[i] = v.clone();
                if i == 0 {
                    if x.iter().any(|e| !e.is_zero()) {
                        let first = x.iter().find(|e| !e.is_zero()).unwrap();
                        if first.is_positive() {
                            out.push(x.clone());
                            if out.len() > cap {
                                return false;
                            }
                        }
                    }
                } else if !rec(i - 1, &rem - &used, x, mu, d, out, cap) {
                    return false;
                }
            }
            v += 1;
        }
        x[i] = BigInt::zero();
        true
    }
    if r == 0 {
        return Ok(out);
    }
    if !rec(r - 1, bound.clone(), &mut x, &mu, &d, &mut out, cap) {
        return Err(SlopeError::BudgetExhausted(format!(
            "more than {cap} vectors of norm <= {}",
            fmt_q(bound)
        )));
    }
    out.sort_by(|a, b| l.norm(a).cmp(&l.norm(b)).then_with(|| a.cmp(b)));
    Ok(out)
}

/// `γ_k^k` (exact for `k ≤ 8`, the bound `(1 + k/4)^k` beyond).
fn hermite_power(k: usize) -> Q {
    match k {
        0 | 1 => Q::one(),
        2 => Q::new(4.into(), 3.into()),
        3 => Q::from_integer(2.into()),
        4 => Q::from_integer(4.into()),
        5 => Q::from_integer(8.into()),
        6 => Q::new(64.into(), 3.into()),
        7 => Q::from_integer(64.into()),
        8 => Q::from_integer(256.into()),
        _ => pow_q(&(Q::one() + Q::new((k as i64).into(), 4.into())), k as i64),
    }
}

/// Whether vectors of norm ≤ `bound` generate every sublattice that could
/// reach the slope of `l`. A rank-`k` sublattice `M` with `μ(M) ≥ μ(L)` has
/// `det M ≤ det L^{k/r}`, and by Minkowski's second theorem it has `k`
/// independent vectors of norm at most `γ_k^k det M / m^{k−1}`, `m` the
/// minimum of `l`.
pub fn bound_is_complete(l: &EuclideanLattice, bound: &Q, minimum: &Q) -> bool {
    let r = l.rank();
    let dl = l.det();
    (1..r).all(|k| {
        // (B m^{k−1})^r ≥ (γ_k^k)^r det^k
        let lhs = pow_q(&(bound * pow_q(minimum, k as i64 - 1)), r as i64);
        let rhs = pow_q(&hermite_power(k), r as i64) * pow_q(&dl, k as i64);
        lhs >= rhs
    })
}

/// The least integer bound satisfying [`bound_is_complete`].
pub fn complete_bound(l: &EuclideanLattice) -> Result<Q> {
    let minimum = lattice_minimum(l)?;
    let mut b = Q::from_integer(minimum.ceil().to_integer());
    let mut step = Q::one();
    while !bound_is_complete(l, &b, &minimum) {
        b += &step;
        step *= Q::from_integer(2.into());
    }
    // bisect back down on integers
    let mut lo = &b - &step / Q::from_integer(2.into());
    let mut hi = b;
    while &hi - &lo > Q::one() {
        let mid = Q::from_integer(((&lo + &hi) / Q::from_integer(2.into())).floor().to_integer());
        if bound_is_complete(l, &mid, &minimum) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Minimum non-zero norm (diagonal entries bound it from above).
pub fn lattice_minimum(l: &EuclideanLattice) -> Result<Q> {
    let diag = (0..l.rank()).map(|i| l.gram[i][i].clone()).max().unwrap_or_else(Q::one);
    let v = short_vectors(l, &diag, 1_000_000)?;
    Ok(l.norm(&v[0]))
}

pub fn default_bound(l: &EuclideanLattice) -> Q {
    let diag = (0..l.rank()).map(|i| l.gram[i][i].clone()).max().unwrap_or_else(Q::one);
    diag * Q::from_integer(l.rank().into())
}

/// Saturations of the ℚ-spans of subsets of `vectors`, of rank `< r`.
fn spans_of(l: &EuclideanLattice, vectors: &[Vec<BigInt>], cap: usize) -> Option<Vec<Sublattice>> {
    let r = l.rank();
    let mut seen: BTreeSet<Matrix> = BTreeSet::new();
    let mut level: Vec<Matrix> = Vec::new();
    let mut out = Vec::new();
    for v in vectors {
        let (red, _) = rref(&int_rows_to_q(&vec![v.clone()]), r);
        if seen.insert(red.clone()) {
            level.push(red);
        }
    }
    for k in 1..r {
        let mut next = Vec::new();
        for span in &level {
            let rows: IntMatrix = span
                .iter()
                .map(|row| {
                    let den = row.iter().fold(BigInt::one(), |a, x| a.lcm(x.denom()));
                    row.iter().map(|x| (x * to_q(&den)).to_integer()).collect()
                })
                .collect();
            out.push(Sublattice::span(r, &rows).ok()?.saturate());
            if out.len() > cap {
                return None;
            }
            if k + 1 == r {
                continue;
            }
            for v in vectors {
                let mut m = span.clone();
                m.push(v.iter().map(to_q).collect());
                let (red, piv) = rref(&m, r);
                if piv.len() == k + 1 && seen.insert(red.clone()) {
                    next.push(red);
                }
            }
        }
        level = next;
    }
    Some(out)
}

/// The lattice category; the `bound` of a [`Budget`] overrides the default
/// enumeration bound `r · max Gᵢᵢ`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LatticeCategory;

fn lattice_key(l: &EuclideanLattice, s: &Sublattice) -> Result<SlopeKey> {
    SlopeKey::new(sub_lattice(l, s).degree(), s.rank() as u64)
}

pub fn destabilizer_lattice(l: &EuclideanLattice, budget: &Budget) -> Result<Destabilizer<Sublattice>> {
    let r = l.rank();
    if r == 0 {
        return Err(SlopeError::ZeroObject);
    }
    let whole = Sublattice::whole(r);
    let whole_key = SlopeKey::new(l.degree(), r as u64)?;
    if r == 1 {
        return Ok(Destabilizer {
            sub: whole,
            slope: whole_key,
            certificate: Certificate::Complete,
        });
    }
    if r == 2 {
        let (v, _) = lagrange_gauss(l)?;
        let line = Sublattice::span(2, &vec![v])?;
        let key = lattice_key(l, &line)?;
        let (sub, slope) = if cmp_slope(&key, &whole_key)? == Ordering::Greater {
            (line, key)
        } else {
            (whole, whole_key)
        };
        return Ok(Destabilizer {
            sub,
            slope,
            certificate: Certificate::Complete,
        });
    }
    let bound = budget.bound.clone().unwrap_or_else(|| default_bound(l));
    let en = enumerate_sublattices(l, &bound, budget.max_candidates)?;
    let mut best = Destabilizer {
        sub: whole,
        slope: whole_key,
        certificate: en.certificate,
    };
    for s in en.subs {
        let key = lattice_key(l, &s)?;
        let better = match cmp_slope(&key, &best.slope)? {
            Ordering::Greater => true,
            Ordering::Equal => s.rank() > best.sub.rank(),
            Ordering::Less => false,
        };
        if better {
            best.sub = s;
            best.slope = key;
        }
    }
    Ok(best)
}

/// Saturated proper sublattices generated by vectors of norm `≤ bound`,
/// sorted by rank then basis.
pub fn enumerate_sublattices(l: &EuclideanLattice, bound: &Q, cap: usize) -> Result<Enumeration<Sublattice>> {
    let vectors = short_vectors(l, bound, cap)?;
    let Some(mut subs) = spans_of(l, &vectors, cap) else {
        return Err(SlopeError::BudgetExhausted(format!("more than {cap} candidate sublattices")));
    };
    subs.sort_by(|a, b| a.rank().cmp(&b.rank()).then_with(|| a.cmp(b)));
    subs.dedup();
    let certificate = match vectors.first() {
        Some(v) if bound_is_complete(l, bound, &l.norm(v)) => Certificate::Complete,
        _ => Certificate::heuristic(format!("norm bound {} below the completeness bound", fmt_q(bound))),
    };
    Ok(Enumeration { subs, certificate })
}

impl SlopeCategory for LatticeCategory {
    type Object = EuclideanLattice;
    type Sub = Sublattice;

    fn variant(&self) -> Variant {
        Variant::LogPositive
    }

    fn rank(&self, obj: &EuclideanLattice) -> usize {
        obj.rank()
    }

    fn degree(&self, obj: &EuclideanLattice) -> Result<DegreeValue> {
        Ok(obj.degree())
    }

    fn whole(&self, obj: &EuclideanLattice) -> Sublattice {
        Sublattice::whole(obj.rank())
    }

    fn sub_rank(&self, _obj: &EuclideanLattice, sub: &Sublattice) -> usize {
        sub.rank()
    }

    fn sub_degree(&self, obj: &EuclideanLattice, sub: &Sublattice) -> Result<DegreeValue> {
        Ok(sub_lattice(obj, sub).degree())
    }

    fn same_sub(&self, _obj: &EuclideanLattice, a: &Sublattice, b: &Sublattice) -> bool {
        a == b
    }

    fn contains(&self, _obj: &EuclideanLattice, big: &Sublattice, small: &Sublattice) -> bool {
        let mut rows = int_rows_to_q(&big.basis);
        let base = rows.len();
        for v in &small.basis {
            rows.push(v.iter().map(to_q).collect());
            if rref(&rows, big.ambient).1.len() != base {
                return false;
            }
            rows.pop();
        }
        true
    }

    fn sub_object(&self, obj: &EuclideanLattice, sub: &Sublattice) -> Result<EuclideanLattice> {
        Ok(sub_lattice(obj, sub))
    }

    fn quotient(&self, obj: &EuclideanLattice, sub: &Sublattice) -> Result<EuclideanLattice> {
        quotient_with_metric(obj, sub)
    }

    fn image_in_quotient(&self, _obj: &EuclideanLattice, base: &Sublattice, sub: &Sublattice) -> Result<Sublattice> {
        let rows: IntMatrix = sub
            .basis
            .iter()
            .map(|v| quotient_coordinates(base, v))
            .filter(|v| v.iter().any(|x| !x.is_zero()))
            .collect();
        let n = base.ambient - base.rank();
        let (_, piv) = rref(&int_rows_to_q(&rows), n);
        if piv.len() != sub.rank() - base.rank() {
            return Err(SlopeError::Quotient("image has unexpected rank".into()));
        }
        let indep: IntMatrix = hermite_rows(&rows, n);
        Ok(Sublattice::span(n, &indep)?.saturate())
    }

    fn pullback(&self, _obj: &EuclideanLattice, sub: &Sublattice, qsub: &Sublattice) -> Result<Sublattice> {
        let full = sub.completion();
        let k = sub.rank();
        let mut rows = sub.basis.clone();
        for w in &qsub.basis {
            let mut v = vec![BigInt::zero(); sub.ambient];
            for (c, row) in w.iter().zip(&full[k..]) {
                for (x, y) in v.iter_mut().zip(row) {
                    *x += c * y;
                }
            }
            rows.push(v);
        }
        Sublattice::span(sub.ambient, &rows)
    }

    fn strict_subobjects(&self, obj: &EuclideanLattice, budget: &Budget) -> Result<Enumeration<Sublattice>> {
        let bound = budget.bound.clone().unwrap_or_else(|| default_bound(obj));
        let mut en = enumerate_sublattices(obj, &bound, budget.max_candidates)?;
        // infinitely many saturated sublattices exist in rank ≥ 2
        if obj.rank() >= 2 {
            en.certificate = Certificate::heuristic("lattices have infinitely many sublattices");
        }
        Ok(en)
    }

    fn destabilizer(&self, obj: &EuclideanLattice, budget: &Budget) -> Result<Destabilizer<Sublattice>> {
        destabilizer_lattice(obj, budget)
    }
}
