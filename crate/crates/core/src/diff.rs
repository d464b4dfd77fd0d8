//! Formal differential operators and modules over ℚ((x)) with `∂ = x d/dx`.
//!
//! An operator `P = ∂ⁿ − a_{n−1}∂ⁿ⁻¹ − ··· − a_0` is stored by its
//! coefficients or by their valuations alone. A module is the matrix `A`
//! of `∇(∂)` on a basis, so `∇(f) = A·f + θ(f)` on coordinate vectors.

use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::degree::{DegreeValue, Variant};
use crate::error::{Result, SlopeError};
use crate::polygon::{upper_hull, NewtonPolygon};
use crate::rational::{ceil_q, floor_q, fmt_q, q, Q};
use crate::series::{Series, EXACT};

/// Default number of operator powers for the spectral estimate.
pub const KATZ_N_MAX: usize = 64;
/// Default number of lattice steps for the Gérard–Levelt sequence.
pub const GL_N_MAX: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
enum OperatorData {
    Coeffs(Vec<Series>),
    Valuations(Vec<Option<i64>>),
}

/// `P = ∂ⁿ − Σ a_i ∂^i`, monic in `∂`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferentialOperator {
    data: OperatorData,
}

impl DifferentialOperator {
    /// From `a_0..a_{n−1}`.
    pub fn from_coeffs(coeffs: Vec<Series>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(SlopeError::invalid("operator order must be at least 1"));
        }
        Ok(DifferentialOperator {
            data: OperatorData::Coeffs(coeffs),
        })
    }

    /// From `v(a_0)..v(a_{n−1})`, `None` for a zero coefficient.
    pub fn from_valuations(vals: Vec<Option<i64>>) -> Result<Self> {
        if vals.is_empty() {
            return Err(SlopeError::invalid("operator order must be at least 1"));
        }
        Ok(DifferentialOperator {
            data: OperatorData::Valuations(vals),
        })
    }

    pub fn order(&self) -> usize {
        match &self.data {
            OperatorData::Coeffs(c) => c.len(),
            OperatorData::Valuations(v) => v.len(),
        }
    }

    pub fn coeffs(&self) -> Option<&[Series]> {
        match &self.data {
            OperatorData::Coeffs(c) => Some(c),
            OperatorData::Valuations(_) => None,
        }
    }

    /// `v(a_0)..v(a_{n−1})`; an inexact coefficient with no known term is
    /// an error because its valuation is unknown.
    pub fn valuations(&self) -> Result<Vec<Option<i64>>> {
        match &self.data {
            OperatorData::Valuations(v) => Ok(v.clone()),
            OperatorData::Coeffs(cs) => cs
                .iter()
                .enumerate()
                .map(|(i, c)| match c.valuation() {
                    Some(v) => Ok(Some(v)),
                    None if c.is_exact() => Ok(None),
                    // a tail O(x^p) with p ≥ 0 cannot create a pole
                    None if c.prec() >= 0 => Ok(Some(c.prec())),
                    None => Err(SlopeError::Precision(format!(
                        "valuation of a_{i} unknown: only O(x^{}) is known",
                        c.prec()
                    ))),
                })
                .collect(),
        }
    }

    /// Companion matrix on the basis `e, ∇e, ..., ∇^{n−1}e`.
    pub fn companion(&self) -> Result<DifferentialModule> {
        let cs = self
            .coeffs()
            .ok_or_else(|| SlopeError::Capability("companion matrix needs coefficient series".into()))?;
        let n = cs.len();
        let mut m = vec![vec![Series::zero(); n]; n];
        for i in 0..n {
            if i + 1 < n {
                m[i + 1][i] = Series::one();
            }
            m[i][n - 1] = cs[i].clone();
        }
        DifferentialModule::new(m)
    }

    pub fn to_json(&self) -> Value {
        match &self.data {
            OperatorData::Coeffs(c) => json!({
                "n": c.len(),
                "coeffs": c.iter().map(Series::to_json).collect::<Vec<_>>(),
            }),
            OperatorData::Valuations(v) => json!({ "valuations": v }),
        }
    }

    /// `{"coeffs": [a_0, ...], "n": n}` or `{"valuations": [v(a_0), ...]}`.
    pub fn from_json(v: &Value) -> Result<Self> {
        if let Some(vals) = v.get("valuations") {
            let arr = vals
                .as_array()
                .ok_or_else(|| SlopeError::schema("/valuations", "must be a list"))?;
            let vals = arr
                .iter()
                .enumerate()
                .map(|(i, x)| match x {
                    Value::Null => Ok(None),
                    _ => x.as_i64().map(Some).ok_or_else(|| {
                        SlopeError::schema(format!("/valuations/{i}"), "valuation must be an integer or null")
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::from_valuations(vals);
        }
        let cs = v
            .get("coeffs")
            .and_then(Value::as_array)
            .ok_or_else(|| SlopeError::schema("/coeffs", "operator needs coeffs or valuations"))?;
        let coeffs = cs
            .iter()
            .enumerate()
            .map(|(i, c)| Series::from_json(c, &format!("/coeffs/{i}")))
            .collect::<Result<Vec<_>>>()?;
        if let Some(n) = v.get("n") {
            if n.as_u64() != Some(coeffs.len() as u64) {
                return Err(SlopeError::schema("/n", "n must equal the number of coefficients"));
            }
        }
        Self::from_coeffs(coeffs)
    }
}

/// The Fuchs number `max(0, max_i −v(a_i))`.
pub fn irregularity_cyclic(p: &DifferentialOperator) -> Result<u64> {
    let vals = p.valuations()?;
    Ok(vals.iter().flatten().map(|v| (-v).max(0)).max().unwrap_or(0) as u64)
}

/// Concave hull of `(i, −v(a_{n−i}))` through the origin with negative
/// slopes clamped to zero.
pub fn np_diff(p: &DifferentialOperator) -> Result<NewtonPolygon> {
    let vals = p.valuations()?;
    let n = vals.len();
    let mut points: Vec<(u64, DegreeValue)> = vals
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| ((n - i) as u64, DegreeValue::Rational(q(-v)))))
        .collect();
    let top = irregularity_cyclic(p)? as i64;
    points.push((n as u64, DegreeValue::Rational(q(top))));
    upper_hull(Variant::Rational, &points)
}

/// A differential module: the matrix of `∇(∂)` in a basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferentialModule {
    matrix: Vec<Vec<Series>>,
}

impl DifferentialModule {
    pub fn new(matrix: Vec<Vec<Series>>) -> Result<Self> {
        let r = matrix.len();
        if r == 0 || matrix.iter().any(|row| row.len() != r) {
            return Err(SlopeError::invalid("connection matrix must be non-empty and square"));
        }
        Ok(DifferentialModule { matrix })
    }

    /// Rank one, `∇(∂) = f`.
    pub fn rank_one(f: Series) -> Self {
        DifferentialModule { matrix: vec![vec![f]] }
    }

    pub fn rank(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[Vec<Series>] {
        &self.matrix
    }

    /// `∇(f) = A·f + θ(f)`.
    pub fn apply(&self, f: &[Series]) -> Vec<Series> {
        self.matrix
            .iter()
            .zip(f)
            .map(|(row, fi)| {
                row.iter()
                    .zip(f)
                    .fold(fi.theta(), |acc, (a, c)| acc.add(&a.mul(c)))
            })
            .collect()
    }

    /// The dual module, `∇^∨ = −Aᵀ`.
    pub fn dual(&self) -> Self {
        let r = self.rank();
        let matrix = (0..r)
            .map(|i| (0..r).map(|j| self.matrix[j][i].neg()).collect())
            .collect();
        DifferentialModule { matrix }
    }

    /// `A ⊗ 1 + 1 ⊗ B` on the product basis.
    pub fn tensor(&self, other: &Self) -> Self {
        let (r, s) = (self.rank(), other.rank());
        let mut m = vec![vec![Series::zero(); r * s]; r * s];
        for i in 0..r {
            for j in 0..r {
                for k in 0..s {
                    let cell = &mut m[i * s + k][j * s + k];
                    *cell = cell.add(&self.matrix[i][j]);
                }
            }
        }
        for i in 0..r {
            for k in 0..s {
                for l in 0..s {
                    let cell = &mut m[i * s + k][i * s + l];
                    *cell = cell.add(&other.matrix[k][l]);
                }
            }
        }
        DifferentialModule { matrix: m }
    }

    fn pole_order(&self) -> i64 {
        self.matrix
            .iter()
            .flatten()
            .map(|c| (-c.val_bound()).max(0))
            .max()
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "matrix": self.matrix.iter().map(|r| r.iter().map(Series::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    /// `{"matrix": [[series]], "precision": N}`; `precision` caps every
    /// entry that has no precision of its own.
    pub fn from_json(v: &Value) -> Result<Self> {
        let rows = v
            .get("matrix")
            .and_then(Value::as_array)
            .ok_or_else(|| SlopeError::schema("/matrix", "module needs a matrix"))?;
        let cap = match v.get("precision") {
            None => EXACT,
            Some(p) => p
                .as_i64()
                .ok_or_else(|| SlopeError::schema("/precision", "precision must be an integer"))?,
        };
        let matrix = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.as_array()
                    .ok_or_else(|| SlopeError::schema(format!("/matrix/{i}"), "row must be a list"))?
                    .iter()
                    .enumerate()
                    .map(|(j, c)| Series::from_json(c, &format!("/matrix/{i}/{j}")).map(|s| s.with_prec(cap)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(matrix)
    }
}

/// Output of [`katz_rank_spectral`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KatzEstimate {
    /// The smallest `h(n)/n` over `n ≤ n_max` and the gauges tried, where
    /// `h(n) = max(0, −min_{a≤n} v(G_a))`.
    pub estimate: Q,
    /// Exponents `s_i` of the basis `x^{s_i} e_i` that attained the estimate.
    pub gauge: Vec<i64>,
    /// `v(G_n)` for `n = 1..=n_max` in that basis; `None` when `G_n`
    /// vanished to its (non-negative) precision.
    pub valuations: Vec<Option<i64>>,
    /// `h(n)/n` for each `n` in that basis.
    pub per_n: Vec<Q>,
}

impl KatzEstimate {
    pub fn to_json(&self) -> Value {
        json!({
            "estimate": fmt_q(&self.estimate),
            "gauge": self.gauge,
            "valuations": self.valuations,
            "per_n": self.per_n.iter().map(fmt_q).collect::<Vec<_>>(),
        })
    }
}

/// The module in the basis `f_j = x^{s_j} e_j`:
/// `A'_{ij} = x^{s_j − s_i} A_{ij} + δ_{ij} s_j`.
pub fn gauge_shift(m: &DifferentialModule, shifts: &[i64]) -> DifferentialModule {
    let r = m.rank();
    let matrix = (0..r)
        .map(|i| {
            (0..r)
                .map(|j| {
                    let c = m.matrix[i][j].shift(shifts[j] - shifts[i]);
                    if i == j {
                        c.add(&Series::constant(q(shifts[j])))
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect();
    DifferentialModule { matrix }
}

/// Spectral estimate of the Poincaré–Katz rank `max(0, −lim v(G_n)/n)` from
/// the matrices `G_n` of `∇(∂)ⁿ`: `G_0 = 1`, `G_{n+1} = A·G_n + θ(G_n)`.
///
/// Since `θ` does not lower valuations, `h(m+n) ≤ h(m) + h(n)`, so every
/// `h(n)/n` bounds the limit from above and the limit is their infimum.
/// The limit does not depend on the basis; besides the given one, the
/// bases `x^{⌊ti⌋} e_i` for fractions `t` of denominator at most the rank
/// just below the first estimate are tried, which removes most of the
/// offset that a badly scaled basis adds to `h(n)`.
pub fn katz_rank_spectral(m: &DifferentialModule, n_max: usize) -> Result<KatzEstimate> {
    if n_max == 0 {
        return Err(SlopeError::invalid("n_max must be positive"));
    }
    let r = m.rank();
    let mut best = spectral_run(m, n_max, vec![0; r])?;
    if best.estimate.is_zero() || r == 1 {
        return Ok(best);
    }
    let window = Q::new(1.into(), 4.into());
    let mut tried = Vec::new();
    for d in 1..=r as i64 {
        let lo = ceil_q(&((&best.estimate - &window) * q(d))).to_i64().unwrap_or(0).max(0);
        let hi = floor_q(&(&best.estimate * q(d))).to_i64().unwrap_or(0);
        for p in lo..=hi {
            let t = Q::new(p.into(), d.into());
            if t.is_zero() || tried.contains(&t) {
                continue;
            }
            tried.push(t.clone());
            let shifts: Vec<i64> = (0..r as i64).map(|i| floor_q(&(&t * q(i))).to_i64().unwrap()).collect();
            let run = spectral_run(&gauge_shift(m, &shifts), n_max, shifts)?;
            if run.estimate < best.estimate {
                best = run;
            }
        }
    }
    Ok(best)
}

fn spectral_run(m: &DifferentialModule, n_max: usize, gauge: Vec<i64>) -> Result<KatzEstimate> {
    let r = m.rank();
    let h = m.pole_order();
    // terms at or above x^start can reach at most h·n_max lower
    let start = h.saturating_mul(n_max as i64).saturating_add(1);
    let mut g: Vec<Vec<Series>> = (0..r)
        .map(|i| {
            (0..r)
                .map(|j| {
                    let c = if i == j { Series::one() } else { Series::zero() };
                    c.with_prec(start)
                })
                .collect()
        })
        .collect();
    let mut valuations = Vec::with_capacity(n_max);
    let mut per_n = Vec::with_capacity(n_max);
    let mut height = 0i64;
    let mut estimate: Option<Q> = None;
    for n in 1..=n_max {
        let cols: Vec<Vec<Series>> = (0..r)
            .map(|j| {
                let col: Vec<Series> = (0..r).map(|i| g[i][j].clone()).collect();
                m.apply(&col)
            })
            .collect();
        g = (0..r).map(|i| (0..r).map(|j| cols[j][i].clone()).collect()).collect();
        let known = g.iter().flatten().filter_map(Series::valuation).min();
        let floor = g.iter().flatten().map(Series::prec).min().unwrap_or(EXACT);
        let v = match known {
            Some(v) if v < floor => Some(v),
            _ if floor >= 0 => None,
            _ => {
                return Err(SlopeError::Precision(format!(
                    "precision exhausted at power {n} (entries known to O(x^{floor}))"
                )))
            }
        };
        valuations.push(v);
        if let Some(v) = v {
            height = height.max(-v);
        }
        let ratio = Q::new(height.into(), (n as i64).into());
        if estimate.as_ref().is_none_or(|e| ratio < *e) {
            estimate = Some(ratio.clone());
        }
        per_n.push(ratio);
    }
    Ok(KatzEstimate {
        estimate: estimate.unwrap(),
        gauge,
        valuations,
        per_n,
    })
}

/// Output of [`gerard_levelt_irregularity`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeGrowth {
    /// `dim V_k/V_0` for `k = 0..=n_max`.
    pub dims: Vec<u64>,
    /// The final increment `dim V_{n_max} − dim V_{n_max−1}`.
    pub irregularity: u64,
    /// Whether the increments were constant over the last `⌈n_max/4⌉` steps.
    pub stabilized: bool,
}

impl LatticeGrowth {
    pub fn increments(&self) -> Vec<u64> {
        self.dims.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "irregularity": self.irregularity,
            "stabilized": self.stabilized,
            "dims": self.dims,
        })
    }
}

type PrincipalVector = Vec<Series>;

fn principal(v: &[Series]) -> PrincipalVector {
    v.iter().map(|c| c.truncate(0)).collect()
}

/// Gérard–Levelt growth `V_{k+1} = V_k + ∇(∂)V_k` from `V_0 = O^r`.
///
/// Every `V_k` contains `V_0`, so it is stored by the principal parts of
/// an O-basis in triangular form; `dim V_k/V_0` is the sum of the pole
/// orders on the diagonal.
pub fn gerard_levelt_irregularity(m: &DifferentialModule, n_max: usize) -> Result<LatticeGrowth> {
    if n_max == 0 {
        return Err(SlopeError::invalid("n_max must be positive"));
    }
    let r = m.rank();
    let columns: Vec<PrincipalVector> = (0..r)
        .map(|j| principal(&(0..r).map(|i| m.matrix[i][j].clone()).collect::<Vec<_>>()))
        .collect();
    for (j, col) in columns.iter().enumerate() {
        for c in col {
            if c.prec() < 0 {
                return Err(SlopeError::Precision(format!(
                    "principal part of column {j} unknown below x^0"
                )));
            }
        }
    }
    let mut basis: Vec<PrincipalVector> = Vec::new();
    let mut dims = vec![0u64];
    for _ in 0..n_max {
        let mut gens = columns.clone();
        for b in &basis {
            let image = m.apply(b);
            if image.iter().any(|c| c.prec() < 0) {
                return Err(SlopeError::Precision(
                    "connection matrix not known to enough precision for the lattice step".into(),
                ));
            }
            gens.push(principal(&image));
        }
        gens.extend(basis.iter().cloned());
        let (next, dim) = triangular_basis(gens, r);
        basis = next;
        dims.push(dim);
    }
    let incs: Vec<u64> = dims.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = n_max.div_ceil(4);
    let last = *incs.last().unwrap();
    let stabilized = incs[incs.len() - tail..].iter().all(|&d| d == last);
    Ok(LatticeGrowth {
        dims,
        irregularity: last,
        stabilized,
    })
}

/// Triangular O-basis, modulo `O^r`, of the lattice generated by `O^r` and
/// `gens`; returns the pivot vectors and `Σ` pole orders.
fn triangular_basis(mut gens: Vec<PrincipalVector>, r: usize) -> (Vec<PrincipalVector>, u64) {
    let mut pivots = Vec::new();
    let mut dim = 0u64;
    for c in 0..r {
        gens.retain(|g| g.iter().any(|s| !s.is_zero_to_precision()));
        let Some(best) = gens
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g[c].valuation().map(|v| (v, i)))
            .min()
            .map(|(_, i)| i)
        else {
            continue;
        };
        let p = gens.swap_remove(best);
        let d = p[c].valuation().unwrap();
        let depth = p.iter().map(|s| -s.val_bound()).max().unwrap_or(0).max(1);
        let inv = p[c].inverse_to(depth + 1);
        for g in gens.iter_mut() {
            if g[c].is_zero_to_precision() {
                continue;
            }
            let u = g[c].mul(&inv).truncate(depth + 1);
            let mut reduced: Vec<Series> = g.iter().zip(&p).map(|(a, b)| a.sub(&u.mul(b)).truncate(0)).collect();
            reduced[c] = Series::zero();
            *g = reduced;
        }
        dim += (-d) as u64;
        pivots.push(p);
    }
    (pivots, dim)
}

/// Highest break of `∂ − (f + g)`, the tensor of `∂ − f` and `∂ − g`,
/// from `v(f)`, `v(g)` and `v(f + g)`. Checks the bound by the larger of
/// the two breaks.
pub fn tensor_rank_one(f_valuation: i64, g_valuation: i64, cancellation_valuation: i64) -> Result<u64> {
    let brk = |v: i64| (-v).max(0) as u64;
    let out = brk(cancellation_valuation);
    if cancellation_valuation < f_valuation.min(g_valuation) {
        return Err(SlopeError::invalid(format!(
            "v(f+g) = {cancellation_valuation} is below min(v(f), v(g))"
        )));
    }
    debug_assert!(out <= brk(f_valuation).max(brk(g_valuation)));
    Ok(out)
}

/// [`tensor_rank_one`] computed from the series themselves.
pub fn tensor_rank_one_series(f: &Series, g: &Series) -> Result<u64> {
    let val = |s: &Series| -> Result<i64> {
        s.valuation()
            .or(if s.prec() >= 0 { Some(s.prec()) } else { None })
            .ok_or_else(|| SlopeError::Precision("valuation unknown to precision".into()))
    };
    tensor_rank_one(val(f)?, val(g)?, val(&f.add(g))?)
}

/// The operator fixtures used for cross-checking the three irregularity
/// computations.
pub fn fixture_operators() -> Vec<(String, DifferentialOperator)> {
    let raw: Value = serde_json::from_str(include_str!("../fixtures/diff_operators.json"))
        .expect("operator fixture is valid JSON");
    raw["operators"]
        .as_array()
        .expect("operator fixture lists operators")
        .iter()
        .map(|o| {
            let name = o["name"].as_str().expect("operator fixture has names").to_string();
            (name, DifferentialOperator::from_json(o).expect("operator fixture parses"))
        })
        .collect()
}
