//! Finite-dimensional ℚ-vector spaces carrying `n` decreasing filtrations
//! with rational jumps. The degree is the sum of the notches over all
//! filtrations; strict subobjects are subspaces with the induced
//! filtrations.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_traits::{One, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::category::{Budget, Certificate, Destabilizer, Enumeration, SlopeCategory};
use crate::degree::{DegreeValue, Variant};
use crate::error::{Result, SlopeError};
use crate::linalg::{nullspace, Matrix, QuotientMap, Subspace, Vector};
use crate::rational::{fmt_q, parse_q, qf, Q};

/// A separated exhaustive decreasing filtration, stored as its distinct
/// steps `(λ_k, F^{≥λ_k})` with increasing jumps and strictly decreasing
/// subspaces. The first step is the whole space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Filtration {
    steps: Vec<(Q, Subspace)>,
}

impl Filtration {
    /// The trivial filtration with a single jump.
    pub fn trivial(dim: usize, jump: Q) -> Self {
        Filtration {
            steps: vec![(jump, Subspace::full(dim))],
        }
    }

    /// Builds a filtration from declared steps in any order. If no step is
    /// the whole space, the whole space is placed at jump 0, which then has
    /// to lie below every declared jump.
    pub fn new(dim: usize, mut steps: Vec<(Q, Subspace)>) -> Result<Self> {
        if steps.iter().any(|(_, s)| s.ambient() != dim) {
            return Err(SlopeError::invalid("filtration step in the wrong ambient space"));
        }
        if steps.iter().any(|(_, s)| s.is_zero()) {
            return Err(SlopeError::invalid("filtration steps must be non-zero"));
        }
        steps.sort_by(|a, b| a.0.cmp(&b.0));
        for w in steps.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SlopeError::invalid(format!("jump {} declared twice", fmt_q(&w[0].0))));
            }
            if w[0].1.dim() <= w[1].1.dim() || !w[0].1.contains(&w[1].1) {
                return Err(SlopeError::invalid(format!(
                    "step at jump {} does not strictly contain the step at jump {}",
                    fmt_q(&w[0].0),
                    fmt_q(&w[1].0)
                )));
            }
        }
        match steps.first() {
            None => steps.push((Q::zero(), Subspace::full(dim))),
            Some((_, s)) if s.is_full() => {}
            Some((j, _)) => {
                if *j <= Q::zero() {
                    return Err(SlopeError::invalid(
                        "the whole space is missing and the lowest jump is not positive",
                    ));
                }
                steps.insert(0, (Q::zero(), Subspace::full(dim)));
            }
        }
        Ok(Filtration { steps })
    }

    /// Normalizes `F^{≥λ}` values sampled at increasing `λ`: levels whose
    /// subspace equals the next one carry no notch and are dropped.
    fn from_levels(dim: usize, levels: Vec<(Q, Subspace)>) -> Filtration {
        let levels: Vec<_> = levels.into_iter().filter(|(_, s)| !s.is_zero()).collect();
        let mut steps = Vec::new();
        for (i, (j, s)) in levels.iter().enumerate() {
            if levels.get(i + 1).is_some_and(|(_, t)| t == s) {
                continue;
            }
            steps.push((j.clone(), s.clone()));
        }
        if steps.is_empty() {
            steps.push((Q::zero(), Subspace::full(dim)));
        }
        Filtration { steps }
    }

    pub fn steps(&self) -> &[(Q, Subspace)] {
        &self.steps
    }

    pub fn jumps(&self) -> Vec<Q> {
        self.steps.iter().map(|(j, _)| j.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.steps[0].1.ambient()
    }

    /// `F^{≥λ}`.
    pub fn at_least(&self, lambda: &Q) -> Subspace {
        self.steps
            .iter()
            .find(|(j, _)| j >= lambda)
            .map(|(_, s)| s.clone())
            .unwrap_or_else(|| Subspace::zero(self.dim()))
    }

    /// `F^{>λ}`.
    pub fn greater_than(&self, lambda: &Q) -> Subspace {
        self.steps
            .iter()
            .find(|(j, _)| j > lambda)
            .map(|(_, s)| s.clone())
            .unwrap_or_else(|| Subspace::zero(self.dim()))
    }

    /// `(λ, dim gr^λ)` for every jump.
    pub fn graded_dims(&self) -> Vec<(Q, usize)> {
        self.steps
            .iter()
            .enumerate()
            .map(|(k, (j, s))| {
                let next = self.steps.get(k + 1).map_or(0, |(_, t)| t.dim());
                (j.clone(), s.dim() - next)
            })
            .collect()
    }

    /// Contribution of this filtration to the degree of a subspace.
    pub fn degree_of(&self, sub: &Subspace) -> Q {
        let dims: Vec<usize> = self.steps.iter().map(|(_, s)| s.intersect(sub).dim()).collect();
        let mut total = Q::zero();
        for (k, (j, _)) in self.steps.iter().enumerate() {
            let drop = dims[k] - dims.get(k + 1).copied().unwrap_or(0);
            total += j * Q::from_integer(drop.into());
        }
        total
    }

    pub fn degree(&self) -> Q {
        self.graded_dims()
            .iter()
            .map(|(j, d)| j * Q::from_integer((*d).into()))
            .sum()
    }

    pub fn induced_sub(&self, sub: &Subspace) -> Result<Filtration> {
        let levels = self
            .steps
            .iter()
            .map(|(j, s)| Ok((j.clone(), sub.relative(&s.intersect(sub))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Filtration::from_levels(sub.dim(), levels))
    }

    pub fn induced_quotient(&self, map: &QuotientMap) -> Filtration {
        let levels = self.steps.iter().map(|(j, s)| (j.clone(), map.image(s))).collect();
        Filtration::from_levels(map.target_dim(), levels)
    }

    /// `F^{≥λ}(V∨) = (F^{>−λ}V)^⊥`.
    pub fn dual(&self) -> Filtration {
        let dim = self.dim();
        let levels = (0..self.steps.len())
            .rev()
            .map(|k| {
                let next = self
                    .steps
                    .get(k + 1)
                    .map(|(_, s)| s.clone())
                    .unwrap_or_else(|| Subspace::zero(dim));
                (-self.steps[k].0.clone(), next.annihilator())
            })
            .collect();
        Filtration::from_levels(dim, levels)
    }

    /// `F^{≥λ}(V ⊗ W) = Σ_{λ₁+λ₂=λ} F^{≥λ₁}V ⊗ F^{≥λ₂}W` in the basis
    /// `e_i ⊗ f_j ↦ i·dim W + j`.
    pub fn tensor(&self, other: &Filtration) -> Filtration {
        let (m, n) = (self.dim(), other.dim());
        let sums: BTreeSet<Q> = self
            .steps
            .iter()
            .flat_map(|(a, _)| other.steps.iter().map(move |(b, _)| a + b))
            .collect();
        let levels = sums
            .into_iter()
            .map(|s| {
                let mut rows = Vec::new();
                for (a, fa) in &self.steps {
                    for (b, gb) in &other.steps {
                        if a + b >= s {
                            for u in fa.basis() {
                                for v in gb.basis() {
                                    rows.push(kron(u, v));
                                }
                            }
                        }
                    }
                }
                let sub = Subspace::span(m * n, &rows).expect("kronecker dimension");
                (s, sub)
            })
            .collect();
        Filtration::from_levels(m * n, levels)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "steps": self.steps.iter().map(|(j, s)| json!({
                "jump": fmt_q(j),
                "basis": s.basis().iter().map(|r| r.iter().map(fmt_q).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>()
        })
    }
}

fn kron(u: &Vector, v: &Vector) -> Vector {
    u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect()
}

fn q_from_json(v: &Value, loc: &str) -> Result<Q> {
    match v {
        Value::String(s) => parse_q(s).map_err(|e| SlopeError::schema(loc, e.to_string())),
        Value::Number(n) => parse_q(&n.to_string()).map_err(|e| SlopeError::schema(loc, e.to_string())),
        _ => Err(SlopeError::schema(loc, "expected a rational string")),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilteredSpace {
    dim: usize,
    filtrations: Vec<Filtration>,
}

impl FilteredSpace {
    pub fn new(dim: usize, filtrations: Vec<Filtration>) -> Result<Self> {
        if filtrations.iter().any(|f| f.dim() != dim) {
            return Err(SlopeError::invalid("filtration dimension differs from the space"));
        }
        Ok(FilteredSpace { dim, filtrations })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of filtrations.
    pub fn count(&self) -> usize {
        self.filtrations.len()
    }

    pub fn filtrations(&self) -> &[Filtration] {
        &self.filtrations
    }

    pub fn degree(&self) -> Q {
        self.filtrations.iter().map(Filtration::degree).sum()
    }

    pub fn sub_degree(&self, sub: &Subspace) -> Q {
        self.filtrations.iter().map(|f| f.degree_of(sub)).sum()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "dim": self.dim,
            "filtrations": self.filtrations.iter().map(Filtration::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let dim = v
            .get("dim")
            .and_then(Value::as_u64)
            .filter(|&d| d >= 1)
            .ok_or_else(|| SlopeError::schema("dim", "expected a positive integer"))? as usize;
        let fils = v
            .get("filtrations")
            .and_then(Value::as_array)
            .ok_or_else(|| SlopeError::schema("filtrations", "expected an array"))?;
        let mut filtrations = Vec::new();
        for (i, f) in fils.iter().enumerate() {
            let loc = format!("filtrations[{i}].steps");
            let steps = f
                .get("steps")
                .and_then(Value::as_array)
                .ok_or_else(|| SlopeError::schema(&loc, "expected an array"))?;
            let mut parsed = Vec::new();
            for (k, step) in steps.iter().enumerate() {
                let sloc = format!("{loc}[{k}]");
                let jump = q_from_json(
                    step.get("jump").unwrap_or(&Value::Null),
                    &format!("{sloc}.jump"),
                )?;
                let rows = step
                    .get("basis")
                    .and_then(Value::as_array)
                    .ok_or_else(|| SlopeError::schema(format!("{sloc}.basis"), "expected an array of vectors"))?;
                let mut basis = Vec::new();
                for (r, row) in rows.iter().enumerate() {
                    let rloc = format!("{sloc}.basis[{r}]");
                    let row = row
                        .as_array()
                        .ok_or_else(|| SlopeError::schema(&rloc, "expected a vector"))?;
                    basis.push(row.iter().map(|x| q_from_json(x, &rloc)).collect::<Result<Vector>>()?);
                }
                let sub = Subspace::span(dim, &basis).map_err(|e| SlopeError::schema(&sloc, e.to_string()))?;
                if sub.dim() != basis.len() {
                    return Err(SlopeError::schema(&sloc, "basis vectors are linearly dependent"));
                }
                parsed.push((jump, sub));
            }
            filtrations.push(Filtration::new(dim, parsed).map_err(|e| SlopeError::schema(&loc, e.to_string()))?);
        }
        FilteredSpace::new(dim, filtrations)
    }
}

pub fn degree_filtered(v: &FilteredSpace) -> DegreeValue {
    DegreeValue::rational(v.degree())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InducedMode {
    Sub,
    Quotient,
}

/// The subspace `s` with the induced filtrations (coordinates in the
/// echelon basis of `s`), or `V/s` with the image filtrations
/// (coordinates of [`QuotientMap`]).
pub fn induced_filtration(v: &FilteredSpace, s: &Subspace, mode: InducedMode) -> Result<FilteredSpace> {
    if s.ambient() != v.dim {
        return Err(SlopeError::invalid("subspace lives in a different ambient space"));
    }
    match mode {
        InducedMode::Sub => FilteredSpace::new(
            s.dim(),
            v.filtrations.iter().map(|f| f.induced_sub(s)).collect::<Result<_>>()?,
        ),
        InducedMode::Quotient => {
            let map = QuotientMap::new(s);
            FilteredSpace::new(
                map.target_dim(),
                v.filtrations.iter().map(|f| f.induced_quotient(&map)).collect(),
            )
        }
    }
}

/// Closure of the filtration steps, `0` and `V` under `∩` and `+`.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub subspaces: Vec<Subspace>,
    /// Whether the closure reached a fixed point within the depth.
    pub stabilized: bool,
    pub certificate: Certificate,
}

pub fn candidate_subspaces(v: &FilteredSpace, depth: usize, cap: usize) -> CandidateSet {
    let mut set: BTreeSet<Subspace> = BTreeSet::new();
    set.insert(Subspace::zero(v.dim));
    set.insert(Subspace::full(v.dim));
    for f in &v.filtrations {
        for (_, s) in f.steps() {
            set.insert(s.clone());
        }
    }
    let mut stabilized = false;
    let mut capped = false;
    for _ in 0..depth.max(1) {
        let current: Vec<Subspace> = set.iter().cloned().collect();
        let mut fresh = Vec::new();
        'outer: for (i, a) in current.iter().enumerate() {
            for b in &current[i + 1..] {
                for c in [a.intersect(b), a.sum(b)] {
                    if !set.contains(&c) && !fresh.contains(&c) {
                        fresh.push(c);
                        if set.len() + fresh.len() > cap {
                            capped = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if fresh.is_empty() {
            stabilized = true;
            break;
        }
        set.extend(fresh);
        if capped {
            break;
        }
    }
    let mut subspaces: Vec<Subspace> = set.into_iter().collect();
    subspaces.sort_by(|a, b| a.dim().cmp(&b.dim()).then_with(|| a.cmp(b)));
    let certificate = if capped {
        Certificate::heuristic(format!("candidate cap {cap} reached"))
    } else if !stabilized {
        Certificate::heuristic(format!("closure did not stabilize within depth {depth}"))
    } else if v.count() <= 2 || v.dim <= 2 {
        Certificate::Complete
    } else {
        Certificate::heuristic("three or more filtrations in dimension at least 3")
    };
    CandidateSet {
        subspaces,
        stabilized,
        certificate,
    }
}

fn all_steps(v: &FilteredSpace) -> Vec<Subspace> {
    v.filtrations
        .iter()
        .flat_map(|f| f.steps().iter().map(|(_, s)| s.clone()))
        .collect()
}

/// Closure of `seed` under one binary operation; finite because every
/// element is the meet (or join) of a subset of `seed`.
fn closure_under(seed: &[Subspace], op: impl Fn(&Subspace, &Subspace) -> Subspace) -> BTreeSet<Subspace> {
    let mut set: BTreeSet<Subspace> = seed.iter().cloned().collect();
    loop {
        let current: Vec<Subspace> = set.iter().cloned().collect();
        let mut grew = false;
        for a in &current {
            for b in seed {
                if set.insert(op(a, b)) {
                    grew = true;
                }
            }
        }
        if !grew {
            return set;
        }
    }
}

/// A line of `p` lying in exactly those subspaces of `avoid` that
/// contain all of `p`.
fn generic_line(p: &Subspace, avoid: &[Subspace]) -> Subspace {
    let basis = p.basis();
    let relevant: Vec<&Subspace> = avoid.iter().filter(|a| !a.contains(p)).collect();
    for t in 2i64.. {
        let mut v = vec![Q::zero(); p.ambient()];
        let mut c = Q::one();
        for b in basis {
            for (x, y) in v.iter_mut().zip(b) {
                *x += &c * y;
            }
            c *= Q::from_integer(t.into());
        }
        if relevant.iter().all(|a| !a.contains_vector(&v)) {
            return Subspace::span(p.ambient(), &[v]).expect("vector length");
        }
    }
    unreachable!("finitely many proper subspaces cannot cover a rational space")
}

/// Subspaces attaining the largest degree among lines and among
/// hyperplanes: the meets of filtration steps with a generic line in
/// each, and the joins of steps with a generic hyperplane through each.
/// A line `L` has degree at most that of a generic line in the meet of
/// the smallest steps containing it; hyperplanes follow by duality.
/// In dimension at most 3 this covers every non-zero proper subspace.
pub fn extremal_subspaces(v: &FilteredSpace) -> Vec<Subspace> {
    let n = v.dim;
    let mut steps = all_steps(v);
    steps.push(Subspace::full(n));
    let meets = closure_under(&steps, Subspace::intersect);
    let mut seed = steps.clone();
    seed.push(Subspace::zero(n));
    let joins = closure_under(&seed, Subspace::sum);
    let mut out: BTreeSet<Subspace> = meets.iter().chain(&joins).cloned().collect();
    for p in meets.iter().filter(|p| p.dim() >= 2) {
        out.insert(generic_line(p, &steps));
    }
    let dual_steps: Vec<Subspace> = steps.iter().map(Subspace::annihilator).collect();
    for q in joins.iter().filter(|q| q.dim() + 2 <= n) {
        out.insert(generic_line(&q.annihilator(), &dual_steps).annihilator());
    }
    let mut out: Vec<Subspace> = out.into_iter().filter(|s| !s.is_zero() && !s.is_full()).collect();
    out.sort_by(|a, b| a.dim().cmp(&b.dim()).then_with(|| a.cmp(b)));
    out
}

pub fn destabilizer_filtered(v: &FilteredSpace, budget: &Budget) -> Result<Destabilizer<Subspace>> {
    FilteredCategory.destabilizer(v, budget)
}

pub fn tensor_filtered(v: &FilteredSpace, w: &FilteredSpace) -> Result<FilteredSpace> {
    if v.count() != w.count() {
        return Err(SlopeError::invalid(format!(
            "filtration counts differ: {} and {}",
            v.count(),
            w.count()
        )));
    }
    FilteredSpace::new(
        v.dim * w.dim,
        v.filtrations.iter().zip(&w.filtrations).map(|(f, g)| f.tensor(g)).collect(),
    )
}

pub fn dual_filtered(v: &FilteredSpace) -> FilteredSpace {
    FilteredSpace {
        dim: v.dim,
        filtrations: v.filtrations.iter().map(Filtration::dual).collect(),
    }
}

/// `F^{≥λ}(V ⊕ W) = F^{≥λ}V ⊕ F^{≥λ}W`, with `V` on the first coordinates.
pub fn direct_sum_filtered(v: &FilteredSpace, w: &FilteredSpace) -> Result<FilteredSpace> {
    if v.count() != w.count() {
        return Err(SlopeError::invalid("filtration counts differ"));
    }
    let dim = v.dim + w.dim;
    let pad = |x: &Vector, before: usize| -> Vector {
        let mut out = vec![Q::zero(); dim];
        out[before..before + x.len()].clone_from_slice(x);
        out
    };
    let filtrations = v
        .filtrations
        .iter()
        .zip(&w.filtrations)
        .map(|(f, g)| {
            let jumps: BTreeSet<Q> = f.jumps().into_iter().chain(g.jumps()).collect();
            let levels = jumps
                .into_iter()
                .map(|j| {
                    let mut rows: Vec<Vector> = f.at_least(&j).basis().iter().map(|x| pad(x, 0)).collect();
                    rows.extend(g.at_least(&j).basis().iter().map(|x| pad(x, v.dim)));
                    (j, Subspace::span(dim, &rows).expect("padded vectors"))
                })
                .collect();
            Filtration::from_levels(dim, levels)
        })
        .collect();
    FilteredSpace::new(dim, filtrations)
}

/// A basis (as `dim W × dim V` matrices) of the linear maps `V → W` with
/// `f(F_ν^{≥λ}V) ⊆ F_ν^{≥λ}W` for every `ν` and `λ`.
pub fn filtered_morphisms(v: &FilteredSpace, w: &FilteredSpace) -> Result<Vec<Matrix>> {
    if v.count() != w.count() {
        return Err(SlopeError::invalid("filtration counts differ"));
    }
    let (m, n) = (w.dim, v.dim);
    // unknown f[i][j] sits at index i·n + j
    let mut constraints: Matrix = Vec::new();
    for (fv, fw) in v.filtrations.iter().zip(&w.filtrations) {
        for (lambda, s) in fv.steps() {
            let target = fw.at_least(lambda);
            for a in target.annihilator().basis() {
                for x in s.basis() {
                    let mut row = vec![Q::zero(); m * n];
                    for i in 0..m {
                        for j in 0..n {
                            row[i * n + j] = &a[i] * &x[j];
                        }
                    }
                    constraints.push(row);
                }
            }
        }
    }
    Ok(nullspace(&constraints, m * n)
        .into_iter()
        .map(|flat| flat.chunks(n).map(<[Q]>::to_vec).collect())
        .collect())
}

/// The filtered-space backend; subobjects are subspaces with the induced
/// filtrations.
#[derive(Clone, Copy, Debug, Default)]
pub struct FilteredCategory;

impl SlopeCategory for FilteredCategory {
    type Object = FilteredSpace;
    type Sub = Subspace;

    fn variant(&self) -> Variant {
        Variant::Rational
    }

    fn rank(&self, obj: &FilteredSpace) -> usize {
        obj.dim
    }

    fn degree(&self, obj: &FilteredSpace) -> Result<DegreeValue> {
        Ok(degree_filtered(obj))
    }

    fn whole(&self, obj: &FilteredSpace) -> Subspace {
        Subspace::full(obj.dim)
    }

    fn sub_rank(&self, _obj: &FilteredSpace, sub: &Subspace) -> usize {
        sub.dim()
    }

    fn sub_degree(&self, obj: &FilteredSpace, sub: &Subspace) -> Result<DegreeValue> {
        Ok(DegreeValue::rational(obj.sub_degree(sub)))
    }

    fn same_sub(&self, _obj: &FilteredSpace, a: &Subspace, b: &Subspace) -> bool {
        a == b
    }

    fn contains(&self, _obj: &FilteredSpace, big: &Subspace, small: &Subspace) -> bool {
        big.contains(small)
    }

    fn sub_object(&self, obj: &FilteredSpace, sub: &Subspace) -> Result<FilteredSpace> {
        induced_filtration(obj, sub, InducedMode::Sub)
    }

    fn quotient(&self, obj: &FilteredSpace, sub: &Subspace) -> Result<FilteredSpace> {
        induced_filtration(obj, sub, InducedMode::Quotient)
    }

    fn image_in_quotient(&self, _obj: &FilteredSpace, base: &Subspace, sub: &Subspace) -> Result<Subspace> {
        if !sub.contains(base) {
            return Err(SlopeError::Quotient("subspace does not contain the base".into()));
        }
        Ok(QuotientMap::new(base).image(sub))
    }

    fn pullback(&self, _obj: &FilteredSpace, sub: &Subspace, qsub: &Subspace) -> Result<Subspace> {
        let map = QuotientMap::new(sub);
        if qsub.ambient() != map.target_dim() {
            return Err(SlopeError::Quotient("subspace of the wrong quotient".into()));
        }
        Ok(map.preimage(qsub))
    }

    /// In dimension at most 3 the extremal subspaces; otherwise the
    /// candidate lattice.
    fn strict_subobjects(&self, obj: &FilteredSpace, budget: &Budget) -> Result<Enumeration<Subspace>> {
        if obj.dim <= 3 {
            return Ok(Enumeration {
                subs: extremal_subspaces(obj),
                certificate: Certificate::Complete,
            });
        }
        let cands = candidate_subspaces(obj, budget.depth, budget.max_candidates);
        Ok(Enumeration {
            subs: cands
                .subspaces
                .into_iter()
                .filter(|s| !s.is_zero() && !s.is_full())
                .collect(),
            certificate: cands.certificate,
        })
    }
}

/// Parameters for [`random_filtered`].
#[derive(Clone, Debug)]
pub struct FilteredSampler {
    pub dim: usize,
    pub count: usize,
    /// Jumps are drawn from `[-max_jump, max_jump]`.
    pub max_jump: i64,
    pub integer_jumps: bool,
}

/// A random filtered space. Vectors have entries in `{-1, 0, 1}` so that
/// steps of different filtrations coincide often enough to produce
/// non-trivial Harder–Narasimhan flags.
pub fn random_filtered<R: Rng + ?Sized>(rng: &mut R, cfg: &FilteredSampler) -> FilteredSpace {
    let dim = cfg.dim.max(1);
    let filtrations = (0..cfg.count)
        .map(|_| {
            let vectors = random_basis(rng, dim);
            let levels = rng.gen_range(1..=dim);
            let mut dims: Vec<usize> = (1..dim).collect();
            // keep levels-1 random intermediate dimensions
            for i in (1..dims.len()).rev() {
                let j = rng.gen_range(0..=i);
                dims.swap(i, j);
            }
            dims.truncate(levels - 1);
            dims.push(dim);
            dims.sort_unstable_by(|a, b| b.cmp(a));
            let mut jump = random_jump(rng, cfg);
            let mut steps = Vec::new();
            for d in dims {
                let s = Subspace::span(dim, &vectors[..d]).expect("vector length");
                steps.push((jump.clone(), s));
                jump += Q::one() + random_fraction(rng, cfg);
            }
            Filtration { steps }
        })
        .collect();
    FilteredSpace { dim, filtrations }
}

fn random_jump<R: Rng + ?Sized>(rng: &mut R, cfg: &FilteredSampler) -> Q {
    let m = cfg.max_jump.max(0);
    Q::from_integer(rng.gen_range(-m..=m).into()) + random_fraction(rng, cfg)
}

fn random_fraction<R: Rng + ?Sized>(rng: &mut R, cfg: &FilteredSampler) -> Q {
    if cfg.integer_jumps {
        return Q::zero();
    }
    let d = rng.gen_range(1..=3);
    qf(rng.gen_range(0..d), d)
}

fn random_basis<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Vector> {
    loop {
        let vs: Vec<Vector> = (0..dim)
            .map(|_| (0..dim).map(|_| Q::from_integer(rng.gen_range(-1..=1).into())).collect())
            .collect();
        if Subspace::span(dim, &vs).expect("vector length").dim() == dim {
            return vs;
        }
    }
}

/// Slope comparison for rational keys, used by tests and the harness.
pub fn cmp_subspace_slope(v: &FilteredSpace, a: &Subspace, b: &Subspace) -> Ordering {
    let sa = v.sub_degree(a) / Q::from_integer(a.dim().into());
    let sb = v.sub_degree(b) / Q::from_integer(b.dim().into());
    sa.cmp(&sb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::{hn_filtration, is_semistable};
    use crate::polygon::{polygon_combine, CombineMode};
    use crate::rational::q;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vecq(xs: &[i64]) -> Vector {
        xs.iter().map(|&x| q(x)).collect()
    }

    fn line(dim: usize, xs: &[i64]) -> Subspace {
        Subspace::span(dim, &[vecq(xs)]).unwrap()
    }

    fn one_line(dim: usize, jump: i64, xs: &[i64]) -> Filtration {
        Filtration::new(dim, vec![(q(jump), line(dim, xs))]).unwrap()
    }

    fn transverse() -> FilteredSpace {
        FilteredSpace::new(2, vec![one_line(2, 1, &[1, 0]), one_line(2, 1, &[0, 1])]).unwrap()
    }

    fn three_lines() -> FilteredSpace {
        FilteredSpace::new(
            2,
            vec![one_line(2, 1, &[1, 0]), one_line(2, 1, &[0, 1]), one_line(2, 1, &[1, 1])],
        )
        .unwrap()
    }

    fn n1(jumps_and_lines: &[(i64, usize)], dim: usize) -> FilteredSpace {
        // F^{≥λ} = span(e_0..e_{d-1})
        let steps = jumps_and_lines
            .iter()
            .map(|&(j, d)| {
                let vs: Vec<Vector> = (0..d)
                    .map(|i| (0..dim).map(|k| if k == i { q(1) } else { q(0) }).collect())
                    .collect();
                (q(j), Subspace::span(dim, &vs).unwrap())
            })
            .collect();
        FilteredSpace::new(dim, vec![Filtration::new(dim, steps).unwrap()]).unwrap()
    }

    #[test]
    fn degree_examples() {
        assert_eq!(n1(&[(3, 1)], 1).degree(), q(3));
        assert_eq!(transverse().degree(), q(2));
        let trivial = FilteredSpace::new(3, vec![Filtration::trivial(3, q(0)); 2]).unwrap();
        assert_eq!(trivial.degree(), q(0));
    }

    #[test]
    fn malformed_chains_are_rejected() {
        let e1 = line(2, &[1, 0]);
        let e2 = line(2, &[0, 1]);
        assert!(Filtration::new(2, vec![(q(1), e1.clone()), (q(2), e2)]).is_err());
        assert!(Filtration::new(2, vec![(q(-1), e1.clone())]).is_err());
        assert!(Filtration::new(2, vec![(q(1), e1.clone()), (q(1), Subspace::full(2))]).is_err());
        let text = json!({"dim": 2, "filtrations": [{"steps": [{"jump": "1", "basis": [["1", "0"], ["2", "0"]]}]}]});
        assert!(matches!(FilteredSpace::from_json(&text), Err(SlopeError::Schema { .. })));
    }

    #[test]
    fn induced_examples() {
        let v = transverse();
        let e1 = line(2, &[1, 0]);
        let s = induced_filtration(&v, &e1, InducedMode::Sub).unwrap();
        assert_eq!(s.filtrations()[0].jumps(), vec![q(1)]);
        assert_eq!(s.filtrations()[1].jumps(), vec![q(0)]);
        assert_eq!(s.degree(), q(1));
        let quot = induced_filtration(&v, &e1, InducedMode::Quotient).unwrap();
        assert_eq!(s.degree() + quot.degree(), v.degree());
        assert_eq!(induced_filtration(&v, &Subspace::full(2), InducedMode::Sub).unwrap(), v);
        let zero = induced_filtration(&v, &Subspace::zero(2), InducedMode::Sub).unwrap();
        assert_eq!(zero.dim(), 0);
        assert_eq!(zero.degree(), q(0));
    }

    #[test]
    fn candidate_examples() {
        let v = n1(&[(0, 3), (1, 2), (4, 1)], 3);
        let c = candidate_subspaces(&v, 8, 1000);
        assert_eq!(c.subspaces.len(), 4);
        assert!(c.certificate.is_complete());

        let c = candidate_subspaces(&transverse(), 8, 1000);
        let expect: BTreeSet<Subspace> = [
            Subspace::zero(2),
            line(2, &[1, 0]),
            line(2, &[0, 1]),
            Subspace::full(2),
        ]
        .into_iter()
        .collect();
        assert_eq!(c.subspaces.iter().cloned().collect::<BTreeSet<_>>(), expect);

        let c = candidate_subspaces(&three_lines(), 8, 1000);
        assert_eq!(c.subspaces.len(), 5);
        assert!(c.certificate.is_complete());
    }

    #[test]
    fn three_filtrations_in_dim_three_are_heuristic() {
        let fils = vec![
            one_line(3, 1, &[1, 0, 0]),
            one_line(3, 1, &[0, 1, 0]),
            one_line(3, 1, &[0, 0, 1]),
        ];
        let v = FilteredSpace::new(3, fils).unwrap();
        assert!(!candidate_subspaces(&v, 8, 1000).certificate.is_complete());
    }

    #[test]
    fn four_general_lines_in_dim_three() {
        let fils = vec![
            one_line(3, 1, &[1, 0, 0]),
            one_line(3, 1, &[0, 1, 0]),
            one_line(3, 1, &[0, 0, 1]),
            one_line(3, 1, &[1, 1, 1]),
        ];
        let v = FilteredSpace::new(3, fils).unwrap();
        let en = FilteredCategory.strict_subobjects(&v, &Budget::default()).unwrap();
        assert!(en.certificate.is_complete());
        // four step lines, six joining planes, a generic line, a generic
        // plane through each step line and a generic plane
        assert_eq!(en.subs.len(), 16);
        let (ok, cert) = is_semistable(&FilteredCategory, &v, &Budget::default()).unwrap();
        assert!(ok && cert.is_complete());
    }

    #[test]
    fn destabilizer_examples() {
        let budget = Budget::default();
        let v = n1(&[(0, 2), (5, 1)], 2);
        let d = destabilizer_filtered(&v, &budget).unwrap();
        assert_eq!(d.sub, line(2, &[1, 0]));
        assert_eq!(d.slope.rational_value(), Some(q(5)));

        let l = FilteredSpace::new(2, vec![one_line(2, 1, &[1, 2]), one_line(2, 1, &[1, 2])]).unwrap();
        let d = destabilizer_filtered(&l, &budget).unwrap();
        assert_eq!(d.sub, line(2, &[1, 2]));
        assert_eq!(d.slope.rational_value(), Some(q(2)));
        assert!(d.certificate.is_complete());
        assert!(!is_semistable(&FilteredCategory, &l, &budget).unwrap().0);

        let d = destabilizer_filtered(&transverse(), &budget).unwrap();
        assert!(d.sub.is_full());
        assert_eq!(d.slope.rational_value(), Some(q(1)));
        assert!(d.certificate.is_complete());
    }

    #[test]
    fn hn_of_coinciding_lines() {
        let l = FilteredSpace::new(2, vec![one_line(2, 1, &[1, 1]), one_line(2, 1, &[1, 1])]).unwrap();
        let hn = hn_filtration(&FilteredCategory, &l, &Budget::default()).unwrap();
        assert_eq!(hn.flag.steps[0].sub, line(2, &[1, 1]));
        assert_eq!(hn.polygon.rational_breaks(), Some(vec![(q(2), 1), (q(0), 1)]));
    }

    #[test]
    fn tensor_examples() {
        let a = n1(&[(4, 1)], 1);
        let b = n1(&[(-1, 1)], 1);
        assert_eq!(tensor_filtered(&a, &b).unwrap().filtrations()[0].jumps(), vec![q(3)]);

        let v = n1(&[(0, 2), (1, 1)], 2);
        let w = n1(&[(2, 1)], 1);
        let t = tensor_filtered(&v, &w).unwrap();
        assert_eq!(t.filtrations()[0].jumps(), vec![q(2), q(3)]);

        let unit = n1(&[(0, 1)], 1);
        assert_eq!(tensor_filtered(&v, &unit).unwrap(), v);
        assert!(tensor_filtered(&v, &transverse()).is_err());
    }

    #[test]
    fn dual_examples() {
        let a = n1(&[(7, 1)], 1);
        assert_eq!(dual_filtered(&a).filtrations()[0].jumps(), vec![q(-7)]);
        let v = n1(&[(0, 2), (1, 1)], 2);
        let d = dual_filtered(&v);
        assert_eq!(d.filtrations()[0].jumps(), vec![q(-1), q(0)]);
        assert_eq!(d.degree(), -v.degree());
        assert_eq!(dual_filtered(&d), v);
    }

    #[test]
    fn three_lines_are_stable() {
        let v = three_lines();
        assert_eq!(v.degree(), q(3));
        let budget = Budget::default();
        let (ok, cert) = is_semistable(&FilteredCategory, &v, &budget).unwrap();
        assert!(ok && cert.is_complete());
        let en = FilteredCategory.strict_subobjects(&v, &budget).unwrap();
        for s in en.subs {
            assert!(v.sub_degree(&s) * q(2) < q(3) * q(s.dim() as i64));
        }
    }

    #[test]
    fn morphisms_respect_filtrations() {
        let v = n1(&[(0, 2), (1, 1)], 2);
        // maps into V itself preserving e_1: upper triangular in the echelon basis
        let homs = filtered_morphisms(&v, &v).unwrap();
        assert_eq!(homs.len(), 3);
        let w = n1(&[(5, 1)], 1);
        // W sits entirely at jump 5, above every jump of V
        assert_eq!(filtered_morphisms(&v, &w).unwrap().len(), 2);
        assert!(filtered_morphisms(&w, &v).unwrap().is_empty());
    }

    #[test]
    fn json_roundtrip() {
        let text = json!({"dim": 2, "filtrations": [
            {"steps": [{"jump": "1", "basis": [["1", "0"]]}]},
            {"steps": [{"jump": "1/2", "basis": [["0", "1"]]}, {"jump": "-1", "basis": [["1","0"],["0","1"]]}]}
        ]});
        let v = FilteredSpace::from_json(&text).unwrap();
        assert_eq!(v.degree(), qf(1, 2) - q(1) + q(1));
        assert_eq!(FilteredSpace::from_json(&v.to_json()).unwrap(), v);
    }

    fn sampler(dim: usize, count: usize, integer: bool) -> FilteredSampler {
        FilteredSampler {
            dim,
            count,
            max_jump: 3,
            integer_jumps: integer,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn single_filtration_hn_is_the_filtration(seed in any::<u64>(), dim in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_filtered(&mut rng, &sampler(dim, 1, false));
            let hn = hn_filtration(&FilteredCategory, &v, &Budget::default()).unwrap();
            let steps = v.filtrations()[0].steps();
            let expected: Vec<Subspace> = steps.iter().rev().map(|(_, s)| s.clone()).collect();
            let got: Vec<Subspace> = hn.flag.steps.iter().map(|s| s.sub.clone()).collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn degree_is_additive(seed in any::<u64>(), dim in 1usize..=3, count in 0usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_filtered(&mut rng, &sampler(dim, count, false));
            let cands = candidate_subspaces(&v, 8, 10_000);
            for s in &cands.subspaces {
                let sub = induced_filtration(&v, s, InducedMode::Sub).unwrap();
                let quot = induced_filtration(&v, s, InducedMode::Quotient).unwrap();
                prop_assert_eq!(sub.degree(), v.sub_degree(s));
                prop_assert_eq!(sub.degree() + quot.degree(), v.degree());
            }
        }

        #[test]
        fn dual_reverses_polygon(seed in any::<u64>(), dim in 1usize..=3, count in 1usize..=2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_filtered(&mut rng, &sampler(dim, count, false));
            let d = dual_filtered(&v);
            prop_assert_eq!(dual_filtered(&d), v.clone());
            let budget = Budget::default();
            let hv = hn_filtration(&FilteredCategory, &v, &budget).unwrap();
            let hd = hn_filtration(&FilteredCategory, &d, &budget).unwrap();
            prop_assert_eq!(hd.polygon.clone(), polygon_combine(&hv.polygon, &hv.polygon, CombineMode::Dual).unwrap());
            // HN flag of the dual: annihilators in reverse order
            let subs: Vec<Subspace> = hv.flag.steps.iter().map(|s| s.sub.clone()).collect();
            let mut expected: Vec<Subspace> = subs[..subs.len() - 1].iter().rev().map(Subspace::annihilator).collect();
            expected.push(Subspace::full(dim));
            let got: Vec<Subspace> = hd.flag.steps.iter().map(|s| s.sub.clone()).collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn extremal_subspaces_dominate_small_ones(seed in any::<u64>(), dim in 2usize..=3, count in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_filtered(&mut rng, &sampler(dim, count, false));
            let ext = extremal_subspaces(&v);
            for k in 1..dim {
                let best = ext.iter().filter(|s| s.dim() == k).map(|s| v.sub_degree(s)).max().unwrap();
                for s in crate::harness::small_subspaces(dim).iter().filter(|s| s.dim() == k) {
                    prop_assert!(v.sub_degree(s) <= best);
                }
            }
        }

        #[test]
        fn direct_sum_polygon(seed in any::<u64>(), a in 1usize..=3, b in 1usize..=2, count in 1usize..=2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_filtered(&mut rng, &sampler(a, count, false));
            let w = random_filtered(&mut rng, &sampler(b, count, false));
            let budget = Budget::default();
            let pv = hn_filtration(&FilteredCategory, &v, &budget).unwrap().polygon;
            let pw = hn_filtration(&FilteredCategory, &w, &budget).unwrap().polygon;
            let s = direct_sum_filtered(&v, &w).unwrap();
            prop_assert_eq!(s.degree(), v.degree() + w.degree());
            let ps = hn_filtration(&FilteredCategory, &s, &budget).unwrap().polygon;
            prop_assert_eq!(ps, polygon_combine(&pv, &pw, CombineMode::DirectSum).unwrap());
        }

        #[test]
        fn single_filtration_tensor_polygon(seed in any::<u64>(), a in 1usize..=3, b in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_filtered(&mut rng, &sampler(a, 1, false));
            let w = random_filtered(&mut rng, &sampler(b, 1, false));
            let t = tensor_filtered(&v, &w).unwrap();
            let budget = Budget::default();
            let pv = hn_filtration(&FilteredCategory, &v, &budget).unwrap().polygon;
            let pw = hn_filtration(&FilteredCategory, &w, &budget).unwrap().polygon;
            let pt = hn_filtration(&FilteredCategory, &t, &budget).unwrap().polygon;
            prop_assert_eq!(pt, polygon_combine(&pv, &pw, CombineMode::TensorMult).unwrap());
        }
    }
}
