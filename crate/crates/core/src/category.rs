//! The backend contract and the generic slope engine built on it:
//! semistability, universal destabilizers and Harder–Narasimhan flags.

use std::cmp::Ordering;
use std::fmt::Debug;

use serde_json::{json, Value};

use crate::degree::{cmp_slope, DegreeValue, SlopeKey, Variant};
use crate::error::{Result, SlopeError};
use crate::polygon::{degree_to_json, polygon_of_steps, upper_hull, NewtonPolygon};
use crate::rational::{fmt_q, Q};

/// Limits for searches whose exhaustiveness is not automatic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Budget {
    /// Norm bound for lattice vector enumeration (`None`: backend default).
    pub bound: Option<Q>,
    /// Closure depth for subspace candidate generation.
    pub depth: usize,
    /// Hard cap on the number of candidates examined.
    pub max_candidates: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            bound: None,
            depth: 8,
            max_candidates: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Certificate {
    /// The search provably covered every strict subobject.
    Complete,
    /// Only a budgeted part of the search space was covered.
    Heuristic { reason: String },
}

impl Certificate {
    pub fn is_complete(&self) -> bool {
        matches!(self, Certificate::Complete)
    }

    pub fn heuristic(reason: impl Into<String>) -> Self {
        Certificate::Heuristic {
            reason: reason.into(),
        }
    }

    /// Complete only if both are.
    pub fn and(&self, other: &Certificate) -> Certificate {
        match (self, other) {
            (Certificate::Complete, Certificate::Complete) => Certificate::Complete,
            (Certificate::Heuristic { reason }, _) | (_, Certificate::Heuristic { reason }) => {
                Certificate::Heuristic {
                    reason: reason.clone(),
                }
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Certificate::Complete => json!({"kind": "complete"}),
            Certificate::Heuristic { reason } => json!({"kind": "heuristic", "reason": reason}),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Destabilizer<S> {
    pub sub: S,
    pub slope: SlopeKey,
    pub certificate: Certificate,
}

#[derive(Clone, Debug)]
pub struct Enumeration<S> {
    /// Non-zero proper strict subobjects.
    pub subs: Vec<S>,
    pub certificate: Certificate,
}

/// What a backend must provide for the engine to run on it.
///
/// Subobjects are always relative to a given ambient object. `quotient`
/// and `pullback` must use the same identification of `obj / sub`.
pub trait SlopeCategory {
    type Object: Clone + Debug;
    type Sub: Clone + Debug;

    fn variant(&self) -> Variant;

    fn rank(&self, obj: &Self::Object) -> usize;

    fn degree(&self, obj: &Self::Object) -> Result<DegreeValue>;

    fn whole(&self, obj: &Self::Object) -> Self::Sub;

    fn sub_rank(&self, obj: &Self::Object, sub: &Self::Sub) -> usize;

    fn sub_degree(&self, obj: &Self::Object, sub: &Self::Sub) -> Result<DegreeValue>;

    fn same_sub(&self, obj: &Self::Object, a: &Self::Sub, b: &Self::Sub) -> bool;

    /// `small ⊆ big` as subobjects of `obj`.
    fn contains(&self, obj: &Self::Object, big: &Self::Sub, small: &Self::Sub) -> bool;

    /// The subobject as an object in its own right.
    fn sub_object(&self, obj: &Self::Object, sub: &Self::Sub) -> Result<Self::Object>;

    fn quotient(&self, obj: &Self::Object, sub: &Self::Sub) -> Result<Self::Object>;

    /// Image of `sub ⊇ base` in `obj / base`.
    fn image_in_quotient(&self, obj: &Self::Object, base: &Self::Sub, sub: &Self::Sub) -> Result<Self::Sub>;

    /// Preimage in `obj` of a subobject `qsub` of `obj / sub`.
    fn pullback(&self, obj: &Self::Object, sub: &Self::Sub, qsub: &Self::Sub) -> Result<Self::Sub>;

    fn strict_subobjects(&self, _obj: &Self::Object, _budget: &Budget) -> Result<Enumeration<Self::Sub>> {
        Err(SlopeError::Capability("strict subobject enumeration".into()))
    }

    /// Defaults to maximizing over [`strict_subobjects`](Self::strict_subobjects).
    fn destabilizer(&self, obj: &Self::Object, budget: &Budget) -> Result<Destabilizer<Self::Sub>> {
        let en = self.strict_subobjects(obj, budget)?;
        let mut best = Destabilizer {
            sub: self.whole(obj),
            slope: self.slope(obj)?,
            certificate: en.certificate.clone(),
        };
        let mut best_rank = self.rank(obj);
        for s in en.subs {
            let r = self.sub_rank(obj, &s);
            let key = SlopeKey::new(self.sub_degree(obj, &s)?, r as u64)?;
            let better = match cmp_slope(&key, &best.slope)? {
                Ordering::Greater => true,
                Ordering::Equal => r > best_rank,
                Ordering::Less => false,
            };
            if better {
                best.sub = s;
                best.slope = key;
                best_rank = r;
            }
        }
        Ok(best)
    }

    fn slope(&self, obj: &Self::Object) -> Result<SlopeKey> {
        let r = self.rank(obj);
        if r == 0 {
            return Err(SlopeError::ZeroObject);
        }
        SlopeKey::new(self.degree(obj)?, r as u64)
    }

    fn sub_slope(&self, obj: &Self::Object, sub: &Self::Sub) -> Result<SlopeKey> {
        let r = self.sub_rank(obj, sub);
        if r == 0 {
            return Err(SlopeError::ZeroObject);
        }
        SlopeKey::new(self.sub_degree(obj, sub)?, r as u64)
    }
}

/// A chain `0 ⊊ N₁ ⊊ … ⊊ N_k = M` with per-step rank and degree.
#[derive(Clone, Debug)]
pub struct FlagStep<S> {
    pub sub: S,
    pub rank: usize,
    pub degree: DegreeValue,
}

#[derive(Clone, Debug)]
pub struct Flag<O, S> {
    pub object: O,
    pub steps: Vec<FlagStep<S>>,
}

impl<O, S> Flag<O, S> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn points(&self) -> Vec<(u64, DegreeValue)> {
        self.steps
            .iter()
            .map(|s| (s.rank as u64, s.degree.clone()))
            .collect()
    }

    /// Graded pieces as `(rank, degree)` differences of consecutive steps.
    pub fn graded(&self) -> Result<Vec<(usize, DegreeValue)>> {
        let mut out = Vec::new();
        let mut prev: Option<&FlagStep<S>> = None;
        for s in &self.steps {
            match prev {
                None => out.push((s.rank, s.degree.clone())),
                Some(p) => out.push((s.rank - p.rank, s.degree.sub(&p.degree)?)),
            }
            prev = Some(s);
        }
        Ok(out)
    }
}

/// Builds a flag from subobjects, checking ranks and inclusions.
pub fn make_flag<C: SlopeCategory>(cat: &C, obj: &C::Object, subs: Vec<C::Sub>) -> Result<Flag<C::Object, C::Sub>> {
    let total = cat.rank(obj);
    if subs.is_empty() || subs.len() > total.max(1) {
        return Err(SlopeError::invalid(format!(
            "flag length {} outside 1..={total}",
            subs.len()
        )));
    }
    let mut steps = Vec::with_capacity(subs.len());
    for (i, s) in subs.into_iter().enumerate() {
        let rank = cat.sub_rank(obj, &s);
        if let Some(prev) = steps.last() {
            let prev: &FlagStep<C::Sub> = prev;
            if rank <= prev.rank || !cat.contains(obj, &s, &prev.sub) {
                return Err(SlopeError::invalid(format!("flag step {i} is not a strict enlargement")));
            }
        } else if rank == 0 {
            return Err(SlopeError::invalid("flag starts with the zero subobject"));
        }
        steps.push(FlagStep {
            degree: cat.sub_degree(obj, &s)?,
            rank,
            sub: s,
        });
    }
    let last = steps.last().unwrap();
    if last.rank != total || !cat.same_sub(obj, &last.sub, &cat.whole(obj)) {
        return Err(SlopeError::invalid("last flag step must be the whole object"));
    }
    Ok(Flag {
        object: obj.clone(),
        steps,
    })
}

pub fn polygon_of_flag<O, S>(variant: Variant, flag: &Flag<O, S>) -> Result<NewtonPolygon> {
    polygon_of_steps(variant, &flag.points())
}

#[derive(Clone, Debug)]
pub struct HnResult<O, S> {
    pub flag: Flag<O, S>,
    pub polygon: NewtonPolygon,
    /// One per graded piece.
    pub certificates: Vec<Certificate>,
}

impl<O, S> HnResult<O, S> {
    pub fn is_complete(&self) -> bool {
        self.certificates.iter().all(Certificate::is_complete)
    }

    pub fn to_json(&self, describe: impl Fn(&S) -> Value) -> Value {
        let steps: Vec<Value> = self
            .flag
            .steps
            .iter()
            .map(|s| {
                json!({
                    "sub": describe(&s.sub),
                    "rank": s.rank,
                    "degree": degree_to_json(&s.degree),
                })
            })
            .collect();
        json!({
            "flag": steps,
            "polygon": self.polygon.to_json(),
            "certificates": self.certificates.iter().map(Certificate::to_json).collect::<Vec<_>>(),
            "complete": self.is_complete(),
        })
    }
}

/// Semistability test through the destabilizer: `obj` is semistable iff
/// its universal destabilizer is `obj` itself.
pub fn is_semistable<C: SlopeCategory>(cat: &C, obj: &C::Object, budget: &Budget) -> Result<(bool, Certificate)> {
    let d = universal_destabilizer(cat, obj, budget)?;
    let whole = cat.same_sub(obj, &d.sub, &cat.whole(obj));
    // a strictly better subobject is a witness whatever the budget
    let cert = if whole { d.certificate } else { Certificate::Complete };
    Ok((whole, cert))
}

/// Maximal slope, then maximal rank.
pub fn universal_destabilizer<C: SlopeCategory>(
    cat: &C,
    obj: &C::Object,
    budget: &Budget,
) -> Result<Destabilizer<C::Sub>> {
    if cat.rank(obj) == 0 {
        return Err(SlopeError::ZeroObject);
    }
    cat.destabilizer(obj, budget)
}

/// Iterates universal destabilizers of successive quotients.
pub fn hn_filtration<C: SlopeCategory>(
    cat: &C,
    obj: &C::Object,
    budget: &Budget,
) -> Result<HnResult<C::Object, C::Sub>> {
    let total = cat.rank(obj);
    if total == 0 {
        return Err(SlopeError::ZeroObject);
    }
    let first = universal_destabilizer(cat, obj, budget)?;
    let mut subs = vec![first.sub];
    let mut certs = vec![first.certificate];
    loop {
        let current = subs.last().unwrap().clone();
        let r = cat.sub_rank(obj, &current);
        if r == total {
            break;
        }
        let quot = cat.quotient(obj, &current)?;
        if cat.rank(&quot) != total - r {
            return Err(SlopeError::Quotient(format!(
                "quotient rank {} != {}",
                cat.rank(&quot),
                total - r
            )));
        }
        let d = universal_destabilizer(cat, &quot, budget)?;
        let next = if cat.same_sub(&quot, &d.sub, &cat.whole(&quot)) {
            cat.whole(obj)
        } else {
            cat.pullback(obj, &current, &d.sub)?
        };
        if cat.sub_rank(obj, &next) <= r {
            return Err(SlopeError::Quotient("pullback did not enlarge the flag".into()));
        }
        subs.push(next);
        certs.push(d.certificate);
    }
    let flag = make_flag(cat, obj, subs)?;
    let polygon = hn_polygon_from_flag(cat.variant(), &flag)?;
    Ok(HnResult {
        flag,
        polygon,
        certificates: certs,
    })
}

/// For the HN flag every step point is a vertex, so the polygon is
/// the hull of the steps; graded slopes are checked to strictly decrease.
fn hn_polygon_from_flag<O, S>(variant: Variant, flag: &Flag<O, S>) -> Result<NewtonPolygon> {
    let graded = flag.graded()?;
    for w in graded.windows(2) {
        let a = SlopeKey::new(w[0].1.clone(), w[0].0 as u64)?;
        let b = SlopeKey::new(w[1].1.clone(), w[1].0 as u64)?;
        if cmp_slope(&a, &b)? != Ordering::Greater {
            return Err(SlopeError::invalid(format!(
                "graded slopes not strictly decreasing ({a} then {b}); backend destabilizer is inconsistent"
            )));
        }
    }
    upper_hull(variant, &flag.points())
}

/// Whether all graded pieces of `flag` are semistable with strictly
/// decreasing slopes.
pub fn is_hn_type_flag<C: SlopeCategory>(
    cat: &C,
    flag: &Flag<C::Object, C::Sub>,
    budget: &Budget,
) -> Result<(bool, Certificate)> {
    let obj = &flag.object;
    let graded = flag.graded()?;
    for w in graded.windows(2) {
        let a = SlopeKey::new(w[0].1.clone(), w[0].0 as u64)?;
        let b = SlopeKey::new(w[1].1.clone(), w[1].0 as u64)?;
        if cmp_slope(&a, &b)? != Ordering::Greater {
            return Ok((false, Certificate::Complete));
        }
    }
    let mut cert = Certificate::Complete;
    let mut prev: Option<&C::Sub> = None;
    for step in &flag.steps {
        let piece = match prev {
            None => cat.sub_object(obj, &step.sub)?,
            Some(p) => {
                let quot = cat.quotient(obj, p)?;
                let image = cat.image_in_quotient(obj, p, &step.sub)?;
                cat.sub_object(&quot, &image)?
            }
        };
        let (ok, c) = is_semistable(cat, &piece, budget)?;
        if !ok {
            return Ok((false, Certificate::Complete));
        }
        cert = cert.and(&c);
        prev = Some(&step.sub);
    }
    Ok((true, cert))
}

pub fn slope_json(key: &SlopeKey) -> Value {
    match key.rational_value() {
        Some(v) => Value::String(fmt_q(&v)),
        None => json!({"degree": degree_to_json(&key.deg), "rank": key.rk}),
    }
}
