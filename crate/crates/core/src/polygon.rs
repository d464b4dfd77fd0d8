//! Newton polygons stored as `(break, multiplicity)` segments.
//!
//! Polygons are concave and start at the origin; breaks strictly decrease
//! from left to right. A segment keeps its total rise rather than its
//! slope so that both degree groups are handled without division.

use std::cmp::Ordering;

use serde_json::{json, Value};

use crate::degree::{cmp_slope, DegreeValue, SlopeKey, Variant};
use crate::error::{Result, SlopeError};
use crate::rational::{fmt_q, parse_q, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    /// Total degree gained along the segment.
    pub rise: DegreeValue,
    pub mult: u64,
}

impl Segment {
    pub fn slope(&self) -> SlopeKey {
        SlopeKey {
            deg: self.rise.clone(),
            rk: self.mult,
        }
    }

    /// Segment of rational slope `slope` and width `mult`.
    pub fn rational(slope: Q, mult: u64) -> Self {
        Segment {
            rise: DegreeValue::Rational(slope * Q::from_integer(mult.into())),
            mult,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonPolygon {
    variant: Variant,
    segments: Vec<Segment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineMode {
    DirectSum,
    TensorMult,
    Dual,
    TensorBoundedMax,
}

impl std::str::FromStr for CombineMode {
    type Err = SlopeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct_sum" | "direct-sum" => Ok(CombineMode::DirectSum),
            "tensor_mult" | "tensor-mult" => Ok(CombineMode::TensorMult),
            "dual" => Ok(CombineMode::Dual),
            "tensor_bounded_max" | "tensor-bounded-max" => Ok(CombineMode::TensorBoundedMax),
            other => Err(SlopeError::invalid(format!("unknown combine mode {other:?}"))),
        }
    }
}

impl NewtonPolygon {
    /// The polygon of the zero object.
    pub fn empty(variant: Variant) -> Self {
        NewtonPolygon {
            variant,
            segments: Vec::new(),
        }
    }

    /// Builds a polygon from segments that must already have strictly
    /// decreasing slopes and positive widths.
    pub fn from_segments(variant: Variant, segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if s.mult == 0 {
                return Err(SlopeError::invalid("segment of zero multiplicity"));
            }
            if s.rise.variant() != variant {
                return Err(SlopeError::VariantMismatch(format!(
                    "segment {} in a {:?} polygon",
                    s.rise, variant
                )));
            }
        }
        for w in segments.windows(2) {
            if cmp_slope(&w[0].slope(), &w[1].slope())? != Ordering::Greater {
                return Err(SlopeError::invalid("polygon breaks must strictly decrease"));
            }
        }
        Ok(NewtonPolygon { variant, segments })
    }

    /// Sorts breaks in decreasing order and merges equal ones.
    pub fn from_breaks(variant: Variant, mut segments: Vec<Segment>) -> Result<Self> {
        segments.retain(|s| s.mult > 0);
        let mut err = None;
        segments.sort_by(|a, b| match cmp_slope(&b.slope(), &a.slope()) {
            Ok(o) => o,
            Err(e) => {
                err = Some(e);
                Ordering::Equal
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        let mut merged: Vec<Segment> = Vec::new();
        for s in segments {
            match merged.last_mut() {
                Some(last) if cmp_slope(&last.slope(), &s.slope())? == Ordering::Equal => {
                    last.rise = last.rise.add(&s.rise)?;
                    last.mult += s.mult;
                }
                _ => merged.push(s),
            }
        }
        Self::from_segments(variant, merged)
    }

    /// Rational polygon from `(slope, multiplicity)` pairs in any order.
    pub fn from_rational_breaks(breaks: &[(Q, u64)]) -> Result<Self> {
        let segs = breaks
            .iter()
            .map(|(s, m)| Segment::rational(s.clone(), *m))
            .collect();
        Self::from_breaks(Variant::Rational, segs)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn rank(&self) -> u64 {
        self.segments.iter().map(|s| s.mult).sum()
    }

    pub fn degree(&self) -> DegreeValue {
        let mut acc = DegreeValue::zero(self.variant);
        for s in &self.segments {
            acc = acc.add(&s.rise).expect("segments share the polygon variant");
        }
        acc
    }

    pub fn endpoint(&self) -> (u64, DegreeValue) {
        (self.rank(), self.degree())
    }

    /// Cumulative vertices, starting with the origin.
    pub fn vertices(&self) -> Vec<(u64, DegreeValue)> {
        let mut out = vec![(0, DegreeValue::zero(self.variant))];
        for s in &self.segments {
            let (x, y) = out.last().unwrap().clone();
            out.push((x + s.mult, y.add(&s.rise).expect("same variant")));
        }
        out
    }

    pub fn highest_break(&self) -> Option<SlopeKey> {
        self.segments.first().map(Segment::slope)
    }

    pub fn lowest_break(&self) -> Option<SlopeKey> {
        self.segments.last().map(Segment::slope)
    }

    /// `(slope, multiplicity)` pairs; `None` for log-variant polygons.
    pub fn rational_breaks(&self) -> Option<Vec<(Q, u64)>> {
        self.segments
            .iter()
            .map(|s| s.slope().rational_value().map(|v| (v, s.mult)))
            .collect()
    }

    /// Expands breaks by multiplicity, largest first.
    pub fn slope_multiset(&self) -> Option<Vec<Q>> {
        let mut out = Vec::new();
        for (s, m) in self.rational_breaks()? {
            for _ in 0..m {
                out.push(s.clone());
            }
        }
        Some(out)
    }

    /// Whether `(x, y)` lies on or below this polygon. `x` must be within
    /// `[0, rank]`.
    pub fn point_below(&self, x: u64, y: &DegreeValue) -> Result<bool> {
        let verts = self.vertices();
        for w in verts.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if *x0 <= x && x <= *x1 {
                // (x1-x0)(y-y0) <= (x-x0)(y1-y0)
                let lhs = y.sub(y0)?.scale((x1 - x0) as i64);
                let rhs = y1.sub(y0)?.scale((x - x0) as i64);
                return Ok(lhs.try_cmp(&rhs)? != Ordering::Greater);
            }
        }
        if x == 0 && verts.len() == 1 {
            return Ok(y.try_cmp(&DegreeValue::zero(self.variant))? != Ordering::Greater);
        }
        Err(SlopeError::invalid(format!(
            "abscissa {x} outside polygon of rank {}",
            self.rank()
        )))
    }

    pub fn to_json(&self) -> Value {
        let segments: Vec<Value> = self
            .segments
            .iter()
            .map(|s| match &s.rise {
                DegreeValue::Rational(_) => json!({
                    "slope": fmt_q(&s.slope().rational_value().unwrap()),
                    "mult": s.mult,
                }),
                DegreeValue::LogPositive(d) => json!({
                    "slope": {"neg_half_log": fmt_q(d), "over": s.mult},
                    "mult": s.mult,
                }),
            })
            .collect();
        let (r, d) = self.endpoint();
        json!({
            "segments": segments,
            "endpoints": [[0, degree_to_json(&DegreeValue::zero(self.variant))], [r, degree_to_json(&d)]],
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let segs = v
            .get("segments")
            .and_then(Value::as_array)
            .ok_or_else(|| SlopeError::schema("segments", "expected an array"))?;
        let mut out = Vec::new();
        let mut variant = Variant::Rational;
        for (i, s) in segs.iter().enumerate() {
            let loc = format!("segments[{i}]");
            let mult = s
                .get("mult")
                .and_then(Value::as_u64)
                .ok_or_else(|| SlopeError::schema(&loc, "mult must be a positive integer"))?;
            let slope = s
                .get("slope")
                .ok_or_else(|| SlopeError::schema(&loc, "missing slope"))?;
            match slope {
                Value::String(text) => out.push(Segment::rational(parse_q(text)?, mult)),
                Value::Object(o) => {
                    let d = o
                        .get("neg_half_log")
                        .and_then(Value::as_str)
                        .ok_or_else(|| SlopeError::schema(&loc, "expected neg_half_log"))?;
                    let over = o.get("over").and_then(Value::as_u64).unwrap_or(mult);
                    if over != mult {
                        return Err(SlopeError::schema(&loc, "log slope must be over its multiplicity"));
                    }
                    variant = Variant::LogPositive;
                    out.push(Segment {
                        rise: DegreeValue::log_positive(parse_q(d)?)?,
                        mult,
                    });
                }
                _ => return Err(SlopeError::schema(&loc, "slope must be a string or object")),
            }
        }
        Self::from_segments(variant, out)
    }
}

pub fn degree_to_json(d: &DegreeValue) -> Value {
    match d {
        DegreeValue::Rational(x) => Value::String(fmt_q(x)),
        DegreeValue::LogPositive(x) => json!({"neg_half_log": fmt_q(x)}),
    }
}

pub fn degree_from_json(v: &Value, loc: &str) -> Result<DegreeValue> {
    match v {
        Value::String(s) => Ok(DegreeValue::Rational(parse_q(s)?)),
        Value::Number(n) => Ok(DegreeValue::Rational(parse_q(&n.to_string())?)),
        Value::Object(o) => {
            let d = o
                .get("neg_half_log")
                .and_then(Value::as_str)
                .ok_or_else(|| SlopeError::schema(loc, "expected neg_half_log"))?;
            DegreeValue::log_positive(parse_q(d)?)
        }
        _ => Err(SlopeError::schema(loc, "degree must be a rational string or object")),
    }
}

/// Concave upper hull through the origin of `points` (abscissas are ranks).
/// Points sharing an abscissa keep the highest ordinate; the origin is
/// added when missing.
pub fn upper_hull(variant: Variant, points: &[(u64, DegreeValue)]) -> Result<NewtonPolygon> {
    let mut pts: Vec<(u64, DegreeValue)> = Vec::with_capacity(points.len() + 1);
    pts.push((0, DegreeValue::zero(variant)));
    pts.extend(points.iter().filter(|(x, _)| *x > 0).cloned());
    if points.iter().any(|(x, y)| *x == 0 && !y.is_zero()) {
        return Err(SlopeError::invalid("polygon must pass through the origin"));
    }
    pts.sort_by_key(|(x, _)| *x);
    let mut dedup: Vec<(u64, DegreeValue)> = Vec::new();
    for p in pts {
        match dedup.last_mut() {
            Some(last) if last.0 == p.0 => {
                if p.1.try_cmp(&last.1)? == Ordering::Greater {
                    last.1 = p.1;
                }
            }
            _ => dedup.push(p),
        }
    }
    let slope = |a: &(u64, DegreeValue), b: &(u64, DegreeValue)| -> Result<SlopeKey> {
        Ok(SlopeKey {
            deg: b.1.sub(&a.1)?,
            rk: b.0 - a.0,
        })
    };
    let mut hull: Vec<(u64, DegreeValue)> = Vec::new();
    for p in dedup {
        while hull.len() >= 2 {
            let a = &hull[hull.len() - 2];
            let b = &hull[hull.len() - 1];
            // drop b unless the chain turns strictly downward at b
            if cmp_slope(&slope(a, b)?, &slope(b, &p)?)? != Ordering::Greater {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let segs = hull
        .windows(2)
        .map(|w| {
            Ok(Segment {
                rise: w[1].1.sub(&w[0].1)?,
                mult: w[1].0 - w[0].0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    NewtonPolygon::from_segments(variant, segs)
}

/// Polygon of a flag given by its cumulative `(rank, degree)` steps.
pub fn polygon_of_steps(variant: Variant, steps: &[(u64, DegreeValue)]) -> Result<NewtonPolygon> {
    if steps.is_empty() {
        return Ok(NewtonPolygon::empty(variant));
    }
    for w in steps.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(SlopeError::invalid("flag ranks must strictly increase"));
        }
    }
    upper_hull(variant, steps)
}

/// True iff both polygons share endpoints and `lower` lies on or below
/// `upper`. Checking the vertices of `lower` suffices: it is linear between
/// them and `upper` is concave.
pub fn polygon_dominates(upper: &NewtonPolygon, lower: &NewtonPolygon) -> Result<bool> {
    if upper.variant != lower.variant {
        return Err(SlopeError::VariantMismatch("polygons of different degree groups".into()));
    }
    let (ru, du) = upper.endpoint();
    let (rl, dl) = lower.endpoint();
    if ru != rl || du != dl {
        return Ok(false);
    }
    for (x, y) in lower.vertices() {
        if !upper.point_below(x, &y)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Polygon calculus for direct sums, tensor products and duals.
pub fn polygon_combine(p: &NewtonPolygon, q: &NewtonPolygon, mode: CombineMode) -> Result<NewtonPolygon> {
    let need_rational = |poly: &NewtonPolygon| -> Result<Vec<(Q, u64)>> {
        poly.rational_breaks().ok_or_else(|| {
            SlopeError::VariantMismatch(format!("{mode:?} needs rational slopes"))
        })
    };
    match mode {
        CombineMode::DirectSum => {
            if p.variant != q.variant {
                return Err(SlopeError::VariantMismatch("direct sum of mixed polygons".into()));
            }
            let segs = p.segments.iter().chain(q.segments.iter()).cloned().collect();
            NewtonPolygon::from_breaks(p.variant, segs)
        }
        CombineMode::TensorMult => {
            let (bp, bq) = (need_rational(p)?, need_rational(q)?);
            let mut out = Vec::new();
            for (a, m) in &bp {
                for (b, n) in &bq {
                    out.push((a + b, m * n));
                }
            }
            NewtonPolygon::from_rational_breaks(&out)
        }
        CombineMode::Dual => {
            let bp = need_rational(p)?;
            let out: Vec<(Q, u64)> = bp.iter().map(|(a, m)| (-a.clone(), *m)).collect();
            NewtonPolygon::from_rational_breaks(&out)
        }
        CombineMode::TensorBoundedMax => {
            let (bp, bq) = (need_rational(p)?, need_rational(q)?);
            let (Some(rp), Some(rq)) = (bp.first(), bq.first()) else {
                return Ok(NewtonPolygon::empty(Variant::Rational));
            };
            let rho = if rp.0 >= rq.0 { rp.0.clone() } else { rq.0.clone() };
            NewtonPolygon::from_rational_breaks(&[(rho, p.rank() * q.rank())])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qf};
    use proptest::prelude::*;

    fn poly(b: &[(i64, i64, u64)]) -> NewtonPolygon {
        let v: Vec<(Q, u64)> = b.iter().map(|(n, d, m)| (qf(*n, *d), *m)).collect();
        NewtonPolygon::from_rational_breaks(&v).unwrap()
    }

    fn r(x: i64) -> DegreeValue {
        DegreeValue::Rational(q(x))
    }

    #[test]
    fn flag_polygon_examples() {
        let p = polygon_of_steps(Variant::Rational, &[(1, r(1)), (2, r(1))]).unwrap();
        assert_eq!(p, poly(&[(1, 1, 1), (0, 1, 1)]));
        let p = polygon_of_steps(Variant::Rational, &[(1, r(-1)), (2, r(0))]).unwrap();
        assert_eq!(p, poly(&[(0, 1, 2)]));
        let p = polygon_of_steps(Variant::Rational, &[(3, r(2))]).unwrap();
        assert_eq!(p, poly(&[(2, 3, 3)]));
    }

    #[test]
    fn dominance_examples() {
        let peaked = poly(&[(1, 1, 1), (-1, 1, 1)]);
        let flat = poly(&[(0, 1, 2)]);
        assert!(polygon_dominates(&peaked, &flat).unwrap());
        assert!(!polygon_dominates(&flat, &peaked).unwrap());
        assert!(polygon_dominates(&peaked, &peaked).unwrap());
    }

    #[test]
    fn dominance_needs_same_endpoints() {
        assert!(!polygon_dominates(&poly(&[(1, 1, 2)]), &poly(&[(0, 1, 2)])).unwrap());
    }

    #[test]
    fn combine_examples() {
        let t = polygon_combine(&poly(&[(1, 1, 1), (0, 1, 1)]), &poly(&[(2, 1, 1)]), CombineMode::TensorMult)
            .unwrap();
        assert_eq!(t, poly(&[(3, 1, 1), (2, 1, 1)]));
        let d = polygon_combine(&poly(&[(1, 1, 2), (0, 1, 1)]), &NewtonPolygon::empty(Variant::Rational), CombineMode::Dual)
            .unwrap();
        assert_eq!(d, poly(&[(0, 1, 1), (-1, 1, 2)]));
        let s = polygon_combine(&poly(&[(1, 1, 1)]), &poly(&[(1, 1, 2)]), CombineMode::DirectSum).unwrap();
        assert_eq!(s, poly(&[(1, 1, 3)]));
        let b = polygon_combine(&poly(&[(2, 1, 1), (0, 1, 1)]), &poly(&[(1, 1, 3)]), CombineMode::TensorBoundedMax)
            .unwrap();
        assert_eq!(b, poly(&[(2, 1, 6)]));
    }

    #[test]
    fn log_polygons_reject_tensor() {
        let p = NewtonPolygon::from_segments(
            Variant::LogPositive,
            vec![Segment { rise: DegreeValue::LogPositive(q(2)), mult: 1 }],
        )
        .unwrap();
        assert!(matches!(
            polygon_combine(&p, &p, CombineMode::TensorMult),
            Err(SlopeError::VariantMismatch(_))
        ));
        assert!(polygon_combine(&p, &p, CombineMode::DirectSum).is_ok());
    }

    #[test]
    fn log_flag_hull() {
        // (1,1)Z inside Z^2: point (1, d=2) lies below the flat segment to (2, d=1)
        let steps = vec![
            (1, DegreeValue::LogPositive(q(2))),
            (2, DegreeValue::LogPositive(q(1))),
        ];
        let p = polygon_of_steps(Variant::LogPositive, &steps).unwrap();
        assert_eq!(p.segments().len(), 1);
        assert_eq!(p.endpoint(), (2, DegreeValue::LogPositive(q(1))));
    }

    #[test]
    fn json_roundtrip_and_shape() {
        let p = poly(&[(3, 2, 2), (0, 1, 1)]);
        let v = p.to_json();
        assert_eq!(v["segments"][0]["slope"], "3/2");
        assert_eq!(v["endpoints"][1][1], "3");
        assert_eq!(NewtonPolygon::from_json(&v).unwrap(), p);
    }

    fn arb_poly() -> impl Strategy<Value = NewtonPolygon> {
        proptest::collection::vec((-6i64..6, 1i64..4, 1u64..4), 1..4).prop_map(|v| {
            let b: Vec<(Q, u64)> = v.into_iter().map(|(n, d, m)| (qf(n, d), m)).collect();
            NewtonPolygon::from_rational_breaks(&b).unwrap()
        })
    }

    proptest! {
        #[test]
        fn hull_of_vertices_is_identity(p in arb_poly()) {
            let verts: Vec<_> = p.vertices().into_iter().skip(1).collect();
            prop_assert_eq!(upper_hull(Variant::Rational, &verts).unwrap(), p);
        }

        #[test]
        fn dual_is_involutive(p in arb_poly()) {
            let e = NewtonPolygon::empty(Variant::Rational);
            let dd = polygon_combine(&polygon_combine(&p, &e, CombineMode::Dual).unwrap(), &e, CombineMode::Dual).unwrap();
            prop_assert_eq!(dd, p);
        }

        #[test]
        fn tensor_degree_law(p in arb_poly(), q2 in arb_poly()) {
            let t = polygon_combine(&p, &q2, CombineMode::TensorMult).unwrap();
            let dp = p.degree().as_rational().unwrap().clone();
            let dq = q2.degree().as_rational().unwrap().clone();
            let expect = dp * Q::from_integer(q2.rank().into()) + dq * Q::from_integer(p.rank().into());
            prop_assert_eq!(t.degree(), DegreeValue::Rational(expect));
            prop_assert_eq!(t.rank(), p.rank() * q2.rank());
        }

        #[test]
        fn sum_dominates_merged_flat(p in arb_poly()) {
            let (r, d) = p.endpoint();
            let flat = NewtonPolygon::from_segments(Variant::Rational, vec![Segment { rise: d, mult: r }]).unwrap();
            prop_assert!(polygon_dominates(&p, &flat).unwrap());
        }
    }
}
