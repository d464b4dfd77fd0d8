//! Hasse–Arf slope filtrations of finite-image Galois representations,
//! described by the orders of the lower-numbering ramification groups
//! and the dimensions of the invariants under each of them.

use std::fmt;

use num_traits::Zero;
use serde_json::{json, Value};

use crate::error::{Result, SlopeError};
use crate::polygon::NewtonPolygon;
use crate::rational::{fmt_q, is_integer, Q};

/// Orders `g_0 ≥ g_1 ≥ … ≥ g_m = 1` of the lower-numbering subgroups
/// `G_(0) ⊇ G_(1) ⊇ …`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RamificationData {
    sizes: Vec<u64>,
    pub label: String,
}

impl RamificationData {
    pub fn new(sizes: Vec<u64>, label: impl Into<String>) -> Result<Self> {
        if sizes.last() != Some(&1) {
            return Err(SlopeError::invalid("group orders must end at 1"));
        }
        if sizes.contains(&0) {
            return Err(SlopeError::invalid("group orders must be positive"));
        }
        for w in sizes.windows(2) {
            if w[0] % w[1] != 0 {
                return Err(SlopeError::invalid(format!("{} does not divide {}", w[1], w[0])));
            }
        }
        Ok(RamificationData {
            sizes,
            label: label.into(),
        })
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    /// Index `m` of the last group, which is trivial.
    pub fn last(&self) -> usize {
        self.sizes.len() - 1
    }

    /// `∫_0^t [G_(0) : G_(⌈s⌉)]^{-1} ds`, integrating the step function
    /// exactly.
    pub fn herbrand_integral(&self, t: &Q) -> Q {
        let g0 = Q::from_integer(self.sizes[0].into());
        let mut total = Q::zero();
        let mut j = 1u64;
        loop {
            let lo = Q::from_integer((j - 1).into());
            if *t <= lo {
                break;
            }
            let hi = Q::from_integer(j.into());
            let width = if *t < hi { t - &lo } else { hi - &lo };
            let g = self.sizes.get(j as usize).copied().unwrap_or(1);
            total += width * Q::from_integer(g.into()) / &g0;
            j += 1;
        }
        total
    }

    /// Index `i` with `G^{(λ)} = G_(i)`: `0` for `λ ≤ 0`, else the least
    /// `i` with `λ ≤ λ_i`, and `m` beyond the last break.
    pub fn upper_index(&self, lambda: &Q) -> usize {
        if *lambda <= Q::zero() {
            return 0;
        }
        herbrand_breaks(self)
            .iter()
            .find(|(l, _)| lambda <= l)
            .map_or(self.last(), |(_, i)| *i)
    }
}

/// `(λ_i, i)` for `i = 1..m` with `λ_i = Σ_{j ≤ i} g_j / g_0`; `G^{(λ_i)} = G_(i)`.
pub fn herbrand_breaks(data: &RamificationData) -> Vec<(Q, usize)> {
    let g0 = Q::from_integer(data.sizes[0].into());
    let mut lambda = Q::zero();
    (1..data.sizes.len())
        .map(|i| {
            lambda += Q::from_integer(data.sizes[i].into()) / &g0;
            (lambda.clone(), i)
        })
        .collect()
}

/// A representation through `dim M^{G_(i)}` for `i = 0..m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepresentationData {
    pub dim: u64,
    pub fixed: Vec<u64>,
    pub label: String,
}

impl RepresentationData {
    pub fn new(dim: u64, fixed: Vec<u64>, label: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(SlopeError::invalid("representation dimension must be positive"));
        }
        if fixed.windows(2).any(|w| w[0] > w[1]) {
            return Err(SlopeError::invalid("invariant dimensions must be non-decreasing"));
        }
        if fixed.last() != Some(&dim) {
            return Err(SlopeError::invalid("the trivial group fixes the whole representation"));
        }
        Ok(RepresentationData {
            dim,
            fixed,
            label: label.into(),
        })
    }

    pub fn trivial(dim: u64, data: &RamificationData) -> Self {
        RepresentationData {
            dim,
            fixed: vec![dim; data.sizes.len()],
            label: "trivial".into(),
        }
    }

    pub fn direct_sum(&self, other: &RepresentationData) -> Result<RepresentationData> {
        if self.fixed.len() != other.fixed.len() {
            return Err(SlopeError::invalid("representations of different groups"));
        }
        Ok(RepresentationData {
            dim: self.dim + other.dim,
            fixed: self.fixed.iter().zip(&other.fixed).map(|(a, b)| a + b).collect(),
            label: format!("{}+{}", self.label, other.label),
        })
    }

    fn check(&self, data: &RamificationData) -> Result<()> {
        if self.fixed.len() != data.sizes.len() {
            return Err(SlopeError::invalid(format!(
                "{} invariant dimensions for {} groups",
                self.fixed.len(),
                data.sizes.len()
            )));
        }
        Ok(())
    }
}

/// `F^{≥λ}M = Ker(M → M_{G^{(λ)}})`: the slope-`λ_i` part has dimension
/// `dim M^{G_(i+1)} − dim M^{G_(i)}` and the slope-0 part is `M^{G_(1)}`.
pub fn galois_polygon(data: &RamificationData, rep: &RepresentationData) -> Result<NewtonPolygon> {
    rep.check(data)?;
    let m = data.last();
    let mut breaks = Vec::new();
    let fixed_after = |i: usize| if i >= m { rep.dim } else { rep.fixed[i + 1] };
    let tame_fixed = if m == 0 { rep.dim } else { rep.fixed[1] };
    if tame_fixed > 0 {
        breaks.push((Q::zero(), tame_fixed));
    }
    for (lambda, i) in herbrand_breaks(data) {
        let mult = fixed_after(i) - rep.fixed[i];
        if mult > 0 {
            breaks.push((lambda, mult));
        }
    }
    NewtonPolygon::from_rational_breaks(&breaks)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Swan {
    pub value: Q,
    pub integral: bool,
}

impl fmt::Display for Swan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({})",
            fmt_q(&self.value),
            if self.integral { "integral" } else { "non-integral" }
        )
    }
}

pub fn swan(data: &RamificationData, rep: &RepresentationData) -> Result<Swan> {
    let poly = galois_polygon(data, rep)?;
    let value = poly
        .rational_breaks()
        .expect("rational polygon")
        .iter()
        .map(|(l, m)| l * Q::from_integer((*m).into()))
        .sum::<Q>();
    Ok(Swan {
        integral: is_integer(&value),
        value,
    })
}

/// A tensor product whose invariant profile is supplied with the data,
/// since it is not determined by the factors' profiles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorFact {
    pub left: usize,
    pub right: usize,
    pub product: RepresentationData,
}

/// Ramification data with representations, as read from JSON.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RamificationInput {
    pub data: RamificationData,
    pub reps: Vec<RepresentationData>,
    pub tensors: Vec<TensorFact>,
    /// Whether the data comes from a genuine Galois extension.
    pub curated: bool,
    pub provenance: Option<String>,
}

fn u64_list(v: Option<&Value>, loc: &str) -> Result<Vec<u64>> {
    v.and_then(Value::as_array)
        .ok_or_else(|| SlopeError::schema(loc, "expected an array of integers"))?
        .iter()
        .map(|x| x.as_u64().ok_or_else(|| SlopeError::schema(loc, "expected a non-negative integer")))
        .collect()
}

fn rep_from_json(v: &Value, loc: &str, data: &RamificationData) -> Result<RepresentationData> {
    let dim = v
        .get("dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| SlopeError::schema(format!("{loc}.dim"), "expected a positive integer"))?;
    let fixed = u64_list(v.get("fixed"), &format!("{loc}.fixed"))?;
    let label = v.get("name").and_then(Value::as_str).unwrap_or("").to_string();
    let rep = RepresentationData::new(dim, fixed, label).map_err(|e| SlopeError::schema(loc, e.to_string()))?;
    rep.check(data).map_err(|e| SlopeError::schema(loc, e.to_string()))?;
    Ok(rep)
}

impl RamificationInput {
    pub fn from_json(v: &Value) -> Result<Self> {
        let sizes = u64_list(v.get("sizes"), "sizes")?;
        let label = v.get("name").and_then(Value::as_str).unwrap_or("").to_string();
        let data = RamificationData::new(sizes, label).map_err(|e| SlopeError::schema("sizes", e.to_string()))?;
        let reps = match v.get("reps") {
            None => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, r)| rep_from_json(r, &format!("reps[{i}]"), &data))
                .collect::<Result<_>>()?,
            Some(_) => return Err(SlopeError::schema("reps", "expected an array")),
        };
        let mut tensors = Vec::new();
        if let Some(items) = v.get("tensors") {
            let items = items
                .as_array()
                .ok_or_else(|| SlopeError::schema("tensors", "expected an array"))?;
            for (i, t) in items.iter().enumerate() {
                let loc = format!("tensors[{i}]");
                let of = u64_list(t.get("of"), &format!("{loc}.of"))?;
                let [a, b] = of[..] else {
                    return Err(SlopeError::schema(format!("{loc}.of"), "expected two indices"));
                };
                let (a, b) = (a as usize, b as usize);
                if a >= reps.len() || b >= reps.len() {
                    return Err(SlopeError::schema(format!("{loc}.of"), "index out of range"));
                }
                let product = rep_from_json(t, &loc, &data)?;
                if product.dim != reps[a].dim * reps[b].dim {
                    return Err(SlopeError::schema(format!("{loc}.dim"), "dimension is not the product"));
                }
                tensors.push(TensorFact {
                    left: a,
                    right: b,
                    product,
                });
            }
        }
        Ok(RamificationInput {
            data,
            reps,
            tensors,
            curated: v.get("curated").and_then(Value::as_bool).unwrap_or(false),
            provenance: v.get("provenance").and_then(Value::as_str).map(str::to_string),
        })
    }

    pub fn to_json(&self) -> Value {
        let rep = |r: &RepresentationData| json!({"name": r.label, "dim": r.dim, "fixed": r.fixed});
        json!({
            "name": self.data.label,
            "sizes": self.data.sizes,
            "curated": self.curated,
            "reps": self.reps.iter().map(rep).collect::<Vec<_>>(),
            "tensors": self.tensors.iter().map(|t| {
                let mut v = rep(&t.product);
                v["of"] = json!([t.left, t.right]);
                v
            }).collect::<Vec<_>>(),
        })
    }
}

/// `{"fixtures": [...]}` with the curated and synthetic fixtures.
pub const FIXTURES: &str = include_str!("../fixtures/ramification.json");

/// The curated and synthetic fixtures shipped with the crate.
pub fn fixture_ramification() -> Vec<RamificationInput> {
    let raw: Value = serde_json::from_str(FIXTURES)
        .expect("ramification fixture is valid JSON");
    raw["fixtures"]
        .as_array()
        .expect("ramification fixture lists fixtures")
        .iter()
        .map(|f| RamificationInput::from_json(f).expect("ramification fixture parses"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon::{polygon_combine, CombineMode};
    use crate::rational::{q, qf};
    use proptest::prelude::*;

    fn data(sizes: &[u64]) -> RamificationData {
        RamificationData::new(sizes.to_vec(), "").unwrap()
    }

    fn rep(dim: u64, fixed: &[u64]) -> RepresentationData {
        RepresentationData::new(dim, fixed.to_vec(), "").unwrap()
    }

    #[test]
    fn herbrand_examples() {
        let tame = data(&[5, 1]);
        assert_eq!(herbrand_breaks(&tame), vec![(qf(1, 5), 1)]);
        assert_eq!(tame.upper_index(&qf(1, 10)), 1);
        assert_eq!(tame.upper_index(&q(0)), 0);

        let wild = data(&[7, 7, 1]);
        assert_eq!(herbrand_breaks(&wild), vec![(q(1), 1), (q(1) + qf(1, 7), 2)]);
        assert_eq!(wild.upper_index(&q(1)), 1);
        assert_eq!(wild.upper_index(&qf(11, 10)), 2);

        assert!(herbrand_breaks(&data(&[1])).is_empty());
    }

    #[test]
    fn malformed_sizes() {
        assert!(RamificationData::new(vec![4, 3, 1], "").is_err());
        assert!(RamificationData::new(vec![4, 2], "").is_err());
        assert!(RamificationData::new(vec![], "").is_err());
        assert!(RepresentationData::new(1, vec![1, 0], "").is_err());
        assert!(RepresentationData::new(2, vec![0, 1], "").is_err());
        assert!(galois_polygon(&data(&[3, 1]), &rep(1, &[0, 0, 1])).is_err());
    }

    #[test]
    fn polygon_examples() {
        let d = data(&[3, 3, 1]);
        let triv = RepresentationData::trivial(2, &d);
        assert_eq!(galois_polygon(&d, &triv).unwrap().rational_breaks(), Some(vec![(q(0), 2)]));
        let chi = rep(1, &[0, 0, 1]);
        assert_eq!(galois_polygon(&d, &chi).unwrap().rational_breaks(), Some(vec![(q(1), 1)]));
        let sum = RepresentationData::trivial(1, &d).direct_sum(&chi).unwrap();
        assert_eq!(
            galois_polygon(&d, &sum).unwrap().rational_breaks(),
            Some(vec![(q(1), 1), (q(0), 1)])
        );
        assert_eq!(swan(&d, &chi).unwrap().value, q(1));
        assert_eq!(swan(&d, &chi.direct_sum(&chi).unwrap()).unwrap().value, q(2));
    }

    #[test]
    fn tame_swan_vanishes() {
        let d = data(&[4, 1]);
        for f in [[0, 1], [1, 1]] {
            let s = swan(&d, &rep(1, &f)).unwrap();
            assert!(s.value.is_zero() && s.integral);
        }
    }

    #[test]
    fn curated_fixtures_satisfy_hasse_arf() {
        let all = fixture_ramification();
        assert!(all.len() >= 7);
        for f in all.iter().filter(|f| f.curated) {
            for r in &f.reps {
                let s = swan(&f.data, r).unwrap();
                assert!(s.integral, "{} {}: {s}", f.data.label, r.label);
            }
            for t in &f.tensors {
                let rho = |r: &RepresentationData| {
                    galois_polygon(&f.data, r).unwrap().highest_break().and_then(|k| k.rational_value())
                };
                let bound = rho(&f.reps[t.left]).max(rho(&f.reps[t.right]));
                assert!(rho(&t.product) <= bound, "{}", f.data.label);
            }
        }
        let synthetic = all.iter().find(|f| !f.curated).unwrap();
        assert!(!swan(&synthetic.data, &synthetic.reps[0]).unwrap().integral);
    }

    #[test]
    fn fixture_values() {
        let all = fixture_ramification();
        let by = |name: &str| all.iter().find(|f| f.data.label == name).unwrap();
        let swans = |name: &str| -> Vec<Q> {
            let f = by(name);
            f.reps.iter().map(|r| swan(&f.data, r).unwrap().value).collect()
        };
        assert_eq!(swans("artin_schreier_p2_b3"), vec![q(3)]);
        assert_eq!(swans("artin_schreier_p5_b2"), vec![q(2), q(4)]);
        assert_eq!(swans("cyclic4_upper_1_2"), vec![q(2), q(1), q(3)]);
        assert_eq!(swans("s3_b1"), vec![q(0), q(1)]);
        let f = by("tame_e3");
        assert_eq!(RamificationInput::from_json(&f.to_json()).unwrap().reps, f.reps);
    }

    fn arb_data() -> impl Strategy<Value = RamificationData> {
        // chains of divisors built from small prime factors
        prop::collection::vec((prop::sample::select(vec![1u64, 2, 3, 5]), 1usize..4), 1..4).prop_map(|parts| {
            let mut sizes = vec![1u64];
            for (p, reps) in parts {
                let top = sizes[0] * p;
                for _ in 0..reps {
                    sizes.insert(0, top);
                }
            }
            RamificationData::new(sizes, "").unwrap()
        })
    }

    fn arb_rep(d: &RamificationData, seed: u64) -> RepresentationData {
        let dim = 1 + seed % 3;
        let mut fixed: Vec<u64> = (0..d.sizes().len())
            .map(|i| (seed.rotate_left(i as u32 * 7) % (dim + 1)).min(dim))
            .collect();
        fixed.sort_unstable();
        *fixed.last_mut().unwrap() = dim;
        RepresentationData::new(dim, fixed, "").unwrap()
    }

    proptest! {
        #[test]
        fn breaks_match_the_integral(d in arb_data()) {
            for (lambda, i) in herbrand_breaks(&d) {
                prop_assert_eq!(d.herbrand_integral(&Q::from_integer((i as u64).into())), lambda.clone());
                prop_assert_eq!(d.upper_index(&lambda), i);
            }
        }

        #[test]
        fn swan_is_additive(d in arb_data(), a in any::<u64>(), b in any::<u64>()) {
            let (r, s) = (arb_rep(&d, a), arb_rep(&d, b));
            let sum = r.direct_sum(&s).unwrap();
            let (pr, ps) = (galois_polygon(&d, &r).unwrap(), galois_polygon(&d, &s).unwrap());
            prop_assert_eq!(galois_polygon(&d, &sum).unwrap(), polygon_combine(&pr, &ps, CombineMode::DirectSum).unwrap());
            prop_assert_eq!(swan(&d, &sum).unwrap().value, swan(&d, &r).unwrap().value + swan(&d, &s).unwrap().value);
            prop_assert!(pr.rational_breaks().unwrap().iter().all(|(l, _)| *l >= Q::zero()));
            prop_assert_eq!(pr.rank(), r.dim);
        }
    }
}
