//! Finite slope categories given by explicit tables of objects, short
//! exact sequences and (optionally) morphisms.
//!
//! A table never synthesizes cokernels: every quotient the engine asks for
//! must have been declared. The reserved id `"0"` denotes the zero object.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::category::{hn_filtration, Budget, Certificate, Enumeration, SlopeCategory};
use crate::degree::{DegreeValue, Variant};
use crate::error::{Result, SlopeError};
use crate::polygon::{degree_from_json, degree_to_json, NewtonPolygon};
use crate::rational::Q;

pub const ZERO: &str = "0";

pub const EULER_SEQUENCE: &str = include_str!("../fixtures/euler_sequence.json");
pub const LATTICE_DIAGONAL: &str = include_str!("../fixtures/lattice_diagonal.json");
pub const PROJECTIVE_SUM: &str = include_str!("../fixtures/projective_sum.json");

/// Shipped fixtures by name.
pub fn fixture(name: &str) -> Option<&'static str> {
    match name {
        "euler_sequence" => Some(EULER_SEQUENCE),
        "lattice_diagonal" => Some(LATTICE_DIAGONAL),
        "projective_sum" => Some(PROJECTIVE_SUM),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableObject {
    pub id: String,
    pub rank: usize,
    pub degree: DegreeValue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorphismKind {
    Identity,
    Zero,
    General,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableMorphism {
    pub id: String,
    pub source: String,
    pub target: String,
    pub kernel: String,
    pub image: String,
    pub kind: MorphismKind,
}

#[derive(Clone, Debug)]
pub struct TableCategory {
    pub label: String,
    variant: Variant,
    objects: BTreeMap<String, TableObject>,
    /// `(sub, ambient) ↦ quotient`.
    exact: BTreeMap<(String, String), String>,
    pub morphisms: Vec<TableMorphism>,
}

fn str_field<'a>(v: &'a Value, key: &str, loc: &str) -> Result<&'a str> {
    v.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| SlopeError::schema(loc, format!("missing string field {key:?}")))
}

impl TableCategory {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| SlopeError::schema("document", e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let label = v.get("label").and_then(Value::as_str).unwrap_or("").to_string();
        let objs = v
            .get("objects")
            .and_then(Value::as_array)
            .ok_or_else(|| SlopeError::schema("objects", "expected an array"))?;
        let mut objects = BTreeMap::new();
        let mut variant: Option<Variant> = None;
        for (i, o) in objs.iter().enumerate() {
            let loc = format!("objects[{i}]");
            let id = str_field(o, "id", &loc)?.to_string();
            if id == ZERO {
                return Err(SlopeError::schema(&loc, "id \"0\" is reserved for the zero object"));
            }
            let rank = o
                .get("rank")
                .and_then(Value::as_u64)
                .filter(|&r| r > 0)
                .ok_or_else(|| SlopeError::schema(&loc, "rank must be a positive integer"))?
                as usize;
            let degree = degree_from_json(
                o.get("deg").ok_or_else(|| SlopeError::schema(&loc, "missing deg"))?,
                &loc,
            )?;
            match variant {
                None => variant = Some(degree.variant()),
                Some(w) if w != degree.variant() => {
                    return Err(SlopeError::schema(&loc, "all degrees must use the same degree group"))
                }
                _ => {}
            }
            if objects
                .insert(id.clone(), TableObject { id: id.clone(), rank, degree })
                .is_some()
            {
                return Err(SlopeError::schema(&loc, format!("duplicate id {id:?}")));
            }
        }
        let mut cat = TableCategory {
            label,
            variant: variant.unwrap_or(Variant::Rational),
            objects,
            exact: BTreeMap::new(),
            morphisms: Vec::new(),
        };
        let triples = v.get("exact").and_then(Value::as_array).cloned().unwrap_or_default();
        for (i, t) in triples.iter().enumerate() {
            let loc = format!("exact[{i}]");
            let ids: Vec<&str> = t
                .as_array()
                .filter(|a| a.len() == 3)
                .and_then(|a| a.iter().map(Value::as_str).collect())
                .ok_or_else(|| SlopeError::schema(&loc, "expected [sub, ambient, quotient]"))?;
            for id in &ids {
                cat.lookup(id).map_err(|_| SlopeError::schema(&loc, format!("dangling id {id:?}")))?;
            }
            cat.check_triple(ids[0], ids[1], ids[2])
                .map_err(|e| SlopeError::schema(&loc, e.to_string()))?;
            cat.exact
                .insert((ids[0].to_string(), ids[1].to_string()), ids[2].to_string());
        }
        cat.check_closure()?;
        let morphs = v.get("morphisms").and_then(Value::as_array).cloned().unwrap_or_default();
        for (i, m) in morphs.iter().enumerate() {
            let loc = format!("morphisms[{i}]");
            let kind = match m.get("kind").and_then(Value::as_str).unwrap_or("general") {
                "identity" => MorphismKind::Identity,
                "zero" => MorphismKind::Zero,
                "general" => MorphismKind::General,
                other => return Err(SlopeError::schema(&loc, format!("unknown kind {other:?}"))),
            };
            let morph = TableMorphism {
                id: m.get("id").and_then(Value::as_str).unwrap_or("").to_string(),
                source: str_field(m, "source", &loc)?.to_string(),
                target: str_field(m, "target", &loc)?.to_string(),
                kernel: str_field(m, "kernel", &loc)?.to_string(),
                image: str_field(m, "image", &loc)?.to_string(),
                kind,
            };
            cat.check_morphism(&morph).map_err(|e| SlopeError::schema(&loc, e.to_string()))?;
            cat.morphisms.push(morph);
        }
        Ok(cat)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn object_ids(&self) -> Vec<String> {
        self.objects.keys().cloned().collect()
    }

    pub fn lookup(&self, id: &str) -> Result<TableObject> {
        if id == ZERO {
            return Ok(TableObject {
                id: ZERO.into(),
                rank: 0,
                degree: DegreeValue::zero(self.variant),
            });
        }
        self.objects
            .get(id)
            .cloned()
            .ok_or_else(|| SlopeError::invalid(format!("unknown object {id:?}")))
    }

    fn check_triple(&self, s: &str, m: &str, q: &str) -> Result<()> {
        let (s, m, q) = (self.lookup(s)?, self.lookup(m)?, self.lookup(q)?);
        if s.rank + q.rank != m.rank {
            return Err(SlopeError::invalid(format!(
                "rank not additive on ({}, {}, {})",
                s.id, m.id, q.id
            )));
        }
        if s.degree.add(&q.degree)? != m.degree {
            return Err(SlopeError::invalid(format!(
                "degree not additive on ({}, {}, {}): {} + {} != {}",
                s.id, m.id, q.id, s.degree, q.degree, m.degree
            )));
        }
        Ok(())
    }

    /// Declared subobject chains must compose, and the quotients along a
    /// chain `A ⊂ B ⊂ C` must form the declared sequence
    /// `B/A ⊂ C/A ↠ C/B`.
    fn check_closure(&self) -> Result<()> {
        for ((a, b), ba) in &self.exact {
            for ((b2, c), cb) in &self.exact {
                if b2 != b {
                    continue;
                }
                let ca = self.exact.get(&(a.clone(), c.clone())).ok_or_else(|| {
                    SlopeError::schema("exact", format!("{a} ⊂ {b} ⊂ {c} declared but {a} ⊂ {c} is not"))
                })?;
                match self.quotient_id(ca, ba) {
                    Some(q) if &q == cb => {}
                    _ => {
                        return Err(SlopeError::schema(
                            "exact",
                            format!("{ba} ⊂ {ca} with quotient {cb} must be declared (from {a} ⊂ {b} ⊂ {c})"),
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    fn check_morphism(&self, f: &TableMorphism) -> Result<()> {
        let src = self.lookup(&f.source)?;
        self.lookup(&f.target)?;
        let ker = self.lookup(&f.kernel)?;
        let img = self.lookup(&f.image)?;
        if ker.rank + img.rank != src.rank {
            return Err(SlopeError::invalid("rank(kernel) + rank(image) != rank(source)"));
        }
        if !self.is_sub(&f.source, &f.kernel) || !self.is_sub(&f.target, &f.image) {
            return Err(SlopeError::invalid("kernel and image must be declared subobjects"));
        }
        match f.kind {
            MorphismKind::Identity if f.source != f.target || f.kernel != ZERO => {
                Err(SlopeError::invalid("identity must be an endomorphism with zero kernel"))
            }
            MorphismKind::Zero if f.image != ZERO => Err(SlopeError::invalid("zero morphism has zero image")),
            _ => Ok(()),
        }
    }

    /// `M / S` for declared pairs, plus the trivial cases `M/M` and `M/0`.
    pub fn quotient_id(&self, m: &str, s: &str) -> Option<String> {
        if s == m {
            Some(ZERO.into())
        } else if s == ZERO {
            Some(m.into())
        } else {
            self.exact.get(&(s.to_string(), m.to_string())).cloned()
        }
    }

    fn is_sub(&self, m: &str, s: &str) -> bool {
        self.quotient_id(m, s).is_some()
    }

    /// Declared non-zero proper subobjects of `m`, in id order.
    pub fn declared_subs(&self, m: &str) -> Vec<String> {
        self.exact
            .keys()
            .filter(|(_, amb)| amb == m)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn object_json(&self, id: &str) -> Result<Value> {
        let o = self.lookup(id)?;
        Ok(json!({"id": o.id, "rank": o.rank, "degree": degree_to_json(&o.degree)}))
    }
}

impl SlopeCategory for TableCategory {
    type Object = String;
    type Sub = String;

    fn variant(&self) -> Variant {
        self.variant
    }

    fn rank(&self, obj: &String) -> usize {
        self.lookup(obj).map(|o| o.rank).unwrap_or(0)
    }

    fn degree(&self, obj: &String) -> Result<DegreeValue> {
        Ok(self.lookup(obj)?.degree)
    }

    fn whole(&self, obj: &String) -> String {
        obj.clone()
    }

    fn sub_rank(&self, _obj: &String, sub: &String) -> usize {
        self.rank(sub)
    }

    fn sub_degree(&self, _obj: &String, sub: &String) -> Result<DegreeValue> {
        self.degree(sub)
    }

    fn same_sub(&self, _obj: &String, a: &String, b: &String) -> bool {
        a == b
    }

    fn contains(&self, _obj: &String, big: &String, small: &String) -> bool {
        self.is_sub(big, small)
    }

    fn sub_object(&self, _obj: &String, sub: &String) -> Result<String> {
        Ok(sub.clone())
    }

    fn quotient(&self, obj: &String, sub: &String) -> Result<String> {
        self.quotient_id(obj, sub)
            .ok_or_else(|| SlopeError::Quotient(format!("{sub} ⊂ {obj} is not declared")))
    }

    fn image_in_quotient(&self, obj: &String, base: &String, sub: &String) -> Result<String> {
        let image = self
            .quotient_id(sub, base)
            .ok_or_else(|| SlopeError::Quotient(format!("{base} ⊂ {sub} is not declared")))?;
        let quot = self.quotient(obj, base)?;
        if !self.is_sub(&quot, &image) {
            return Err(SlopeError::Quotient(format!("{image} ⊂ {quot} is not declared")));
        }
        Ok(image)
    }

    fn pullback(&self, obj: &String, sub: &String, qsub: &String) -> Result<String> {
        let quot = self.quotient(obj, sub)?;
        if qsub == &quot {
            return Ok(obj.clone());
        }
        let mut candidates: Vec<String> = self.declared_subs(obj);
        candidates.push(obj.clone());
        candidates
            .into_iter()
            .find(|t| self.is_sub(t, sub) && self.quotient_id(t, sub).as_deref() == Some(qsub.as_str()))
            .ok_or_else(|| SlopeError::Quotient(format!("no declared preimage of {qsub} in {obj}")))
    }

    fn strict_subobjects(&self, obj: &String, _budget: &Budget) -> Result<Enumeration<String>> {
        self.lookup(obj)?;
        Ok(Enumeration {
            subs: self.declared_subs(obj),
            certificate: Certificate::Complete,
        })
    }
}

/// Multiplicity of each break, keyed by slope.
fn break_counts(p: &NewtonPolygon) -> Result<BTreeMap<Q, u64>> {
    let breaks = p
        .rational_breaks()
        .ok_or_else(|| SlopeError::VariantMismatch("graded comparison needs rational slopes".into()))?;
    Ok(breaks.into_iter().collect())
}

/// Report of the comparison `gr Ker f → Ker gr f` by rank accounting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrKernelReport {
    pub morphism: String,
    /// Per slope: multiplicity in `gr Ker f` and the interval of possible
    /// ranks of `Ker gr f` in that slope.
    pub rows: Vec<(Q, u64, u64, u64)>,
    pub verdict: GrKernelVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrKernelVerdict {
    /// Ranks match in every slope and are forced.
    Isomorphic,
    /// Some slope has incompatible ranks.
    NotIsomorphic,
    /// Rank accounting alone cannot decide.
    Undetermined,
}

impl GrKernelReport {
    pub fn to_json(&self) -> Value {
        json!({
            "morphism": self.morphism,
            "rows": self.rows.iter().map(|(s, k, lo, hi)| json!({
                "slope": crate::rational::fmt_q(s),
                "gr_ker": k,
                "ker_gr_min": lo,
                "ker_gr_max": hi,
            })).collect::<Vec<_>>(),
            "verdict": match self.verdict {
                GrKernelVerdict::Isomorphic => "isomorphic",
                GrKernelVerdict::NotIsomorphic => "not_isomorphic",
                GrKernelVerdict::Undetermined => "undetermined",
            },
        })
    }
}

/// Compares the graded pieces of the kernel with the kernel of the graded
/// morphism. In slope `λ`, `Ker(gr^λ f)` has rank between
/// `m_λ(source) − m_λ(target)` and `m_λ(source)`; the identity and zero
/// morphisms pin it to `0` and `m_λ(source)`.
pub fn gr_kernel_demo(cat: &TableCategory, morphism: &str, budget: &Budget) -> Result<GrKernelReport> {
    let f = cat
        .morphisms
        .iter()
        .find(|m| m.id == morphism)
        .ok_or_else(|| SlopeError::invalid(format!("fixture has no morphism {morphism:?}")))?;
    let polygon = |id: &str| -> Result<BTreeMap<Q, u64>> {
        if cat.rank(&id.to_string()) == 0 {
            return Ok(BTreeMap::new());
        }
        break_counts(&hn_filtration(cat, &id.to_string(), budget)?.polygon)
    };
    let src = polygon(&f.source)?;
    let tgt = polygon(&f.target)?;
    let ker = polygon(&f.kernel)?;
    let slopes: BTreeSet<Q> = src.keys().chain(ker.keys()).cloned().collect();
    let mut rows = Vec::new();
    let mut verdict = GrKernelVerdict::Isomorphic;
    for s in slopes.into_iter().rev() {
        let m_src = src.get(&s).copied().unwrap_or(0);
        let m_tgt = tgt.get(&s).copied().unwrap_or(0);
        let k = ker.get(&s).copied().unwrap_or(0);
        let (lo, hi) = match f.kind {
            MorphismKind::Identity => (0, 0),
            MorphismKind::Zero => (m_src, m_src),
            MorphismKind::General => (m_src.saturating_sub(m_tgt), m_src),
        };
        if k < lo || k > hi {
            verdict = GrKernelVerdict::NotIsomorphic;
        } else if lo != hi && verdict == GrKernelVerdict::Isomorphic {
            verdict = GrKernelVerdict::Undetermined;
        }
        rows.push((s, k, lo, hi));
    }
    Ok(GrKernelReport {
        morphism: f.id.clone(),
        rows,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::{is_semistable, universal_destabilizer};
    use crate::degree::SlopeKey;
    use crate::rational::{q, qf};

    fn load(text: &str) -> TableCategory {
        TableCategory::from_json_str(text).unwrap()
    }

    #[test]
    fn fixtures_load() {
        for name in ["euler_sequence", "lattice_diagonal", "projective_sum"] {
            load(fixture(name).unwrap());
        }
    }

    #[test]
    fn additivity_violation_is_rejected() {
        let bad = r#"{"objects":[{"id":"S","rank":1,"deg":"1"},{"id":"M","rank":2,"deg":"0"},
            {"id":"Q","rank":1,"deg":"0"}],"exact":[["S","M","Q"]]}"#;
        let err = TableCategory::from_json_str(bad).unwrap_err();
        assert!(err.to_string().contains("(S, M, Q)"), "{err}");
    }

    #[test]
    fn dangling_id_is_rejected() {
        let bad = r#"{"objects":[{"id":"M","rank":1,"deg":"0"}],"exact":[["X","M","0"]]}"#;
        assert!(TableCategory::from_json_str(bad).is_err());
    }

    #[test]
    fn empty_category_loads() {
        let cat = load(r#"{"objects":[]}"#);
        assert_eq!(cat.rank(&ZERO.to_string()), 0);
    }

    #[test]
    fn uncomposed_chain_is_rejected() {
        let bad = r#"{"objects":[{"id":"A","rank":1,"deg":"0"},{"id":"B","rank":2,"deg":"0"},
            {"id":"C","rank":3,"deg":"0"}],"exact":[["A","B","A"],["B","C","A"]]}"#;
        assert!(TableCategory::from_json_str(bad).is_err());
    }

    #[test]
    fn enumeration_and_quotients() {
        let cat = load(EULER_SEQUENCE);
        let b = Budget::default();
        assert_eq!(cat.strict_subobjects(&"O2".into(), &b).unwrap().subs, vec!["Om1".to_string()]);
        assert!(cat.strict_subobjects(&"O1".into(), &b).unwrap().subs.is_empty());
        assert_eq!(cat.quotient(&"O2".into(), &"Om1".into()).unwrap(), "O1");
        assert_eq!(cat.quotient(&"O2".into(), &"O2".into()).unwrap(), ZERO);
        assert_eq!(cat.quotient(&"O2".into(), &ZERO.into()).unwrap(), "O2");
        let rem = load(PROJECTIVE_SUM);
        assert_eq!(rem.strict_subobjects(&"OOm1".into(), &b).unwrap().subs, vec!["O".to_string()]);
    }

    #[test]
    fn euler_sequence_destabilizer_is_whole() {
        let cat = load(EULER_SEQUENCE);
        let d = universal_destabilizer(&cat, &"O2".into(), &Budget::default()).unwrap();
        assert_eq!(d.sub, "O2");
        assert_eq!(d.slope.rational_value().unwrap(), q(0));
        assert!(d.certificate.is_complete());
        let hn = hn_filtration(&cat, &"O2".into(), &Budget::default()).unwrap();
        assert_eq!(hn.polygon, NewtonPolygon::from_rational_breaks(&[(q(0), 2)]).unwrap());
    }

    #[test]
    fn middle_term_has_smaller_slope() {
        let cat = load(PROJECTIVE_SUM);
        let b = Budget::default();
        let mu_m = cat.slope(&"OOm1".into()).unwrap();
        assert_eq!(mu_m.rational_value().unwrap(), qf(-1, 2));
        assert!(is_semistable(&cat, &"O".into(), &b).unwrap().0);
        assert!(is_semistable(&cat, &"O3".into(), &b).unwrap().0);
        assert!(!is_semistable(&cat, &"OOm1".into(), &b).unwrap().0);
        let hn = hn_filtration(&cat, &"OOm1".into(), &b).unwrap();
        assert_eq!(
            hn.polygon,
            NewtonPolygon::from_rational_breaks(&[(q(0), 1), (q(-1), 1)]).unwrap()
        );
    }

    #[test]
    fn lattice_triple_as_table() {
        let cat = load(LATTICE_DIAGONAL);
        let d = universal_destabilizer(&cat, &"Z2".into(), &Budget::default()).unwrap();
        assert_eq!(d.sub, "Z2");
        assert_eq!(d.slope, SlopeKey::new(DegreeValue::LogPositive(q(1)), 2).unwrap());
    }

    #[test]
    fn gr_kernel_examples() {
        let cat = load(EULER_SEQUENCE);
        let b = Budget::default();
        let r = gr_kernel_demo(&cat, "proj", &b).unwrap();
        assert_eq!(r.verdict, GrKernelVerdict::NotIsomorphic);
        assert!(r.rows.contains(&(q(-1), 1, 0, 0)));
        assert_eq!(gr_kernel_demo(&cat, "id_O2", &b).unwrap().verdict, GrKernelVerdict::Isomorphic);
        assert_eq!(gr_kernel_demo(&cat, "zero_O2", &b).unwrap().verdict, GrKernelVerdict::Isomorphic);
        assert!(gr_kernel_demo(&cat, "missing", &b).is_err());
    }
}
