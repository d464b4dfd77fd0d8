//! Seeded property checks of the slope laws against the backends.
//!
//! Every trial draws from its own ChaCha stream `(seed, index)`, so a
//! report is reproducible trial by trial.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::category::{
    hn_filtration, is_hn_type_flag, is_semistable, make_flag, polygon_of_flag, slope_json, Budget, Certificate,
    Flag, SlopeCategory,
};
use crate::degree::{cmp_slope, SlopeKey};
use crate::diff::{katz_rank_spectral, DifferentialModule};
use crate::error::Result;
use crate::filtered::{
    candidate_subspaces, dual_filtered, filtered_morphisms, random_filtered, tensor_filtered, FilteredCategory,
    FilteredSampler, FilteredSpace, Filtration,
};
use crate::lattice::{tensor_lattice, EuclideanLattice, LatticeCategory, Sublattice};
use crate::linalg::{Subspace, Vector};
use crate::polygon::{polygon_combine, polygon_dominates, CombineMode};
use crate::rational::{fmt_q, qf, Q};
use crate::series::Series;
use crate::table::{MorphismKind, TableCategory, ZERO};

/// The random stream of trial `index`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

type Obj<S> = <<S as Sampler>::Cat as SlopeCategory>::Object;
type Sub<S> = <<S as Sampler>::Cat as SlopeCategory>::Sub;

/// Random objects, subobjects and morphisms of one backend.
pub trait Sampler {
    type Cat: SlopeCategory;

    fn category(&self) -> &Self::Cat;

    fn backend(&self) -> &'static str;

    fn object(&self, rng: &mut ChaCha8Rng, index: usize) -> Result<Obj<Self>>;

    /// A non-zero proper strict subobject, if the object has one to offer.
    fn sub(&self, obj: &Obj<Self>, rng: &mut ChaCha8Rng) -> Result<Option<Sub<Self>>>;

    /// Source and target of an epi-monic morphism.
    fn epimonic(&self, _rng: &mut ChaCha8Rng, _index: usize) -> Result<Option<(Obj<Self>, Obj<Self>)>> {
        Ok(None)
    }

    /// Source and target of a non-zero morphism.
    fn morphism(&self, _rng: &mut ChaCha8Rng, _index: usize) -> Result<Option<(Obj<Self>, Obj<Self>)>> {
        Ok(None)
    }

    fn describe(&self, obj: &Obj<Self>) -> Value;

    fn describe_sub(&self, obj: &Obj<Self>, sub: &Sub<Self>) -> Value;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub law: &'static str,
    pub detail: String,
}

impl Violation {
    fn to_json(&self) -> Value {
        json!({"index": self.index, "law": self.law, "detail": self.detail})
    }
}

/// Outcome of a law check: how often each law was exercised and what broke.
#[derive(Clone, Debug, Default)]
pub struct LawReport {
    pub backend: String,
    pub law: String,
    pub samples: usize,
    pub seed: u64,
    pub checked: BTreeMap<&'static str, usize>,
    pub violations: Vec<Violation>,
    /// Trials skipped because a certificate was only heuristic.
    pub skipped: usize,
    pub notes: Vec<String>,
}

impl LawReport {
    fn new(backend: &str, law: &str, samples: usize, seed: u64) -> Self {
        LawReport {
            backend: backend.into(),
            law: law.into(),
            samples,
            seed,
            ..Default::default()
        }
    }

    fn tick(&mut self, law: &'static str) {
        *self.checked.entry(law).or_default() += 1;
    }

    fn fail(&mut self, index: usize, law: &'static str, detail: impl Into<String>) {
        self.violations.push(Violation {
            index,
            law,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "backend": self.backend,
            "law": self.law,
            "samples": self.samples,
            "seed": self.seed,
            "checked": self.checked,
            "skipped_heuristic": self.skipped,
            "violations": self.violations.iter().map(Violation::to_json).collect::<Vec<_>>(),
            "notes": self.notes,
        })
    }
}

fn key_str(k: &SlopeKey) -> String {
    slope_json(k).to_string()
}

/// Rank and degree additivity, `deg S` computed in place versus on the
/// subobject, the min–max inequality of short exact sequences, slopes
/// along epi-monics and along morphisms of semistable objects.
pub fn check_degree_axioms<S: Sampler>(s: &S, samples: usize, seed: u64, budget: &Budget) -> Result<LawReport> {
    let cat = s.category();
    let mut report = LawReport::new(s.backend(), "axioms", samples, seed);
    for i in 0..samples {
        let mut rng = trial_rng(seed, i as u64);
        let obj = s.object(&mut rng, i)?;
        if cat.rank(&obj) > 0 {
            if let Some(sub) = s.sub(&obj, &mut rng)? {
                short_exact_laws(s, &obj, &sub, i, &mut report)?;
            }
        }
        if let Some((a, b)) = s.epimonic(&mut rng, i)? {
            report.tick("epi_monic");
            if cat.rank(&a) != cat.rank(&b) {
                report.fail(i, "epi_monic", "ranks differ along an epi-monic");
            } else if cat.rank(&a) > 0 {
                let (ka, kb) = (cat.slope(&a)?, cat.slope(&b)?);
                if cmp_slope(&ka, &kb)? == Ordering::Greater {
                    report.fail(i, "epi_monic", format!("μ(source) {} > μ(target) {}", key_str(&ka), key_str(&kb)));
                }
            }
        }
        if let Some((a, b)) = s.morphism(&mut rng, i)? {
            let (sa, ca) = is_semistable(cat, &a, budget)?;
            let (sb, cb) = is_semistable(cat, &b, budget)?;
            if !(ca.is_complete() && cb.is_complete()) {
                report.skipped += 1;
            } else if sa && sb {
                report.tick("morphism_slope");
                let (ka, kb) = (cat.slope(&a)?, cat.slope(&b)?);
                if cmp_slope(&ka, &kb)? == Ordering::Greater {
                    report.fail(
                        i,
                        "morphism_slope",
                        format!("non-zero morphism from slope {} to slope {}", key_str(&ka), key_str(&kb)),
                    );
                }
            }
        }
    }
    Ok(report)
}

fn short_exact_laws<S: Sampler>(
    s: &S,
    obj: &Obj<S>,
    sub: &Sub<S>,
    i: usize,
    report: &mut LawReport,
) -> Result<()> {
    let cat = s.category();
    let m = cat.sub_object(obj, sub)?;
    let p = cat.quotient(obj, sub)?;
    let (rm, rp, rn) = (cat.rank(&m), cat.rank(&p), cat.rank(obj));
    report.tick("rank_additivity");
    if rm + rp != rn {
        report.fail(i, "rank_additivity", format!("{rm} + {rp} != {rn}"));
        return Ok(());
    }
    let (dm, dp, dn) = (cat.degree(&m)?, cat.degree(&p)?, cat.degree(obj)?);
    report.tick("degree_additivity");
    if dm.add(&dp)? != dn {
        report.fail(i, "degree_additivity", format!("{dm} + {dp} != {dn}"));
    }
    report.tick("sub_degree");
    let inplace = cat.sub_degree(obj, sub)?;
    if inplace != dm {
        report.fail(i, "sub_degree", format!("in place {inplace}, as an object {dm}"));
    }
    if rm > 0 && rp > 0 {
        report.tick("min_max");
        let (km, kp, kn) = (cat.slope(&m)?, cat.slope(&p)?, cat.slope(obj)?);
        let (lo, hi) = if cmp_slope(&km, &kp)? == Ordering::Greater {
            (&kp, &km)
        } else {
            (&km, &kp)
        };
        let below = cmp_slope(lo, &kn)?;
        let above = cmp_slope(&kn, hi)?;
        let all_equal = cmp_slope(lo, hi)? == Ordering::Equal;
        let ok = below != Ordering::Greater
            && above != Ordering::Greater
            && ((below == Ordering::Less && above == Ordering::Less) || all_equal);
        if !ok {
            report.fail(
                i,
                "min_max",
                format!("μ(S) {}, μ(N) {}, μ(N/S) {}", key_str(&km), key_str(&kn), key_str(&kp)),
            );
        }
    }
    Ok(())
}

/// A strict subobject of a semistable object with strictly smaller slope.
#[derive(Clone, Debug)]
pub struct ExactnessWitness {
    pub index: usize,
    pub object: Value,
    pub sub: Value,
    pub object_slope: SlopeKey,
    pub sub_slope: SlopeKey,
}

#[derive(Clone, Debug)]
pub struct ExactnessReport {
    pub backend: String,
    pub samples: usize,
    pub seed: u64,
    /// Objects certified semistable and searched.
    pub semistable: usize,
    pub witness: Option<ExactnessWitness>,
}

impl ExactnessReport {
    pub fn to_json(&self) -> Value {
        json!({
            "backend": self.backend,
            "law": "exactness",
            "samples": self.samples,
            "seed": self.seed,
            "semistable_examined": self.semistable,
            "verdict": if self.witness.is_some() { "counterexample" } else { "no_counterexample" },
            "witness": self.witness.as_ref().map(|w| json!({
                "index": w.index,
                "object": w.object,
                "sub": w.sub,
                "object_slope": slope_json(&w.object_slope),
                "sub_slope": slope_json(&w.sub_slope),
            })),
        })
    }
}

/// Searches semistable objects for a strict subobject of smaller slope.
/// Among the subobjects of the first object that has one, the witness is
/// the one of largest slope, latest in enumeration order.
pub fn check_exactness<S: Sampler>(s: &S, samples: usize, seed: u64, budget: &Budget) -> Result<ExactnessReport> {
    let cat = s.category();
    let mut report = ExactnessReport {
        backend: s.backend().into(),
        samples,
        seed,
        semistable: 0,
        witness: None,
    };
    for i in 0..samples {
        let mut rng = trial_rng(seed, i as u64);
        let obj = s.object(&mut rng, i)?;
        if cat.rank(&obj) == 0 {
            continue;
        }
        let (ok, cert) = is_semistable(cat, &obj, budget)?;
        if !ok || !cert.is_complete() {
            continue;
        }
        report.semistable += 1;
        let mu = cat.slope(&obj)?;
        let en = cat.strict_subobjects(&obj, budget)?;
        let mut best: Option<(Sub<S>, SlopeKey)> = None;
        for sub in en.subs {
            let k = cat.sub_slope(&obj, &sub)?;
            if cmp_slope(&k, &mu)? != Ordering::Less {
                continue;
            }
            let better = match &best {
                None => true,
                Some((_, b)) => cmp_slope(&k, b)? != Ordering::Less,
            };
            if better {
                best = Some((sub, k));
            }
        }
        if let Some((sub, k)) = best {
            report.witness = Some(ExactnessWitness {
                index: i,
                object: s.describe(&obj),
                sub: s.describe_sub(&obj, &sub),
                object_slope: mu,
                sub_slope: k,
            });
            break;
        }
    }
    Ok(report)
}

/// Every chain of enumerated strict subobjects, closed by the whole object.
pub fn enumerate_flags<C: SlopeCategory>(
    cat: &C,
    obj: &C::Object,
    budget: &Budget,
) -> Result<(Vec<Flag<C::Object, C::Sub>>, Certificate)> {
    let en = cat.strict_subobjects(obj, budget)?;
    let mut subs = en.subs;
    subs.sort_by_key(|s| cat.sub_rank(obj, s));
    let mut chains: Vec<Vec<usize>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    let mut cert = en.certificate;
    while let Some(chain) = frontier.pop() {
        let last = chain.last().copied();
        for (j, s) in subs.iter().enumerate() {
            let extends = match last {
                None => true,
                Some(l) => {
                    cat.sub_rank(obj, s) > cat.sub_rank(obj, &subs[l]) && cat.contains(obj, s, &subs[l])
                }
            };
            if extends {
                let mut next = chain.clone();
                next.push(j);
                chains.push(next.clone());
                frontier.push(next);
            }
        }
        if chains.len() > budget.max_candidates {
            cert = Certificate::heuristic(format!("more than {} flags", budget.max_candidates));
            break;
        }
    }
    let mut flags = Vec::with_capacity(chains.len());
    for chain in chains {
        let mut steps: Vec<C::Sub> = chain.iter().map(|&j| subs[j].clone()).collect();
        steps.push(cat.whole(obj));
        flags.push(make_flag(cat, obj, steps)?);
    }
    Ok((flags, cert))
}

/// Brute-force flag enumeration against the HN flag of one object: exactly
/// one flag has semistable graded pieces of strictly decreasing slope, it
/// is the HN flag, and every flag polygon lies below the HN polygon with the
/// same end points. Returns the number of flags examined, or `None` when a
/// certificate was heuristic.
pub fn check_flags_of<C: SlopeCategory>(
    cat: &C,
    obj: &C::Object,
    budget: &Budget,
    index: usize,
    report: &mut LawReport,
) -> Result<Option<usize>> {
    let hn = hn_filtration(cat, obj, budget)?;
    if !hn.is_complete() {
        return Ok(None);
    }
    let (flags, cert) = enumerate_flags(cat, obj, budget)?;
    if !cert.is_complete() {
        return Ok(None);
    }
    let end = (cat.rank(obj) as u64, cat.degree(obj)?);
    if hn.polygon.endpoint() != end {
        report.fail(index, "endpoints", "HN polygon does not end at (rank, degree)");
    }
    let mut qualifying = 0;
    for flag in &flags {
        let poly = polygon_of_flag(cat.variant(), flag)?;
        report.tick("dominance");
        if poly.endpoint() != end || !polygon_dominates(&hn.polygon, &poly)? {
            report.fail(index, "dominance", format!("flag of length {} escapes the HN polygon", flag.len()));
        }
        let (ok, c) = is_hn_type_flag(cat, flag, budget)?;
        if !c.is_complete() {
            return Ok(None);
        }
        if ok {
            qualifying += 1;
            let same = flag.len() == hn.flag.len()
                && flag
                    .steps
                    .iter()
                    .zip(&hn.flag.steps)
                    .all(|(a, b)| cat.same_sub(obj, &a.sub, &b.sub));
            if !same {
                report.fail(index, "hn_uniqueness", "a flag of HN type differs from the computed HN flag");
            }
        }
    }
    report.tick("hn_uniqueness");
    if qualifying != 1 {
        report.fail(index, "hn_uniqueness", format!("{qualifying} flags of HN type"));
    }
    Ok(Some(flags.len()))
}

pub fn check_dominance<S: Sampler>(s: &S, samples: usize, seed: u64, budget: &Budget) -> Result<LawReport> {
    let mut report = LawReport::new(s.backend(), "dominance", samples, seed);
    let mut flags = 0;
    for i in 0..samples {
        let mut rng = trial_rng(seed, i as u64);
        let obj = s.object(&mut rng, i)?;
        if s.category().rank(&obj) == 0 {
            continue;
        }
        match check_flags_of(s.category(), &obj, budget, i, &mut report)? {
            Some(n) => flags += n,
            None => report.skipped += 1,
        }
    }
    report.notes.push(format!("{flags} flags enumerated"));
    Ok(report)
}

/// Filtered spaces with random dimension in `1..=max_dim`.
#[derive(Clone, Debug)]
pub struct FilteredHarness {
    pub max_dim: usize,
    pub count: usize,
    pub max_jump: i64,
    pub integer_jumps: bool,
}

impl Default for FilteredHarness {
    fn default() -> Self {
        FilteredHarness {
            max_dim: 3,
            count: 2,
            max_jump: 3,
            integer_jumps: false,
        }
    }
}

impl FilteredHarness {
    fn space(&self, rng: &mut ChaCha8Rng) -> FilteredSpace {
        let dim = rng.gen_range(1..=self.max_dim.max(1));
        random_filtered(
            rng,
            &FilteredSampler {
                dim,
                count: self.count,
                max_jump: self.max_jump,
                integer_jumps: self.integer_jumps,
            },
        )
    }
}

fn small_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    (0..dim).map(|_| Q::from_integer(rng.gen_range(-2..=2).into())).collect()
}

impl Sampler for FilteredHarness {
    type Cat = FilteredCategory;

    fn category(&self) -> &FilteredCategory {
        &FilteredCategory
    }

    fn backend(&self) -> &'static str {
        "filtered"
    }

    fn object(&self, rng: &mut ChaCha8Rng, _index: usize) -> Result<FilteredSpace> {
        Ok(self.space(rng))
    }

    fn sub(&self, obj: &FilteredSpace, rng: &mut ChaCha8Rng) -> Result<Option<Subspace>> {
        let n = obj.dim();
        if n < 2 {
            return Ok(None);
        }
        if rng.gen_bool(0.5) {
            let cands: Vec<Subspace> = candidate_subspaces(obj, 8, 10_000)
                .subspaces
                .into_iter()
                .filter(|s| !s.is_zero() && !s.is_full())
                .collect();
            if !cands.is_empty() {
                return Ok(Some(cands[rng.gen_range(0..cands.len())].clone()));
            }
        }
        let k = rng.gen_range(1..n);
        loop {
            let vs: Vec<Vector> = (0..k).map(|_| small_vector(rng, n)).collect();
            let s = Subspace::span(n, &vs)?;
            if s.dim() == k {
                return Ok(Some(s));
            }
        }
    }

    /// The identity of `V` into `V` with every jump raised by a
    /// non-decreasing amount, so `F^{≥λ} ⊆ F'^{≥λ}`.
    fn epimonic(&self, rng: &mut ChaCha8Rng, _index: usize) -> Result<Option<(FilteredSpace, FilteredSpace)>> {
        let v = self.space(rng);
        let mut raised = Vec::new();
        for f in v.filtrations() {
            let mut offset = Q::zero();
            let mut steps = Vec::new();
            for (j, s) in f.steps() {
                offset += qf(rng.gen_range(0..3), if self.integer_jumps { 1 } else { 2 });
                steps.push((j + &offset, s.clone()));
            }
            raised.push(Filtration::new(v.dim(), steps)?);
        }
        let w = FilteredSpace::new(v.dim(), raised)?;
        Ok(Some((v, w)))
    }

    fn morphism(&self, rng: &mut ChaCha8Rng, _index: usize) -> Result<Option<(FilteredSpace, FilteredSpace)>> {
        let a = self.space(rng);
        let b = self.space(rng);
        Ok((!filtered_morphisms(&a, &b)?.is_empty()).then_some((a, b)))
    }

    fn describe(&self, obj: &FilteredSpace) -> Value {
        obj.to_json()
    }

    fn describe_sub(&self, _obj: &FilteredSpace, sub: &Subspace) -> Value {
        json!(sub
            .basis()
            .iter()
            .map(|r| r.iter().map(fmt_q).collect::<Vec<_>>())
            .collect::<Vec<_>>())
    }
}

/// Euclidean lattices with random Gram matrices `B Bᵀ`. Trial 0 is the
/// standard lattice `ℤ²`.
#[derive(Clone, Debug)]
pub struct LatticeHarness {
    pub max_rank: usize,
    pub entry: i64,
}

impl Default for LatticeHarness {
    fn default() -> Self {
        LatticeHarness { max_rank: 3, entry: 2 }
    }
}

fn int_matrix(rows: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

fn gram_of(basis: &[Vec<i64>]) -> Result<EuclideanLattice> {
    let gram = basis
        .iter()
        .map(|a| {
            basis
                .iter()
                .map(|b| Q::from_integer(a.iter().zip(b).map(|(x, y)| x * y).sum::<i64>().into()))
                .collect()
        })
        .collect();
    EuclideanLattice::new(gram)
}

impl LatticeHarness {
    fn lattice(&self, rng: &mut ChaCha8Rng, rank: usize) -> Result<EuclideanLattice> {
        loop {
            let b: Vec<Vec<i64>> = (0..rank)
                .map(|_| (0..rank).map(|_| rng.gen_range(-self.entry..=self.entry)).collect())
                .collect();
            let rows: Vec<Vector> = b
                .iter()
                .map(|r| r.iter().map(|&x| Q::from_integer(x.into())).collect())
                .collect();
            if crate::linalg::rank(&rows, rank) == rank {
                return gram_of(&b);
            }
        }
    }
}

impl Sampler for LatticeHarness {
    type Cat = LatticeCategory;

    fn category(&self) -> &LatticeCategory {
        &LatticeCategory
    }

    fn backend(&self) -> &'static str {
        "lattice"
    }

    fn object(&self, rng: &mut ChaCha8Rng, index: usize) -> Result<EuclideanLattice> {
        if index == 0 {
            return Ok(EuclideanLattice::standard(2));
        }
        let rank = rng.gen_range(1..=self.max_rank.max(1));
        self.lattice(rng, rank)
    }

    fn sub(&self, obj: &EuclideanLattice, rng: &mut ChaCha8Rng) -> Result<Option<Sublattice>> {
        let r = obj.rank();
        if r < 2 {
            return Ok(None);
        }
        let k = rng.gen_range(1..r);
        loop {
            let vs: Vec<Vec<i64>> = (0..k).map(|_| (0..r).map(|_| rng.gen_range(-2..=2)).collect()).collect();
            if let Ok(s) = Sublattice::span(r, &int_matrix(&vs)) {
                return Ok(Some(s.saturate()));
            }
        }
    }

    /// A sublattice of index `k` included in the whole lattice.
    fn epimonic(&self, rng: &mut ChaCha8Rng, _index: usize) -> Result<Option<(EuclideanLattice, EuclideanLattice)>> {
        let rank = rng.gen_range(1..=self.max_rank.max(1));
        let l = self.lattice(rng, rank)?;
        let k = rng.gen_range(2..=4);
        let rows: Vec<Vec<i64>> = (0..rank)
            .map(|i| (0..rank).map(|j| if i != j { 0 } else if i == 0 { k } else { 1 }).collect())
            .collect();
        let source = EuclideanLattice::new(l.induced_gram(&int_matrix(&rows)))?;
        Ok(Some((source, l)))
    }

    fn describe(&self, obj: &EuclideanLattice) -> Value {
        obj.to_json()
    }

    fn describe_sub(&self, _obj: &EuclideanLattice, sub: &Sublattice) -> Value {
        sub.to_json()
    }
}

/// Objects, declared subobjects and declared morphisms of a table, in turn.
#[derive(Clone, Debug)]
pub struct TableHarness {
    pub table: TableCategory,
}

impl TableHarness {
    fn objects(&self) -> Vec<String> {
        self.table
            .object_ids()
            .into_iter()
            .filter(|id| self.table.rank(id) > 0)
            .collect()
    }
}

impl Sampler for TableHarness {
    type Cat = TableCategory;

    fn category(&self) -> &TableCategory {
        &self.table
    }

    fn backend(&self) -> &'static str {
        "table"
    }

    fn object(&self, _rng: &mut ChaCha8Rng, index: usize) -> Result<String> {
        let ids = self.objects();
        Ok(if ids.is_empty() {
            ZERO.to_string()
        } else {
            ids[index % ids.len()].clone()
        })
    }

    fn sub(&self, obj: &String, rng: &mut ChaCha8Rng) -> Result<Option<String>> {
        let subs = self.table.declared_subs(obj);
        Ok((!subs.is_empty()).then(|| subs[rng.gen_range(0..subs.len())].clone()))
    }

    fn morphism(&self, _rng: &mut ChaCha8Rng, index: usize) -> Result<Option<(String, String)>> {
        let nonzero: Vec<_> = self
            .table
            .morphisms
            .iter()
            .filter(|m| m.kind != MorphismKind::Zero && m.image != ZERO)
            .collect();
        Ok((!nonzero.is_empty()).then(|| {
            let m = nonzero[index % nonzero.len()];
            (m.source.clone(), m.target.clone())
        }))
    }

    fn describe(&self, obj: &String) -> Value {
        self.table.object_json(obj).unwrap_or(Value::Null)
    }

    fn describe_sub(&self, _obj: &String, sub: &String) -> Value {
        self.table.object_json(sub).unwrap_or(Value::Null)
    }
}

/// For single-filtration spaces the HN polygon of `V ⊗ W` is the tensor
/// of the polygons; for two filtrations, tensor products of semistable
/// spaces are checked to be semistable.
pub fn check_tensor_mult(
    harness: &FilteredHarness,
    samples: usize,
    seed: u64,
    budget: &Budget,
) -> Result<LawReport> {
    let mut report = LawReport::new("filtered", "tensor-mult", samples, seed);
    let cat = FilteredCategory;
    let single = FilteredHarness {
        count: 1,
        ..harness.clone()
    };
    let double = FilteredHarness {
        count: 2,
        integer_jumps: true,
        ..harness.clone()
    };
    let mut evidence = 0;
    for i in 0..samples {
        let mut rng = trial_rng(seed, i as u64);
        let (v, w) = (single.space(&mut rng), single.space(&mut rng));
        let t = tensor_filtered(&v, &w)?;
        let pv = hn_filtration(&cat, &v, budget)?.polygon;
        let pw = hn_filtration(&cat, &w, budget)?.polygon;
        let pt = hn_filtration(&cat, &t, budget)?.polygon;
        report.tick("single_filtration_breaks");
        if pt != polygon_combine(&pv, &pw, CombineMode::TensorMult)? {
            report.fail(i, "single_filtration_breaks", "tensor breaks are not the pairwise sums");
        }
        let (v, w) = (double.space(&mut rng), double.space(&mut rng));
        let (sv, cv) = is_semistable(&cat, &v, budget)?;
        let (sw, cw) = is_semistable(&cat, &w, budget)?;
        if sv && sw && cv.is_complete() && cw.is_complete() {
            let t = tensor_filtered(&v, &w)?;
            let (st, ct) = is_semistable(&cat, &t, budget)?;
            if !ct.is_complete() {
                report.skipped += 1;
                continue;
            }
            evidence += 1;
            report.tick("semistable_tensor");
            if !st {
                report.fail(i, "semistable_tensor", "tensor of semistable bifiltered spaces is not semistable");
            }
        }
    }
    report.notes.push(format!("{evidence} semistable two-filtration pairs tensored"));
    Ok(report)
}

/// Rank-one connections `∇ = f + θ`: the highest break of the tensor is at
/// most the larger of the two and the dual has the same highest break,
/// each break computed by the spectral estimate and compared with the
/// closed form `max(0, −v(f))`.
pub fn check_tensor_bounded(samples: usize, seed: u64) -> Result<LawReport> {
    let mut report = LawReport::new("diff", "tensor-bounded", samples, seed);
    let rho = |m: &DifferentialModule| -> Result<Q> { Ok(katz_rank_spectral(m, 16)?.estimate) };
    for i in 0..samples {
        let mut rng = trial_rng(seed, i as u64);
        let f = random_laurent(&mut rng);
        let g = if rng.gen_bool(0.3) {
            // force cancellation of the polar parts
            f.neg().add(&random_laurent(&mut rng).shift(rng.gen_range(1..3)))
        } else {
            random_laurent(&mut rng)
        };
        let (mf, mg) = (DifferentialModule::rank_one(f.clone()), DifferentialModule::rank_one(g.clone()));
        let mt = mf.tensor(&mg);
        let (rf, rg, rt) = (rho(&mf)?, rho(&mg)?, rho(&mt)?);
        for (m, r, s) in [(&f, &rf, "f"), (&g, &rg, "g")] {
            let closed = Q::from_integer((-m.valuation().unwrap_or(0)).max(0).into());
            if *r != closed {
                report.fail(i, "closed_form", format!("ρ({s}) = {} but −v = {}", fmt_q(r), fmt_q(&closed)));
            }
        }
        report.tick("tensor_bound");
        if rt > rf.clone().max(rg.clone()) {
            report.fail(
                i,
                "tensor_bound",
                format!("ρ(M⊗N) = {} > max({}, {})", fmt_q(&rt), fmt_q(&rf), fmt_q(&rg)),
            );
        }
        report.tick("dual");
        let rd = rho(&mf.dual())?;
        if rd != rf {
            report.fail(i, "dual", format!("ρ(M∨) = {} but ρ(M) = {}", fmt_q(&rd), fmt_q(&rf)));
        }
    }
    Ok(report)
}

fn random_laurent(rng: &mut ChaCha8Rng) -> Series {
    let start = rng.gen_range(-4..=1);
    let len = rng.gen_range(1..=4);
    let mut cs: Vec<Q> = (0..len).map(|_| Q::from_integer(rng.gen_range(-3..=3).into())).collect();
    if cs[0].is_zero() {
        cs[0] = Q::from_integer(1.into());
    }
    Series::exact(start, cs)
}

/// Subspaces spanned by vectors with entries in `[-2, 2]` (and, in
/// dimension 3, their annihilators), for brute-force scans.
pub fn small_subspaces(dim: usize) -> Vec<Subspace> {
    let mut lines = std::collections::BTreeSet::new();
    let total = 5usize.pow(dim as u32);
    for code in 1..total {
        let mut c = code;
        let v: Vector = (0..dim)
            .map(|_| {
                let x = (c % 5) as i64 - 2;
                c /= 5;
                Q::from_integer(x.into())
            })
            .collect();
        if v.iter().any(|x| !x.is_zero()) {
            lines.insert(Subspace::span(dim, &[v]).expect("vector length"));
        }
    }
    let mut out: Vec<Subspace> = lines.iter().cloned().collect();
    if dim == 3 {
        out.extend(lines.iter().map(Subspace::annihilator));
    }
    out.retain(|s| !s.is_zero() && !s.is_full());
    out
}

/// Semistable integer-jump spaces whose degree is coprime to the rank
/// have no proper subspace of the same slope. Scans the candidate lattice
/// and [`small_subspaces`]; trials continue until `samples` qualifying
/// spaces were examined or `20 × samples` attempts were made.
pub fn check_coprime_stable(samples: usize, seed: u64, budget: &Budget) -> Result<LawReport> {
    let mut report = LawReport::new("filtered", "coprime-stable", samples, seed);
    let cat = FilteredCategory;
    // two flags always admit a common splitting, so a semistable space
    // with two filtrations is a sum of lines of one integral slope
    let harness = FilteredHarness {
        max_dim: 3,
        count: 3,
        max_jump: 2,
        integer_jumps: true,
    };
    let mut found = 0;
    let mut attempts = 0;
    while found < samples && attempts < 60 * samples.max(1) {
        let i = attempts;
        attempts += 1;
        let mut rng = trial_rng(seed, i as u64);
        let mut v = harness.space(&mut rng);
        if v.dim() < 2 {
            v = harness.space(&mut rng);
        }
        let n = v.dim();
        if n < 2 {
            continue;
        }
        let deg = v.degree();
        let Some(d) = deg.is_integer().then(|| deg.to_integer()) else {
            continue;
        };
        if !d.gcd(&BigInt::from(n)).to_u64().is_some_and(|g| g == 1) {
            continue;
        }
        let (ok, cert) = is_semistable(&cat, &v, budget)?;
        if !cert.is_complete() || !ok {
            continue;
        }
        found += 1;
        let mu = deg / Q::from_integer((n as i64).into());
        let mut subs = cat.strict_subobjects(&v, budget)?.subs;
        subs.extend(small_subspaces(n));
        for s in subs {
            report.tick("no_equal_slope");
            let slope = v.sub_degree(&s) / Q::from_integer((s.dim() as i64).into());
            match slope.cmp(&mu) {
                Ordering::Equal => report.fail(i, "no_equal_slope", format!("subspace of dim {} has slope μ", s.dim())),
                Ordering::Greater => {
                    report.fail(i, "semistability", format!("subspace of dim {} exceeds μ", s.dim()))
                }
                Ordering::Less => {}
            }
        }
    }
    report.notes.push(format!("{found} qualifying spaces in {attempts} attempts"));
    if found < samples {
        report.notes.push(format!("only {found} of {samples} requested spaces found"));
    }
    Ok(report)
}

/// Checks that the dual's HN polygon is the negated polygon and that the
/// double dual is the original space.
pub fn check_duality(harness: &FilteredHarness, samples: usize, seed: u64, budget: &Budget) -> Result<LawReport> {
    let mut report = LawReport::new("filtered", "duality", samples, seed);
    let cat = FilteredCategory;
    for i in 0..samples {
        let mut rng = trial_rng(seed, i as u64);
        let v = harness.space(&mut rng);
        let d = dual_filtered(&v);
        report.tick("double_dual");
        if dual_filtered(&d) != v {
            report.fail(i, "double_dual", "double dual differs");
        }
        let hv = hn_filtration(&cat, &v, budget)?;
        let hd = hn_filtration(&cat, &d, budget)?;
        if !(hv.is_complete() && hd.is_complete()) {
            report.skipped += 1;
            continue;
        }
        report.tick("dual_polygon");
        if hd.polygon != polygon_combine(&hv.polygon, &hv.polygon, CombineMode::Dual)? {
            report.fail(i, "dual_polygon", "dual polygon is not the negated polygon");
        }
    }
    Ok(report)
}

/// Rank-2 semistable lattices tensored together, searched for a
/// destabilizing sublattice. Evidence only.
pub fn bost_experiment(samples: usize, seed: u64, budget: &Budget) -> Result<LawReport> {
    let mut report = LawReport::new("lattice", "bost-experiment", samples, seed);
    let cat = LatticeCategory;
    let mut certified = 0;
    for i in 0..samples {
        let mut rng = trial_rng(seed, i as u64);
        let a = reduced_semistable_form(&mut rng)?;
        let b = reduced_semistable_form(&mut rng)?;
        let t = tensor_lattice(&a, &b);
        let d = crate::category::universal_destabilizer(&cat, &t, budget)?;
        report.tick("tensor_semistable");
        if d.sub.rank() < t.rank() {
            report.fail(
                i,
                "tensor_semistable",
                format!("rank-{} sublattice of slope {} destabilizes", d.sub.rank(), key_str(&d.slope)),
            );
        } else if d.certificate.is_complete() {
            certified += 1;
        } else {
            report.skipped += 1;
        }
    }
    report
        .notes
        .push(format!("{certified} of {samples} products certified semistable; evidence only"));
    Ok(report)
}

/// A reduced binary form `[[a, b], [b, c]]` with `|2b| ≤ a ≤ c`, which is
/// semistable iff `a² ≥ ac − b²`.
fn reduced_semistable_form(rng: &mut ChaCha8Rng) -> Result<EuclideanLattice> {
    loop {
        let a: i64 = rng.gen_range(1..=5);
        let b: i64 = rng.gen_range(-a..=a) / 2;
        let c: i64 = rng.gen_range(a..=a + 4);
        if a * a >= a * c - b * b {
            let g = |x: i64| Q::from_integer(x.into());
            return EuclideanLattice::new(vec![vec![g(a), g(b)], vec![g(b), g(c)]]);
        }
    }
}
