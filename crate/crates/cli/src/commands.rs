//! One function per subcommand, each turning a [`RunConfig`] into an
//! [`Outcome`].

use serde_json::{json, Value};

use slopes_core::category::{hn_filtration, HnResult};
use slopes_core::diff::{
    gerard_levelt_irregularity, irregularity_cyclic, katz_rank_spectral, np_diff, DifferentialModule,
    DifferentialOperator, GL_N_MAX, KATZ_N_MAX,
};
use slopes_core::filtered::{FilteredCategory, FilteredSpace};
use slopes_core::harness::{
    bost_experiment, check_coprime_stable, check_degree_axioms, check_dominance, check_duality, check_exactness,
    check_tensor_bounded, check_tensor_mult, FilteredHarness, LatticeHarness, LawReport, Sampler, TableHarness,
};
use slopes_core::lattice::{EuclideanLattice, LatticeCategory};
use slopes_core::linalg::Subspace;
use slopes_core::phi::{dm_degree, np_twisted, slope_factor, valuations_from_json, PhiMatrix, TwistedPolynomial};
use slopes_core::polygon::{degree_to_json, polygon_combine, CombineMode};
use slopes_core::ramification::{galois_polygon, herbrand_breaks, swan, RamificationInput};
use slopes_core::rational::fmt_q;
use slopes_core::table::TableCategory;
use slopes_core::{NewtonPolygon, SlopeCategory, SlopeError};

use crate::{sha256_hex, Backend, CliError, CliResult, Command, Law, Outcome, RunConfig};

pub fn dispatch(config: &RunConfig) -> CliResult<(&'static str, Outcome)> {
    Ok(match &config.command {
        Command::Hn { object } => ("hn", hn(config, object.as_deref())?),
        Command::Np { object } => ("np", np(config, object.as_deref())?),
        Command::Factor => ("factor", factor(config)?),
        Command::Check { law } => ("check", check(config, *law)?),
        Command::Swan => ("swan", swan_cmd(config)?),
        Command::Combine { mode } => ("combine", combine(config, mode)?),
    })
}

fn resolve(config: &RunConfig, allowed: &[Backend], default: Option<Backend>) -> CliResult<Backend> {
    match config.backend.or(default) {
        Some(b) if allowed.contains(&b) => Ok(b),
        Some(b) => Err(CliError::Usage(format!(
            "backend {} is not available here (expected one of: {})",
            b.name(),
            allowed.iter().map(|b| b.name()).collect::<Vec<_>>().join(", ")
        ))),
        None => Err(CliError::Usage("this command needs --backend".into())),
    }
}

fn outcome(backend: Backend, result: Value, sha: Option<String>) -> Outcome {
    Outcome {
        backend: Some(backend.name()),
        result,
        polygons: Vec::new(),
        complete: true,
        passed: true,
        input_sha256: sha,
    }
}

fn subspace_json(s: &Subspace) -> Value {
    json!(s.basis().iter().map(|r| r.iter().map(fmt_q).collect::<Vec<_>>()).collect::<Vec<_>>())
}

/// HN flags of a lattice, a filtered space, or table objects.
fn hn_results(config: &RunConfig, backend: Backend, object: Option<&str>) -> CliResult<Outcome> {
    let (v, sha) = config.input_json()?;
    let budget = &config.budget;
    let mut out = outcome(backend, Value::Null, Some(sha));
    let mut record = |label: String, polygon: NewtonPolygon, complete: bool| {
        out.complete &= complete;
        out.polygons.push((label, polygon));
    };
    let result = match backend {
        Backend::Lattice => {
            let l = EuclideanLattice::from_json(&v)?;
            let hn: HnResult<_, _> = hn_filtration(&LatticeCategory, &l, budget)?;
            record("lattice".into(), hn.polygon.clone(), hn.is_complete());
            hn.to_json(|s| s.to_json())
        }
        Backend::Filtered => {
            let space = FilteredSpace::from_json(&v)?;
            let hn = hn_filtration(&FilteredCategory, &space, budget)?;
            record("filtered".into(), hn.polygon.clone(), hn.is_complete());
            hn.to_json(subspace_json)
        }
        Backend::Table => {
            let table = TableCategory::from_json(&v)?;
            let ids: Vec<String> = match object {
                Some(id) => {
                    table.lookup(id)?;
                    vec![id.to_string()]
                }
                None => table.object_ids().into_iter().filter(|id| table.rank(id) > 0).collect(),
            };
            let mut per = serde_json::Map::new();
            for id in ids {
                let hn = hn_filtration(&table, &id, budget)?;
                record(id.clone(), hn.polygon.clone(), hn.is_complete());
                per.insert(id, hn.to_json(|s| table.object_json(s).unwrap_or(Value::Null)));
            }
            json!({"label": table.label(), "objects": per})
        }
        _ => unreachable!("resolved to an engine backend"),
    };
    out.result = result;
    Ok(out)
}

fn hn(config: &RunConfig, object: Option<&str>) -> CliResult<Outcome> {
    let backend = resolve(config, &[Backend::Lattice, Backend::Filtered, Backend::Table], None)?;
    hn_results(config, backend, object)
}

fn polygon_result(polygon: &NewtonPolygon) -> Value {
    json!({
        "polygon": polygon.to_json(),
        "highest_break": polygon.highest_break().map(|k| slopes_core::category::slope_json(&k)),
    })
}

fn np(config: &RunConfig, object: Option<&str>) -> CliResult<Outcome> {
    let backend = resolve(
        config,
        &[
            Backend::Phi,
            Backend::Diff,
            Backend::Lattice,
            Backend::Filtered,
            Backend::Table,
            Backend::Ramification,
        ],
        None,
    )?;
    match backend {
        Backend::Phi => np_phi(config),
        Backend::Diff => np_diff_cmd(config),
        Backend::Ramification => swan_cmd(config),
        _ => {
            let mut out = hn_results(config, backend, object)?;
            out.result = json!(out
                .polygons
                .iter()
                .map(|(label, p)| json!({"label": label, "polygon": p.to_json()}))
                .collect::<Vec<_>>());
            Ok(out)
        }
    }
}

fn np_phi(config: &RunConfig) -> CliResult<Outcome> {
    let (v, sha) = config.input_json()?;
    let mut out = outcome(Backend::Phi, Value::Null, Some(sha));
    let (label, polygon, extra) = if v.get("matrix").is_some() {
        let m = PhiMatrix::from_json(&v)?;
        let p = m.newton_polygon(config.prec)?;
        let deg = dm_degree(&m)?;
        ("phi-module", p, json!({"dm_degree": degree_to_json(&deg), "precision": config.prec}))
    } else if let Some(vals) = v.get("valuations") {
        let p = np_twisted(&valuations_from_json(vals, "/valuations")?)?;
        ("valuations", p, json!({}))
    } else {
        let p = TwistedPolynomial::from_json(&v)?.newton_polygon()?;
        ("twisted-polynomial", p, json!({}))
    };
    let mut result = polygon_result(&polygon);
    if let (Some(r), Some(e)) = (result.as_object_mut(), extra.as_object()) {
        r.extend(e.clone());
    }
    out.result = result;
    out.polygons.push((label.into(), polygon));
    Ok(out)
}

fn np_diff_cmd(config: &RunConfig) -> CliResult<Outcome> {
    let (v, sha) = config.input_json()?;
    let mut out = outcome(Backend::Diff, Value::Null, Some(sha));
    if v.get("matrix").is_some() {
        let m = DifferentialModule::from_json(&v)?;
        let katz = katz_rank_spectral(&m, KATZ_N_MAX)?;
        let gl = gerard_levelt_irregularity(&m, GL_N_MAX)?;
        out.complete = gl.stabilized;
        out.result = json!({
            "katz_rank": katz.to_json(),
            "katz_n_max": KATZ_N_MAX,
            "gerard_levelt": gl.to_json(),
            "gerard_levelt_n_max": GL_N_MAX,
        });
        return Ok(out);
    }
    let op = DifferentialOperator::from_json(&v)?;
    let polygon = np_diff(&op)?;
    let mut result = polygon_result(&polygon);
    result["irregularity"] = json!(irregularity_cyclic(&op)?);
    out.result = result;
    out.polygons.push(("operator".into(), polygon));
    Ok(out)
}

fn factor(config: &RunConfig) -> CliResult<Outcome> {
    resolve(config, &[Backend::Phi], Some(Backend::Phi))?;
    let (v, sha) = config.input_json()?;
    let p = TwistedPolynomial::from_json(&v)?;
    let polygon = p.newton_polygon()?;
    let fz = slope_factor(&p, config.prec)?;
    let product = fz.product()?;
    let agrees = product.degree() == p.degree()
        && (0..=p.degree()).all(|i| product.coeff(i).agrees_mod(&p.coeff(i), config.prec));
    let mut from_factors: Vec<_> = fz
        .factors
        .iter()
        .zip(&fz.slopes)
        .flat_map(|(f, s)| std::iter::repeat_n(s.clone(), f.degree()))
        .collect();
    from_factors.sort();
    let mut expected = polygon.slope_multiset().unwrap_or_default();
    expected.sort();
    let product_text = serde_json::to_string(&product.to_json()).expect("JSON values serialize");
    let mut out = outcome(Backend::Phi, fz.to_json(), Some(sha));
    out.result["precision"] = json!(config.prec);
    out.result["product_sha256"] = json!(sha256_hex(product_text.as_bytes()));
    out.result["product_agrees"] = json!(agrees);
    out.result["slopes_match_polygon"] = json!(from_factors == expected);
    out.result["polygon"] = polygon.to_json();
    out.passed = agrees && from_factors == expected;
    out.polygons.push(("input".into(), polygon));
    Ok(out)
}

fn law_outcome(backend: Backend, report: &LawReport) -> Outcome {
    let mut out = outcome(backend, report.to_json(), None);
    out.passed = report.passed();
    out.complete = report.skipped == 0;
    out
}

fn sampler_law<S: Sampler>(s: &S, backend: Backend, law: Law, config: &RunConfig) -> CliResult<Outcome> {
    let (n, seed, budget) = (config.samples, config.seed, &config.budget);
    Ok(match law {
        Law::Axioms => law_outcome(backend, &check_degree_axioms(s, n, seed, budget)?),
        Law::Dominance => law_outcome(backend, &check_dominance(s, n, seed, budget)?),
        // a counterexample to exactness is the expected finding, not a failure
        Law::Exactness => outcome(backend, check_exactness(s, n, seed, budget)?.to_json(), None),
        _ => unreachable!("only sampler laws reach here"),
    })
}

fn check(config: &RunConfig, law: Law) -> CliResult<Outcome> {
    let (n, seed, budget) = (config.samples, config.seed, &config.budget);
    let engines = [Backend::Filtered, Backend::Lattice, Backend::Table];
    let mut out = match law {
        Law::Axioms | Law::Exactness | Law::Dominance => {
            let backend = resolve(config, &engines, Some(Backend::Filtered))?;
            match backend {
                Backend::Filtered => sampler_law(&FilteredHarness::default(), backend, law, config)?,
                Backend::Lattice => sampler_law(&LatticeHarness::default(), backend, law, config)?,
                _ => {
                    let (v, sha) = config.input_json()?;
                    let table = TableCategory::from_json(&v)?;
                    let mut o = sampler_law(&TableHarness { table }, backend, law, config)?;
                    o.input_sha256 = Some(sha);
                    o
                }
            }
        }
        Law::TensorMult => {
            let b = resolve(config, &[Backend::Filtered], Some(Backend::Filtered))?;
            law_outcome(b, &check_tensor_mult(&FilteredHarness::default(), n, seed, budget)?)
        }
        Law::Duality => {
            let b = resolve(config, &[Backend::Filtered], Some(Backend::Filtered))?;
            law_outcome(b, &check_duality(&FilteredHarness::default(), n, seed, budget)?)
        }
        Law::CoprimeStable => {
            let b = resolve(config, &[Backend::Filtered], Some(Backend::Filtered))?;
            law_outcome(b, &check_coprime_stable(n, seed, budget)?)
        }
        Law::TensorBounded => {
            let b = resolve(config, &[Backend::Diff], Some(Backend::Diff))?;
            law_outcome(b, &check_tensor_bounded(n, seed)?)
        }
        Law::BostExperiment => {
            let b = resolve(config, &[Backend::Lattice], Some(Backend::Lattice))?;
            let mut o = law_outcome(b, &bost_experiment(n, seed, budget)?);
            // evidence for an open problem, never a gate
            o.passed = true;
            o
        }
    };
    out.result["law"] = json!(law.name());
    Ok(out)
}

fn ramification_inputs(v: &Value) -> CliResult<Vec<RamificationInput>> {
    let items: Vec<&Value> = match v {
        Value::Array(items) => items.iter().collect(),
        Value::Object(o) => match o.get("fixtures") {
            Some(Value::Array(items)) => items.iter().collect(),
            Some(_) => return Err(SlopeError::schema("fixtures", "expected an array").into()),
            None => vec![v],
        },
        _ => return Err(SlopeError::schema("/", "expected an object or an array").into()),
    };
    items
        .into_iter()
        .map(|x| RamificationInput::from_json(x).map_err(CliError::from))
        .collect()
}

fn swan_cmd(config: &RunConfig) -> CliResult<Outcome> {
    resolve(config, &[Backend::Ramification], Some(Backend::Ramification))?;
    let (v, sha) = config.input_json()?;
    let mut out = outcome(Backend::Ramification, Value::Null, Some(sha));
    let mut entries = Vec::new();
    for input in ramification_inputs(&v)? {
        let data = &input.data;
        let mut reps = Vec::new();
        let mut highest = Vec::new();
        for rep in &input.reps {
            let polygon = galois_polygon(data, rep)?;
            let s = swan(data, rep)?;
            if input.curated && !s.integral {
                out.passed = false;
            }
            highest.push(polygon.highest_break());
            reps.push(json!({
                "name": rep.label,
                "polygon": polygon.to_json(),
                "swan": fmt_q(&s.value),
                "integral": s.integral,
            }));
            out.polygons.push((format!("{}/{}", data.label, rep.label), polygon));
        }
        let mut tensors = Vec::new();
        for t in &input.tensors {
            let polygon = galois_polygon(data, &t.product)?;
            let bound = match (&highest[t.left], &highest[t.right]) {
                (Some(a), Some(b)) => Some(if slopes_core::cmp_slope(a, b)?.is_ge() { a.clone() } else { b.clone() }),
                _ => None,
            };
            let bounded = match (polygon.highest_break(), bound) {
                (Some(h), Some(m)) => slopes_core::cmp_slope(&h, &m)?.is_le(),
                _ => true,
            };
            if input.curated && !bounded {
                out.passed = false;
            }
            tensors.push(json!({
                "of": [t.left, t.right],
                "polygon": polygon.to_json(),
                "bounded_by_max": bounded,
            }));
        }
        entries.push(json!({
            "name": data.label,
            "sizes": data.sizes(),
            "curated": input.curated,
            "herbrand_breaks": herbrand_breaks(data)
                .iter()
                .map(|(l, i)| json!({"lambda": fmt_q(l), "group": i}))
                .collect::<Vec<_>>(),
            "reps": reps,
            "tensors": tensors,
        }));
    }
    out.result = json!({ "entries": entries, "hasse_arf": if out.passed { "holds" } else { "violated" } });
    Ok(out)
}

fn combine(config: &RunConfig, mode: &str) -> CliResult<Outcome> {
    let mode: CombineMode = mode.parse()?;
    let (v, sha) = config.input_json()?;
    let p = NewtonPolygon::from_json(v.get("p").ok_or_else(|| SlopeError::schema("/p", "missing polygon p"))?)?;
    let q = match (v.get("q"), mode) {
        (Some(q), _) => NewtonPolygon::from_json(q)?,
        (None, CombineMode::Dual) => NewtonPolygon::empty(p.variant()),
        (None, _) => return Err(SlopeError::schema("/q", "missing polygon q").into()),
    };
    let r = polygon_combine(&p, &q, mode)?;
    Ok(Outcome {
        backend: None,
        result: polygon_result(&r),
        polygons: vec![("combined".into(), r)],
        complete: true,
        passed: true,
        input_sha256: Some(sha),
    })
}
