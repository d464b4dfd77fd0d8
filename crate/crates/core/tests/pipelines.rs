//! Cross-module flows through the public API: JSON in, engine, polygon
//! calculus and JSON out.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use slopes_core::category::{hn_filtration, is_semistable};
use slopes_core::filtered::{dual_filtered, random_filtered, tensor_filtered, FilteredCategory, FilteredSampler, FilteredSpace};
use slopes_core::harness::{check_degree_axioms, FilteredHarness};
use slopes_core::lattice::{tensor_lattice, EuclideanLattice, LatticeCategory};
use slopes_core::phi::{random_single_slope, slope_factor, TwistSpec, TwistedPolynomial};
use slopes_core::polygon::polygon_combine;
use slopes_core::ramification::{fixture_ramification, galois_polygon, swan};
use slopes_core::table::{self, TableCategory};
use slopes_core::{Budget, CombineMode, DegreeValue, NewtonPolygon, SlopeCategory, Q};

fn q(n: i64) -> Q {
    Q::from_integer(n.into())
}

#[test]
fn filtered_json_to_polygon_and_back() {
    let v = FilteredSpace::from_json(&json!({
        "dim": 3,
        "filtrations": [
            {"steps": [{"jump": "2", "basis": [["1", "0", "0"]]}, {"jump": "3", "basis": [["1", "0", "0"]]}]},
            {"steps": [{"jump": "1", "basis": [["0", "1", "0"], ["0", "0", "1"]]}]}
        ]
    }))
    .unwrap_err();
    // a repeated subspace is not a strictly decreasing chain
    assert!(v.to_string().contains("filtrations[0]"), "{v}");

    let v = FilteredSpace::from_json(&json!({
        "dim": 3,
        "filtrations": [
            {"steps": [{"jump": "2", "basis": [["1", "0", "0"]]}]},
            {"steps": [{"jump": "1", "basis": [["0", "1", "0"], ["0", "0", "1"]]}]}
        ]
    }))
    .unwrap();
    let budget = Budget::default();
    let hn = hn_filtration(&FilteredCategory, &v, &budget).unwrap();
    assert!(hn.is_complete());
    let text = hn.polygon.to_json();
    assert_eq!(NewtonPolygon::from_json(&text).unwrap(), hn.polygon);
    assert_eq!(hn.polygon.rational_breaks().unwrap(), vec![(q(2), 1), (q(1), 2)]);

    let dual = hn_filtration(&FilteredCategory, &dual_filtered(&v), &budget).unwrap();
    assert_eq!(dual.polygon, polygon_combine(&hn.polygon, &hn.polygon, CombineMode::Dual).unwrap());
}

#[test]
fn lattice_tensor_of_standard_planes() {
    let z2 = EuclideanLattice::from_json(&json!({"gram": [["1", "0"], ["0", "1"]]})).unwrap();
    let t = tensor_lattice(&z2, &z2);
    assert_eq!(t.rank(), 4);
    let (ok, cert) = is_semistable(&LatticeCategory, &t, &Budget::default()).unwrap();
    assert!(ok && cert.is_complete());
    assert_eq!(LatticeCategory.degree(&t).unwrap(), DegreeValue::log_positive(q(1)).unwrap());
}

#[test]
fn every_table_fixture_has_consistent_polygons() {
    let budget = Budget::default();
    for name in ["euler_sequence", "lattice_diagonal", "projective_sum"] {
        let cat = TableCategory::from_json_str(table::fixture(name).unwrap()).unwrap();
        for id in cat.object_ids() {
            if cat.rank(&id) == 0 {
                continue;
            }
            let hn = hn_filtration(&cat, &id, &budget).unwrap();
            assert_eq!(
                hn.polygon.endpoint(),
                (cat.rank(&id) as u64, cat.degree(&id).unwrap()),
                "{name}/{id}"
            );
        }
    }
}

#[test]
fn factors_of_a_product_split_its_polygon() {
    let twist = TwistSpec::new(q(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let low = random_single_slope(&mut rng, 2, &q(0), &twist).unwrap();
    let high = random_single_slope(&mut rng, 1, &q(2), &twist).unwrap();
    let p: TwistedPolynomial = high.mul(&low).unwrap();
    let f = slope_factor(&p, 25).unwrap();
    assert_eq!(f.slopes, vec![q(0), q(2)]);
    let parts: Vec<NewtonPolygon> = f.factors.iter().map(|g| g.newton_polygon().unwrap()).collect();
    let sum = polygon_combine(&parts[0], &parts[1], CombineMode::DirectSum).unwrap();
    assert_eq!(sum, p.newton_polygon().unwrap());
}

#[test]
fn swan_is_additive_over_fixture_representations() {
    for input in fixture_ramification() {
        let reps = &input.reps;
        for a in reps {
            for b in reps {
                let sum = a.direct_sum(b).unwrap();
                let lhs = swan(&input.data, &sum).unwrap().value;
                let rhs = swan(&input.data, a).unwrap().value + swan(&input.data, b).unwrap().value;
                assert_eq!(lhs, rhs, "{}", input.data.label);
                let pa = galois_polygon(&input.data, a).unwrap();
                let pb = galois_polygon(&input.data, b).unwrap();
                assert_eq!(
                    galois_polygon(&input.data, &sum).unwrap(),
                    polygon_combine(&pa, &pb, CombineMode::DirectSum).unwrap()
                );
            }
        }
    }
}

#[test]
fn harness_reports_depend_on_the_seed_only() {
    let budget = Budget::default();
    let h = FilteredHarness::default();
    let a = check_degree_axioms(&h, 15, 21, &budget).unwrap().to_json();
    let b = check_degree_axioms(&h, 15, 21, &budget).unwrap().to_json();
    assert_eq!(a, b);
    assert_eq!(a["seed"], 21);
    assert_eq!(a["violations"], json!([]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn json_roundtrip_preserves_hn(seed in any::<u64>(), dim in 1usize..=3, count in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = FilteredSampler { dim, count, max_jump: 3, integer_jumps: false };
        let v = random_filtered(&mut rng, &cfg);
        let back = FilteredSpace::from_json(&v.to_json()).unwrap();
        let budget = Budget::default();
        prop_assert_eq!(
            hn_filtration(&FilteredCategory, &v, &budget).unwrap().polygon,
            hn_filtration(&FilteredCategory, &back, &budget).unwrap().polygon
        );
    }

    #[test]
    fn single_filtration_tensor_has_summed_breaks(seed in any::<u64>(), d1 in 1usize..=2, d2 in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = |dim| FilteredSampler { dim, count: 1, max_jump: 2, integer_jumps: false };
        let (v, w) = (random_filtered(&mut rng, &cfg(d1)), random_filtered(&mut rng, &cfg(d2)));
        let budget = Budget::default();
        let pv = hn_filtration(&FilteredCategory, &v, &budget).unwrap().polygon;
        let pw = hn_filtration(&FilteredCategory, &w, &budget).unwrap().polygon;
        let pt = hn_filtration(&FilteredCategory, &tensor_filtered(&v, &w).unwrap(), &budget).unwrap().polygon;
        prop_assert_eq!(pt, polygon_combine(&pv, &pw, CombineMode::TensorMult).unwrap());
    }
}
