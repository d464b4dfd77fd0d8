use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn slopes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slopes"))
        .args(args)
        .env_remove("SLOPES_SEED")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn hn_of_standard_lattice() {
    let out = slopes(&["hn", "--backend", "lattice", "--in", &data("z2.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let segs = v["result"]["polygon"]["segments"].as_array().unwrap();
    assert_eq!(segs.len(), 1);
    assert_eq!(segs[0]["mult"], 2);
    // log-type degree with d = 1 is degree zero
    assert_eq!(v["result"]["polygon"]["endpoints"][1][1]["neg_half_log"], "1");
    assert_eq!(v["complete"], true);
}

#[test]
fn factor_reports_product_hash() {
    let out = slopes(&["factor", "--in", &data("p.json"), "--prec", "40"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &json_of(&out)["result"];
    assert_eq!(r["slopes"], serde_json::json!(["0", "1"]));
    assert_eq!(r["product_agrees"], true);
    assert_eq!(r["slopes_match_polygon"], true);
    assert_eq!(r["product_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn dominance_check_on_filtered_spaces() {
    let out = slopes(&["check", "--law", "dominance", "--backend", "filtered", "--samples", "50", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["result"]["violations"], serde_json::json!([]));
}

#[test]
fn seed_comes_from_environment_unless_flagged() {
    let run = |env: &str, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_slopes"));
        cmd.args(["check", "--law", "axioms", "--samples", "3"]).env("SLOPES_SEED", env);
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        json_of(&cmd.output().unwrap())["seed"].clone()
    };
    assert_eq!(run("11", None), 11);
    assert_eq!(run("11", Some("5")), 5);
}

#[test]
fn schema_errors_exit_two() {
    let out = slopes(&["hn", "--backend", "filtered", "--in", &data("bad_chain.json")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("filtrations[0]"), "{err}");
    assert_eq!(slopes(&["hn", "--backend", "lattice", "--in", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(slopes(&["factor", "--in", &data("p.json"), "--prec", "0"]).status.code(), Some(2));
    assert_eq!(slopes(&["hn", "--backend", "phi", "--in", &data("p.json")]).status.code(), Some(2));
    assert_eq!(slopes(&["check", "--law", "nonsense"]).status.code(), Some(2));
}

#[test]
fn heuristic_results_exit_three_only_when_required() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("four.json");
    // three lines and a plane in general position in dimension four
    let space = serde_json::json!({
        "dim": 4,
        "filtrations": [
            {"steps": [{"jump": "1", "basis": [["1", "0", "0", "0"]]}]},
            {"steps": [{"jump": "1", "basis": [["0", "1", "0", "0"]]}]},
            {"steps": [{"jump": "1", "basis": [["0", "0", "1", "0"], ["0", "0", "0", "1"]]}]}
        ]
    });
    std::fs::write(&path, space.to_string()).unwrap();
    let p = path.to_string_lossy();
    let relaxed = slopes(&["hn", "--backend", "filtered", "--in", &p]);
    assert_eq!(relaxed.status.code(), Some(0));
    assert_eq!(json_of(&relaxed)["complete"], false);
    let strict = slopes(&["hn", "--backend", "filtered", "--in", &p, "--require-complete"]);
    assert_eq!(strict.status.code(), Some(3));
    // the result is still written
    assert_eq!(json_of(&strict)["command"], "hn");
}

#[test]
fn svg_and_sidecar_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let svg: PathBuf = dir.path().join("np.svg");
    let out = slopes(&[
        "np",
        "--backend",
        "diff",
        "--in",
        &data("operator.json"),
        "--svg",
        &svg.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let drawing = std::fs::read_to_string(&svg).unwrap();
    assert!(drawing.starts_with("<svg"));
    // slope 3/2 over 2: vertex (2, 3), scale 1
    assert!(drawing.contains(r#"points="0,0 2,-3""#), "{drawing}");
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("np.svg.json")).unwrap()).unwrap();
    assert_eq!(sidecar["scale"], "1");
    assert_eq!(sidecar["polygons"][0]["vertices"][1], serde_json::json!([2, "3"]));
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.json");
    let args = ["swan", "--in", "fixture:ramification"];
    let stdout = slopes(&args).stdout;
    let mut with_out = args.to_vec();
    let f = file.to_string_lossy().into_owned();
    with_out.extend(["--out", &f]);
    assert!(slopes(&with_out).stdout.is_empty());
    assert_eq!(std::fs::read(&file).unwrap(), stdout);
}

#[test]
fn combine_and_swan() {
    let out = slopes(&["combine", "--mode", "dual", "--in", &data("polygons.json")]);
    let r = &json_of(&out)["result"];
    assert_eq!(r["highest_break"], "0");
    assert_eq!(r["polygon"]["endpoints"][1], serde_json::json!([2, "-1"]));

    let out = slopes(&["swan", "--in", "fixture:ramification"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["result"]["hasse_arf"], "holds");
    let synthetic = v["result"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["curated"] == false)
        .unwrap();
    assert!(synthetic["reps"].as_array().unwrap().iter().any(|r| r["integral"] == false));
}

#[test]
fn table_hn_for_one_object() {
    let out = slopes(&["hn", "--backend", "table", "--in", "fixture:euler_sequence", "--object", "O2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let segs = &v["result"]["objects"]["O2"]["polygon"]["segments"];
    assert_eq!(segs, &serde_json::json!([{"slope": "0", "mult": 2}]));
    assert_eq!(slopes(&["hn", "--backend", "table", "--in", "fixture:euler_sequence", "--object", "nope"]).status.code(), Some(2));
}
