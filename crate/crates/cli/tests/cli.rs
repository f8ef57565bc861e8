//! End-to-end runs of the `qpcalc` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use qpcalc_core::endo::EndoJson;
use qpcalc_core::mutation::QPPairJson;
use qpcalc_core::quiver::QuiverJson;
use qpcalc_core::repmod::{FSeriesJson, ModuleJson};
use qpcalc_core::torus::TorusJson;
use qpcalc_core::{BigRational, Endomorphism, FSeries, MatrixRep, QPPair, Quiver, TorusElement};
use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn qpcalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpcalc"))
        .args(args)
        .env_remove("QPCALC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    let o = qpcalc(&full);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn mutation_of_the_three_cycle_is_acyclic() {
    let o = qpcalc(&["mutate", "--at", "2", "--trunc", "6", &data("abc.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("a*: 3 -> 2"), "{text}");
    assert!(text.contains("b*: 2 -> 1"), "{text}");
    assert!(text.contains("potential (trunc 6): 0"), "{text}");

    let v = json(&["mutate", "--at", "2", "--trunc", "6", &data("abc.json")]);
    let j: QPPairJson = serde_json::from_value(v["qp"].clone()).unwrap();
    let qp = QPPair::<BigRational>::from_json(&j).unwrap();
    assert_eq!(qp.quiver().arrow_count(), 2);
    assert!(qp.potential.is_zero());
    assert_eq!(qp.to_json(), j);
}

#[test]
fn mutation_of_the_squared_cycle_keeps_a_two_cycle() {
    let v = json(&["mutate", "--at", "2", &data("abc_squared.json")]);
    assert_eq!(v["two_cycles_remain"], Value::Bool(true));
    let qp = QPPair::<BigRational>::from_json(&serde_json::from_value(v["qp"].clone()).unwrap()).unwrap();
    assert_eq!(qp.quiver().arrow_count(), 4);
    assert_eq!(qp.potential.display(), "1·(a*·b*·[b|a]) + 1·(c·[b|a]·c·[b|a])");
}

#[test]
fn jacobi_table_of_the_cubic_loop() {
    let o = qpcalc(&["jacobi", "--trunc", "8", &data("t3.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("r = 2"), "{text}");
    assert!(text.contains("total quotient dimension: 2"), "{text}");

    let v = json(&["jacobi", "--trunc", "8", &data("t3.json")]);
    assert_eq!(v["certificate"]["r"], 2);
    let dims: Vec<u64> = v["degrees"].as_array().unwrap().iter().map(|r| r["quotient"].as_u64().unwrap()).collect();
    assert_eq!(dims, [1, 1, 0, 0, 0, 0, 0, 0, 0]);
    assert_eq!(v["quasi_homogeneous"]["holds"], true);
}

#[test]
fn malformed_json_is_an_input_error() {
    let o = qpcalc(&["mutate", "--at", "1", &data("truncated.json")]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("truncated.json"), "{err}");
    assert!(err.contains("line"), "{err}");

    let o = qpcalc(&["growth", &data("bad_type.json")]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("potential.trunc"), "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn usage_and_lookup_errors_exit_one() {
    assert_eq!(qpcalc(&["mutate", &data("abc.json")]).status.code(), Some(1));
    assert_eq!(qpcalc(&["mutate", "--at", "9", &data("abc.json")]).status.code(), Some(1));
    assert_eq!(qpcalc(&["jacobi", "--trunc", "0", &data("abc.json")]).status.code(), Some(1));
    assert_eq!(qpcalc(&["mutate", "--at", "1", &data("t3.json")]).status.code(), Some(1));
    assert_eq!(qpcalc(&["--help"]).status.code(), Some(0));
}

#[test]
fn infeasibility_exits_two() {
    let o = qpcalc(&["reduce", &data("loop_square.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("t·t"));
    let o = qpcalc(&["jacobi", "--module", "1", &data("free_loops.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("finiteness certificate"));
}

#[test]
fn thread_variable_is_validated_and_does_not_change_output() {
    let args = ["--format", "json", "torus", "exchange", "--quiver", &data("a2.json"), "--seq", "1,2,1"];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_qpcalc"))
            .args(args)
            .env("QPCALC_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    let four = run("4");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(run("zero").status.code(), Some(1));
}

#[test]
fn seeded_output_is_byte_identical() {
    let args = ["--seed", "7", "cs-check", "--dims", "2,1,2", &data("abc.json")];
    let a = qpcalc(&args);
    let b = qpcalc(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = qpcalc(&["--seed", "8", "cs-check", "--dims", "2,1,2", "--format", "json", &data("abc.json")]);
    let d = qpcalc(&["--seed", "7", "cs-check", "--dims", "2,1,2", "--format", "json", &data("abc.json")]);
    assert_ne!(c.stdout, d.stdout);
}

#[test]
fn cs_check_gradient_matches_and_module_round_trips() {
    let v = json(&["--seed", "3", "cs-check", "--dims", "3", &data("t3t4.json")]);
    assert_eq!(v["within_tolerance"], true);
    assert_eq!(v["report"]["nilpotent"], true);
    let m: ModuleJson = serde_json::from_value(v["module"].clone()).unwrap();
    let path = std::env::temp_dir().join(format!("qpcalc-cs-{}.json", std::process::id()));
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let again = json(&["cs-check", "--module", path.to_str().unwrap(), &data("t3t4.json")]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(again["value"], v["value"]);
    assert_eq!(again["report"]["max_discrepancy"], v["report"]["max_discrepancy"]);
}

#[test]
fn inverse_output_round_trips_and_inverts_back() {
    let v = json(&["invert", "--method", "both", &data("endo.json")]);
    let quiver: QuiverJson = serde_json::from_value(v["quiver"].clone()).unwrap();
    let endo: EndoJson = serde_json::from_value(v["endo"].clone()).unwrap();
    let q = std::sync::Arc::new(Quiver::from_json(&quiver).unwrap());
    let inv = Endomorphism::<BigRational>::from_json(q.clone(), &endo).unwrap();
    assert_eq!(inv.to_json(), endo);

    let path = std::env::temp_dir().join(format!("qpcalc-inv-{}.json", std::process::id()));
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let back = json(&["invert", "--method", "trees", path.to_str().unwrap()]);
    std::fs::remove_file(&path).unwrap();
    let original: Value = serde_json::from_str(&std::fs::read_to_string(data("endo.json")).unwrap()).unwrap();
    let a = Endomorphism::<BigRational>::from_json(q.clone(), &serde_json::from_value(back["endo"].clone()).unwrap()).unwrap();
    let b = Endomorphism::<BigRational>::from_json(q, &serde_json::from_value(original["endo"].clone()).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn hilbert_series_feeds_the_character() {
    let v = json(&["fseries", "--jacobi", &data("t3.json"), "--node", "1"]);
    let fj: FSeriesJson = serde_json::from_value(v.clone()).unwrap();
    let f = FSeries::from_json(&fj).unwrap();
    assert_eq!(f.to_json(), fj);

    let path = std::env::temp_dir().join(format!("qpcalc-f-{}.json", std::process::id()));
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let o = qpcalc(&["torus", "cc", "--quiver", &data("one_node.json"), "--g=0", "--fseries", path.to_str().unwrap()]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(stdout(&o), "1 + y1 + y1^2\n");
}

#[test]
fn module_file_counts_match_the_jacobi_route() {
    let module = json(&["jacobi", "--module", "1", &data("t3.json")]);
    let m: ModuleJson = serde_json::from_value(module.clone()).unwrap();
    let q = std::sync::Arc::new(Quiver::from_json(&serde_json::from_str(&std::fs::read_to_string(data("one_loop.json")).unwrap()).unwrap()).unwrap());
    assert_eq!(MatrixRep::<BigRational>::from_json(q, &m).unwrap().dims().0, [2]);

    let path = std::env::temp_dir().join(format!("qpcalc-m-{}.json", std::process::id()));
    std::fs::write(&path, serde_json::to_string(&module).unwrap()).unwrap();
    let direct = json(&["fseries", "--module", path.to_str().unwrap(), "--quiver", &data("one_loop.json")]);
    std::fs::remove_file(&path).unwrap();
    let via_jacobi = json(&["fseries", "--jacobi", &data("t3.json"), "--node", "1"]);
    assert_eq!(direct, via_jacobi);
}

#[test]
fn flop_weights_give_a_binomial_factor() {
    let v = json(&["torus", "cc", "--quiver", &data("one_node.json"), "--g=1", "--fseries", &data("flop_weights.json"), "--deg", "5"]);
    let e = TorusElement::from_json(&serde_json::from_value::<TorusJson>(v).unwrap()).unwrap();
    assert_eq!(e.display(), "x1 + 3*x1*y1 + 3*x1*y1^2 + x1*y1^3");
}

#[test]
fn a2_exchange_has_period_five() {
    let v = json(&["torus", "exchange", "--quiver", &data("a2.json"), "--seq", "1,2,1,2,1", "--deg", "6"]);
    let clusters = v["clusters"].as_array().unwrap();
    assert_eq!(clusters.len(), 6);
    assert_eq!(clusters[5][0], clusters[0][1]);
    assert_eq!(clusters[5][1], clusters[0][0]);
    let x1 = TorusElement::from_json(&serde_json::from_value::<TorusJson>(clusters[1][0].clone()).unwrap()).unwrap();
    assert_eq!(x1.display(), "x1^-1 + x1^-1*x2");
}

#[test]
fn linear_field_flows_to_e() {
    let v = json(&["flow", "--field", &data("linear_field.json"), "--quiver", &data("one_loop.json"), "--steps", "1000"]);
    let term = &v["endo"]["images"]["t"]["terms"][0];
    let re: f64 = term["re"].as_str().unwrap().parse().unwrap();
    assert!((re - std::f64::consts::E).abs() < 1e-8, "{re}");
}

#[test]
fn moser_flow_conserves_the_potential() {
    let v = json(&["flow", "--moser", &data("t3_trunc8.json"), &data("t3t4.json"), "--steps", "100"]);
    assert_eq!(v["within_tolerance"], true);
    assert!(v["deviation"].as_f64().unwrap() < 1e-6);
    let ratio = v["halving"]["ratio"].as_f64().unwrap();
    assert!((8.0..32.0).contains(&ratio), "{ratio}");
}

#[test]
fn reduce_growth_and_probe_reports() {
    let v = json(&["reduce", &data("loops.json")]);
    assert_eq!(v["pairs"], serde_json::json!([["y", "z"]]));
    let reduced = QPPair::<BigRational>::from_json(&serde_json::from_value(v["reduced"].clone()).unwrap()).unwrap();
    assert_eq!(reduced.quiver().arrow_count(), 0);

    let g = json(&["growth", &data("abc.json")]);
    assert_eq!(g["geometric"], true);

    let p = json(&["probe", "--depth", "2", &data("abc.json")]);
    assert_eq!(p["degenerate"], serde_json::json!([]));
    assert_eq!(p["zero_potential_seen"], true);
}
