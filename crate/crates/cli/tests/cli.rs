use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn esparsify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esparsify")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn last_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().expect("output")).expect("json line")
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.el"), dir.path().join("b.el"));
    for f in [&a, &b] {
        let out = esparsify(&["gen", "--n", "64", "--m", "512", "--seed", "7", "--output", p(f)]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let out = esparsify(&["gen", "--n", "64", "--m", "512", "--seed", "7", "--output", p(&a)]);
    let manifest = last_json(&out);
    assert_eq!(manifest["schema"], "eulerian-sparsify/manifest/v1");
    assert_eq!(manifest["command"], "gen");
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn verify_identity_passes() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.el");
    esparsify(&["gen", "--n", "20", "--m", "80", "--output", p(&g)]);
    let rep = dir.path().join("r.json");
    let out = esparsify(&["verify", "--ref", p(&g), "--test", p(&g), "--report", p(&rep)]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(doc["report"]["opnorm_error"], 0.0);
    assert_eq!(doc["report"]["pass"], true);
    assert_eq!(doc["report"]["schema"], "eulerian-sparsify/verification/v1");
}

#[test]
fn sparsify_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.el");
    let h = dir.path().join("h.el");
    let rep = dir.path().join("r.json");
    esparsify(&["gen", "--n", "32", "--m", "128", "--seed", "3", "--output", p(&g)]);
    let out = esparsify(&[
        "sparsify", "--input", p(&g), "--output", p(&h), "--eps", "0.25", "--seed", "7", "--report", p(&rep),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(doc["report"]["verification"]["pass"], true);
    let out = esparsify(&["verify", "--ref", p(&g), "--test", p(&h)]);
    assert!(out.status.success());
    let first: Value = serde_json::from_str(String::from_utf8_lossy(&out.stdout).lines().next().unwrap()).unwrap();
    assert_eq!(first["pass"], true);

    // Same inputs and seed give the same output digest.
    let again = esparsify(&["sparsify", "--input", p(&g), "--output", p(&h), "--eps", "0.25", "--seed", "7"]);
    assert_eq!(last_json(&again)["output_digest"], doc["manifest"]["output_digest"]);
}

#[test]
fn not_eulerian_exits_2_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.el");
    std::fs::write(&g, "3 3\n0 1 1\n1 2 1\n2 0 2\n").unwrap();
    let out = esparsify(&["sparsify", "--input", p(&g)]);
    assert_eq!(out.status.code(), Some(2));
    let err = last_json(&out);
    assert_eq!(err["schema"], "eulerian-sparsify/error/v1");
    assert_eq!(err["error"], "NotEulerian");
}

#[test]
fn parse_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.el");
    std::fs::write(&g, "3 2\n0 1 x\n").unwrap();
    let out = esparsify(&["sparsify", "--input", p(&g)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(last_json(&out)["error"], "ParseError");
    let missing = esparsify(&["sparsify", "--input", p(&dir.path().join("nope.el"))]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(last_json(&missing)["error"], "IoError");
}

#[test]
fn solve_and_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.el");
    std::fs::write(&g, "3 3\n0 1 1\n1 2 1\n2 0 1\n").unwrap();
    let b = dir.path().join("b.txt");
    std::fs::write(&b, "1\n-1\n0\n").unwrap();
    let x = dir.path().join("x.txt");
    let rep = dir.path().join("r.json");
    let out = esparsify(&[
        "solve", "--input", p(&g), "--rhs", p(&b), "--eps", "1e-6", "--output", p(&x), "--report", p(&rep),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert!(doc["report"]["achieved_error"].as_f64().unwrap() <= 1e-6);
    assert_eq!(std::fs::read_to_string(&x).unwrap().lines().count(), 3);

    let chain = dir.path().join("p.el");
    std::fs::write(&chain, "2 2\n0 1 0.3\n1 0 0.1\n").unwrap();
    let pi = dir.path().join("pi.txt");
    let out = esparsify(&["stationary", "--chain", p(&chain), "--eps", "1e-10", "--output", p(&pi)]);
    assert!(out.status.success());
    let v: Vec<f64> = std::fs::read_to_string(&pi).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert!((v[0] - 0.25).abs() < 1e-9 && (v[1] - 0.75).abs() < 1e-9);
}

#[test]
fn reducible_chain_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("p.el");
    std::fs::write(&chain, "3 2\n0 1 1\n1 2 1\n").unwrap();
    let out = esparsify(&["stationary", "--chain", p(&chain)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(last_json(&out)["error"], "NotIrreducible");
}

#[test]
fn decompose_and_sketch_reports() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.el");
    esparsify(&["gen", "--n", "24", "--m", "120", "--seed", "1", "--output", p(&g)]);
    let d = dir.path().join("d.json");
    let rep = dir.path().join("r.json");
    let out = esparsify(&["decompose", "--input", p(&g), "--output", p(&d), "--report", p(&rep)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(doc["report"]["verification"]["pass"], true);
    let decomp: Value = serde_json::from_str(&std::fs::read_to_string(&d).unwrap()).unwrap();
    assert_eq!(decomp["kind"], "er");

    let h = dir.path().join("h.el");
    let out = esparsify(&[
        "sketch", "--input", p(&g), "--eps", "0.5", "--vectors", "50", "--output", p(&h), "--report", p(&rep),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert!(doc["report"]["pairs_within_eps"].as_f64().unwrap() >= 0.9);

    let out = esparsify(&["sketch", "--input", p(&g), "--mode", "undirected", "--eps", "0.5", "--vectors", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let out = esparsify(&["--threads", "2", "bench", "--lo", "6", "--hi", "7", "--output", p(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,m,seconds,nnz_out"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.el");
    esparsify(&["gen", "--n", "16", "--m", "64", "--output", p(&g)]);
    let before = std::fs::read(&g).unwrap();
    esparsify(&["sparsify", "--input", p(&g)]);
    esparsify(&["decompose", "--input", p(&g)]);
    assert_eq!(before, std::fs::read(&g).unwrap());
}
