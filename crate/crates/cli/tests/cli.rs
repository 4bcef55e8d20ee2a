use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use tempfile::TempDir;

fn gml() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gml"));
    c.env_remove("GML_TOL_EXACT");
    c
}

fn run(args: &[&str]) -> (i32, Value) {
    run_cmd(gml().args(args))
}

fn run_cmd(cmd: &mut Command) -> (i32, Value) {
    let out = cmd.output().expect("binary runs");
    let code = out.status.code().expect("exit code");
    let text = String::from_utf8(out.stdout).unwrap();
    let v = serde_json::from_str(&text).unwrap_or(Value::Null);
    (code, v)
}

fn matrix(n: usize, re: &[f64]) -> Value {
    json!({"rows": n, "cols": n, "re": re, "im": vec![0.0; n * n]})
}

fn zeros(n: usize) -> Value {
    matrix(n, &vec![0.0; n * n])
}

fn write(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn counterexample_reports_mismatch() {
    let (code, v) = run(&["counterexample", "--kind", "tetrablock", "--alpha", "0.5", "--dim", "8"]);
    assert_eq!(code, 0);
    let m = v["reports"][0]["mismatch"].as_f64().unwrap();
    assert!((m - 0.375).abs() < 1e-12);
    assert_eq!(v["pass"], json!(true));
    assert_eq!(v["reports"][0]["hypothesis_violated"], json!(true));
}

#[test]
fn counterexample_bad_alpha() {
    let (code, v) = run(&["counterexample", "--kind", "g333", "--alpha", "0", "--dim", "8"]);
    assert_eq!(code, 3);
    assert!(v["error"].as_str().unwrap().contains("alpha"));
    let (code, _) = run(&["counterexample", "--kind", "g312", "--alpha", "1.2"]);
    assert_eq!(code, 3);
}

#[test]
fn verify_zero_tuple() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "z.json", &json!({"kind": "g333", "ops": vec![zeros(2); 7]}));
    let (code, v) = run(&["verify", s(&p)]);
    assert_eq!(code, 0);
    assert_eq!(v["reports"][0]["verdict"]["commuting"], json!(true));
}

#[test]
fn identities_on_non_commuting_tuple() {
    let dir = TempDir::new().unwrap();
    let a = matrix(2, &[0.0, 0.5, 0.0, 0.0]);
    let b = matrix(2, &[0.2, 0.0, 0.0, -0.1]);
    let p = write(&dir, "nc.json", &json!({"kind": "tetrablock", "ops": [a, b, zeros(2)]}));
    let (code, v) = run(&["identities", s(&p)]);
    assert_eq!(code, 3);
    assert_eq!(v["reports"][0]["verdict"]["commuting"], json!(false));
}

#[test]
fn identities_sorted_and_selectable() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "z.json", &json!({"kind": "g312", "ops": vec![zeros(2); 5]}));
    let (code, v) = run(&["identities", s(&p)]);
    assert_eq!(code, 0);
    let ids: Vec<String> =
        v["reports"].as_array().unwrap()[1..].iter().map(|r| r["id"].as_str().unwrap().to_string()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert_eq!(ids.len(), 16);
    let (code, v) = run(&["identities", s(&p), "--catalog", "P2.11-rep,T2.16-2"]);
    assert_eq!(code, 0);
    assert_eq!(v["reports"].as_array().unwrap().len(), 3);
    let (code, _) = run(&["identities", s(&p), "--catalog", "P2.2-rep"]);
    assert_eq!(code, 3);
}

#[test]
fn io_and_parse_errors() {
    let dir = TempDir::new().unwrap();
    let (code, v) = run(&["verify", "/nonexistent/tuple.json"]);
    assert_eq!(code, 4);
    assert_eq!(v["pass"], json!(false));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(run(&["verify", s(&bad)]).0, 4);
    assert_eq!(run(&["theta", s(&bad), "--z", "0,0"]).0, 4);
    // well-formed JSON with inconsistent content is a structural error
    let short = write(&dir, "short.json", &json!({"rows": 2, "cols": 2, "re": [1.0], "im": [0.0]}));
    assert_eq!(run(&["theta", s(&short), "--z", "0,0"]).0, 3);
    let wrong = write(&dir, "wrong.json", &json!({"kind": "tetrablock", "ops": [zeros(2), zeros(2)]}));
    assert_eq!(run(&["verify", s(&wrong)]).0, 3);
}

#[test]
fn theta_scalar() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "t.json", &matrix(1, &[0.6]));
    let (code, v) = run(&["theta", s(&p), "--z", "0.5,0"]);
    assert_eq!(code, 0);
    let re = v["reports"][0]["theta"]["re"][0].as_f64().unwrap();
    assert!((re - (0.5 - 0.6) / (1.0 - 0.3)).abs() < 1e-14);
    assert_eq!(run(&["theta", s(&p), "--z", "1.0,0"]).0, 3);
    assert_eq!(run(&["theta", s(&p), "--z", "abc"]).0, 3);
}

#[test]
fn coincide_exit_codes() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &matrix(1, &[0.5]));
    let b = write(&dir, "b.json", &matrix(1, &[0.7]));
    assert_eq!(run(&["coincide", s(&a), s(&a)]).0, 0);
    let (code, v) = run(&["coincide", s(&a), s(&b)]);
    assert_eq!(code, 2);
    assert_eq!(v["reports"][0]["found"], json!(false));
}

#[test]
fn mu_and_structure_parsing() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "d.json", &matrix(2, &[0.5, 0.0, 0.0, 0.25]));
    let (code, v) = run(&["mu", s(&p), "--structure", "2:2:1,1"]);
    assert_eq!(code, 0);
    assert!((v["reports"][0]["mu"].as_f64().unwrap() - 0.5).abs() < 1e-4);
    assert_eq!(v["config"]["command"]["structure"], json!("2:2:1,1"));
    let out = gml().args(["mu", s(&p), "--structure", "2:3:1"]).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn models() {
    let dir = TempDir::new().unwrap();
    // scalar tuple of diag(0.3, 0.4, 0.5): symmetric functions of the diagonal
    let (a, b, c) = (0.3, 0.4, 0.5);
    let coords = [a, b, c, a * b, a * c, b * c, a * b * c];
    let g333: Vec<Value> = coords.iter().map(|&x| matrix(1, &[x])).collect();
    let p = write(&dir, "g.json", &json!({"kind": "g333", "ops": g333}));
    let (code, v) = run(&["model-pure", s(&p), "--modes", "50"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(run(&["model-cnu", s(&p), "--modes", "20"]).0, 0);
    // modes below the minimum are rejected before running
    assert_eq!(run(&["model-pure", s(&p), "--modes", "4"]).0, 3);
    // the weighted-shift tuple violates the commutation hypothesis
    let n = 8;
    let mut t = vec![0.0; n * n];
    // column-major: entry (i, j) at j * n + i
    t[1] = 0.5;
    for k in 1..n - 1 {
        t[k * n + k + 1] = 1.0;
    }
    let tm = matrix(n, &t);
    let mut t2 = vec![0.0; n * n];
    t2[2] = 0.5;
    for k in 1..n - 2 {
        t2[k * n + k + 2] = 1.0;
    }
    let t2m = matrix(n, &t2);
    let p = write(&dir, "ce.json", &json!({"kind": "tetrablock", "ops": [tm.clone(), tm, t2m]}));
    let (code, v) = run(&["model-cnu", s(&p)]);
    assert_eq!(code, 2, "{v}");
    assert!(v["error"].as_str().unwrap().contains("hypothesis"));
}

#[test]
fn reports_are_deterministic() {
    let args = ["sample-domain", "--kind", "g312", "--count", "5", "--seed", "7"];
    let a = gml().args(args).output().unwrap().stdout;
    let b = gml().args(args).output().unwrap().stdout;
    assert_eq!(a, b);
    let c = gml().args(["sample-domain", "--kind", "g312", "--count", "5", "--seed", "8"]).output().unwrap().stdout;
    assert_ne!(a, c);
}

#[test]
fn output_file_and_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    let csv = dir.path().join("p.csv");
    let (code, _) = run(&["sample-domain", "--kind", "tetrablock", "--count", "3", "-o", s(&out), "--csv", s(&csv)]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["reports"][0]["points"].as_array().unwrap().len(), 3);
    let lines = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(lines.lines().count(), 4);
    assert!(lines.starts_with("x1_re,x1_im"));
    let (code, _) = run(&["sample-domain", "--kind", "tetrablock", "-o", "/nonexistent/dir/r.json"]);
    assert_eq!(code, 4);
}

#[test]
fn tolerance_from_environment() {
    let (code, v) =
        run_cmd(gml().env("GML_TOL_EXACT", "1e-9").args(["counterexample", "--kind", "g333", "--alpha", "0.3"]));
    assert_eq!(code, 0);
    assert_eq!(v["config"]["tol"]["tol_exact"], json!(1e-9));
    let (code, _) =
        run_cmd(gml().env("GML_TOL_EXACT", "abc").args(["counterexample", "--kind", "g333", "--alpha", "0.3"]));
    assert_eq!(code, 3);
    let (_, v) = run(&["counterexample", "--kind", "g333", "--alpha", "0.3", "--tol-exact", "1e-11"]);
    assert_eq!(v["config"]["tol"]["tol_exact"], json!(1e-11));
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "verify",
        "fundamental",
        "identities",
        "theta",
        "coincide",
        "model-pure",
        "model-cnu",
        "counterexample",
        "mu",
        "sample-domain",
    ] {
        let out = gml().args([sub, "--help"]).output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.lines().next().is_some_and(|l| !l.is_empty()), "{sub}");
    }
}

#[test]
fn fundamental_command() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "z.json", &json!({"kind": "tetrablock", "ops": vec![zeros(3); 3]}));
    let (code, v) = run(&["fundamental", s(&p)]);
    assert_eq!(code, 0);
    assert_eq!(v["reports"][1]["fundamental"]["defect_dim"], json!(3));
    assert_eq!(v["reports"][1]["fundamental"]["ops"].as_array().unwrap().len(), 2);
}
