use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn splr(args: &[&str], stdin: Option<&[u8]>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_splr"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn splr");
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(bytes) = stdin {
            pipe.write_all(bytes).unwrap();
        }
    }
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], stdin: Option<&[u8]>) -> Vec<u8> {
    let out = splr(args, stdin);
    assert!(out.status.success(), "splr {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("json output")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn piped_simex_pipeline_recovers_rank_two() {
    let problem = ok(&["gen", "simex", "-n", "20", "--seed", "7"], None);
    let ext = ok(&["convert"], Some(&problem));
    let sol = ok(&["solve"], Some(&ext));
    let rec = json(&ok(&["recover"], Some(&sol)));
    assert_eq!(rec["schema_version"], 1);
    assert!(rec["rank"].as_u64().unwrap() <= 2);
    assert_eq!(rec["within_bound"], true);
    assert!(rec["max_violation"].as_f64().unwrap() < 1e-6);
    assert_eq!(rec["solution"]["factor"].as_array().unwrap().len(), 20);
}

#[test]
fn file_pipeline_writes_report_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.json");
    let e = dir.path().join("e.json");
    let r = dir.path().join("r.json");
    let s = dir.path().join("s.json");
    let st = dir.path().join("stats.json");
    let out = dir.path().join("rec.json");
    ok(&["gen", "minbisect", "-n", "10", "--out", path_str(&p)], None);
    ok(&["convert", "--in", path_str(&p), "--out", path_str(&e), "--report", path_str(&r)], None);
    let report = read_json(&r);
    for key in ["n", "n_hat", "ell", "k", "width_before", "width_after", "bound_3l", "bound_2l"] {
        assert!(report[key].as_f64().is_some_and(f64::is_finite), "{key}");
    }
    assert!(report["width_after"].as_u64() <= report["bound_3l"].as_u64());
    ok(&["solve", "--in", path_str(&e), "--out", path_str(&s), "--stats", path_str(&st), "--max-iter", "20000"], None);
    assert_eq!(read_json(&st)["converged"], true);
    ok(&["recover", "--extended-solution", path_str(&s), "--problem", path_str(&e), "--out", path_str(&out), "--mode", "path"], None);
    let rec = read_json(&out);
    assert_eq!(rec["mode"], "path");
    assert!(rec["rank"].as_u64() <= rec["bound"].as_u64());
}

#[test]
fn verify_reports_small_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.json");
    let e = dir.path().join("e.json");
    ok(&["gen", "lb-tree", "--ell", "1", "--out", path_str(&p)], None);
    ok(&["convert", "--in", path_str(&p), "--out", path_str(&e)], None);
    let v = json(&ok(&["verify", "--problem", path_str(&p), "--extension", path_str(&e), "--samples", "100"], None));
    assert_eq!(v["passed"], true);
    assert!(v["max_null_residual"].as_f64().unwrap() <= 1e-9);
    assert!(v["max_value_mismatch"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn sparse_only_problem_converts_to_itself() {
    let problem = br#"{"n": 3, "m": 1, "pattern_edges": [[1, 2]],
        "objective": {"sparse_entries": [[1, 2, 1.0]], "core": []},
        "constraints": [{"sparse_entries": [[1, 1, 1.0], [2, 2, 1.0]], "core": [], "lower": 1.0, "upper": 1.0}],
        "factor": [[], [], []]}"#;
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("r.json");
    ok(&["convert", "--report", path_str(&r)], Some(problem));
    let report = read_json(&r);
    assert_eq!(report["ell"], 0);
    assert_eq!(report["n_hat"], 3);
    assert_eq!(report["width_after"], report["width_before"]);
}

#[test]
fn reports_are_deterministic() {
    let problem = ok(&["gen", "bqp", "-n", "4", "--seed", "3"], None);
    let a = ok(&["report", "--max-iter", "20000"], Some(&problem));
    let b = ok(&["report", "--max-iter", "20000"], Some(&problem));
    assert_eq!(a, b);
    let r = json(&a);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["solve"]["converged"], true);
}

#[test]
fn sdpa_export_imports_back() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    std::fs::write(&g, "6 5\n1 2\n2 3\n3 4\n4 5\n5 6\n").unwrap();
    let problem = ok(&["gen", "minbisect", "--graph", path_str(&g)], None);
    let sdpa = ok(&["export"], Some(&problem));
    let text = String::from_utf8(sdpa.clone()).unwrap();
    assert!(text.lines().nth(1).unwrap().trim() == "7");
    let f = dir.path().join("p.dat-s");
    std::fs::write(&f, &sdpa).unwrap();
    let r = dir.path().join("r.json");
    ok(&["convert", "--in", path_str(&f), "--pattern", path_str(&g), "--report", path_str(&r)], None);
    let report = read_json(&r);
    assert_eq!(report["ell"], 1);
    assert_eq!(report["n"], 6);
}

#[test]
fn witness_slice_lists_its_constraints() {
    let doc = json(&ok(&["gen", "phi", "--ell", "2"], None));
    assert_eq!(doc["dim"], 4);
    assert_eq!(doc["constraints"].as_array().unwrap().len(), 9);
    assert_eq!(doc["phi_upper"], 3);
}

#[test]
fn exit_codes_separate_input_and_numerical_failures() {
    assert_eq!(splr(&["--bogus"], None).status.code(), Some(1));
    assert_eq!(splr(&["convert"], Some(b"{not json")).status.code(), Some(1));
    assert_eq!(splr(&["convert", "--in", "/nonexistent/p.json"], None).status.code(), Some(1));
    let problem = ok(&["gen", "simex", "-n", "6"], None);
    let ext = ok(&["convert"], Some(&problem));
    let out = splr(&["solve", "--max-iter", "3"], Some(&ext));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
    assert_eq!(splr(&["--help"], None).status.code(), Some(0));
}
