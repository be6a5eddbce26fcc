use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use ecf_toolkit::ecf::{ecf_from_spectral_measure, random_spectral_measure, random_valid_ecf};
use ecf_toolkit::io;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_ecf-toolkit");

fn run(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .env_remove("ECF_TOOLKIT_THREADS")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    {
        let mut pipe = child.stdin.take().expect("stdin is piped");
        if let Some(s) = stdin {
            pipe.write_all(s.as_bytes()).expect("write stdin");
        }
    }
    child.wait_with_output().expect("binary exits")
}

fn ok(args: &[&str], stdin: Option<&str>) -> String {
    let out = run(args, stdin);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("UTF-8 output")
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).expect("valid JSON")
}

fn table(text: &str) -> ecf_toolkit::EcfTable {
    io::ecf_from_json(&json(text)).expect("ECF table")
}

fn get(v: &Value, table: &str, key: &str) -> f64 {
    v[table][key].as_f64().unwrap_or_else(|| panic!("missing {table}.{key}"))
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("UTF-8 path")
}

#[test]
fn sqrt_pipeline_gives_three_tau_levels() {
    let table = ok(&["ecf", "--model", "sqrt", "--m", "3"], None);
    let tau = json(&ok(&["tau"], Some(&table)));
    let (r2, r3) = (2f64.sqrt(), 3f64.sqrt());
    for (key, want) in [
        ("[0]", r3 - r2),
        ("[1,2]", 2.0 * r2 - 1.0 - r3),
        ("[0,1,2]", 3.0 - 3.0 * r2 + r3),
    ] {
        assert!((get(&tau, "tau", key) - want).abs() <= 1e-12, "{key}");
    }
    // A tau table is accepted wherever an ECF is.
    let back = json(&ok(&["ecf"], Some(&ok(&["tau"], Some(&table)))));
    assert!((get(&back, "theta", "[0,1,2]") - r3).abs() <= 1e-12);
    let marg = json(&ok(&["tau", "--marginal", "0,2"], Some(&table)));
    let direct = json(&ok(&["tau"], Some(&ok(&["ecf", "--model", "sqrt", "--m", "2"], None))));
    assert!((get(&marg, "tau", "[0,2]") - get(&direct, "tau", "[0,1]")).abs() <= 1e-12);
}

#[test]
fn validate_reports_cardinality_violation() {
    let table = r#"{"labels": ["0", "1"], "theta": {"[0]": 1, "[1]": 1, "[0,1]": 2.5}}"#;
    let out = run(&["validate"], Some(table));
    assert_eq!(out.status.code(), Some(1));
    let report = json(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(report["passed"], Value::Bool(false));
    let messages: Vec<&str> = report["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["message"].as_str().unwrap())
        .collect();
    assert!(messages.iter().any(|m| m.contains("exceeds |A|")), "{messages:?}");
    // Commands that need a valid table fail the same way.
    for cmd in ["tau", "simulate", "depset", "check"] {
        let out = run(&[cmd], Some(table));
        assert_eq!(out.status.code(), Some(1), "{cmd}");
        assert!(json(&String::from_utf8(out.stdout).unwrap())["passed"] == Value::Bool(false));
    }
}

#[test]
fn sqrt_depset_has_five_vertices() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("v.csv");
    let poly = json(&ok(
        &["depset", "--model", "sqrt", "--m", "2", "--vertices-csv", path_str(&csv)],
        None,
    ));
    let vertices: Vec<Vec<f64>> = serde_json::from_value(poly["vertices"].clone()).unwrap();
    assert_eq!(vertices.len(), 5);
    let c = 2f64.sqrt() - 1.0;
    for want in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, c], [c, 1.0]] {
        assert!(
            vertices.iter().any(|v| (v[0] - want[0]).abs() < 1e-9 && (v[1] - want[1]).abs() < 1e-9),
            "{want:?}"
        );
    }
    assert_eq!(poly["halfspaces"].as_array().unwrap().len(), 3);
    let support = poly["support"].as_array().unwrap();
    assert_eq!(support.len(), 9);
    for s in support {
        let x: Vec<f64> = serde_json::from_value(s["x"].clone()).unwrap();
        // Stable tail dependence of the two-site table.
        let ell = x[0] + x[1] - (2.0 - 2f64.sqrt()) * x[0].min(x[1]);
        assert!((s["value"].as_f64().unwrap() - ell).abs() < 1e-12);
    }
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 6);
}

#[test]
fn input_errors_exit_with_two() {
    for (args, stdin) in [
        (vec!["validate", "--input", "/nonexistent/table.json"], None),
        (vec!["validate"], Some("{not json")),
        (vec!["validate"], Some(r#"{"labels": ["a"], "theta": {}}"#)),
        (vec!["ecf", "--model", "nope", "--m", "2"], None),
        (vec!["ecf", "--model", "sqrt"], None),
        (vec!["transform", "--bernstein", "pow:2"], Some(r#"{"labels": ["a"], "theta": {"[a]": 1}}"#)),
        (vec!["bound", "--eta", "0.5,0.5", "--x", "1,1,1"], None),
        (vec!["tau", "--frobnicate"], None),
        (vec!["simulate", "--threads", "0", "--model", "sqrt", "--m", "2"], None),
    ] {
        let out = run(&args, stdin);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
    let out = Command::new(BIN)
        .args(["ecf", "--model", "sqrt", "--m", "2"])
        .env("ECF_TOOLKIT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"model": "random", "m": 3, "q": 4, "seed": 5}"#).unwrap();
    let from_file = ok(&["ecf", "--config", path_str(&cfg)], None);
    assert_eq!(table(&from_file), random_valid_ecf(3, 4, 5).unwrap());
    let overridden = ok(&["ecf", "--config", path_str(&cfg), "--seed", "6", "--m", "4"], None);
    assert_eq!(table(&overridden), random_valid_ecf(4, 4, 6).unwrap());
    fs::write(&cfg, r#"{"sede": 1}"#).unwrap();
    assert_eq!(run(&["ecf", "--config", path_str(&cfg)], None).status.code(), Some(2));
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.json");
    let samples = dir.path().join("s.csv");
    let ecf = random_valid_ecf(3, 5, 11).unwrap();
    fs::write(&table, io::to_json_string(&io::ecf_to_json(&ecf))).unwrap();
    ok(
        &["simulate", "-i", path_str(&table), "--n", "40000", "--seed", "3", "-o", path_str(&samples)],
        None,
    );
    let meta = json(&fs::read_to_string(dir.path().join("s.csv.meta.json")).unwrap());
    assert_eq!(meta, serde_json::json!({"n": 40000, "seed": 3, "generator": "counter-v1"}));
    let est = json(&ok(&["estimate", "-i", path_str(&samples)], None));
    assert_eq!(est["n"], 40000);
    let g = ecf.ground();
    for a in ecf_toolkit::subset::masks(3, true) {
        let key = g.format_subset(a);
        let (v, se) = (get(&est, "theta", &key), get(&est, "se", &key));
        assert!((v - ecf.get(a)).abs() <= 4.5 * se, "{key}: {v} vs {}", ecf.get(a));
    }
    // A full estimate is itself a table.
    ok(&["validate", "--tol", "0.1"], Some(&serde_json::to_string(&est).unwrap()));
    let capped = json(&ok(&["estimate", "-i", path_str(&samples), "--max-subset-size", "1"], None));
    assert_eq!(capped["theta"].as_object().unwrap().len(), 3);
}

#[test]
fn spectral_csv_inputs() {
    let sm = random_spectral_measure(3, 4, 2).unwrap();
    let mut buf = Vec::new();
    io::write_spectral_csv(&mut buf, &sm).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let got = json(&ok(&["ecf"], Some(&text)));
    let want = ecf_from_spectral_measure(&sm);
    for a in ecf_toolkit::subset::masks(3, true) {
        let key = want.ground().format_subset(a);
        assert!((get(&got, "theta", &key) - want.get(a)).abs() <= 1e-15);
    }
    let samples = ok(&["simulate", "--n", "5"], Some(&text));
    assert_eq!(samples.lines().count(), 6);
}

#[test]
fn transform_and_combine() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
    fs::write(&p1, ok(&["ecf", "--model", "sqrt", "--m", "3"], None)).unwrap();
    fs::write(&p2, ok(&["ecf", "--model", "independent", "--m", "3"], None)).unwrap();
    let mix = json(&ok(
        &["transform", "-i", path_str(&p1), "--input2", path_str(&p2), "--alpha-combine", "0.25"],
        None,
    ));
    assert!((get(&mix, "theta", "[0,1,2]") - (0.25 * 3f64.sqrt() + 0.75 * 3.0)).abs() <= 1e-15);
    let t = json(&ok(&["transform", "-i", path_str(&p1), "--bernstein", "log1p"], None));
    let want = 3f64.sqrt().ln_1p() / 1f64.ln_1p();
    assert!((get(&t, "theta", "[0,1,2]") - want).abs() <= 1e-15);
    assert_eq!(get(&t, "theta", "[1]"), 1.0);
    ok(&["check"], Some(&serde_json::to_string(&t).unwrap()));
    let out = run(&["transform", "-i", path_str(&p1), "--alpha-combine", "0.5"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bounds() {
    let v = json(&ok(&["bound", "--eta", "0.5,0.5,0.8", "--x", "1,1,1"], None));
    assert!((v["bound"].as_f64().unwrap() - v["log_bound"].as_f64().unwrap().exp()).abs() < 1e-15);
    let table = ok(&["ecf", "--model", "independent", "--m", "2"], None);
    let v = json(&ok(&["bound", "--x", "2,4"], Some(&table)));
    assert!((v["bound"].as_f64().unwrap() - (-0.75f64).exp()).abs() < 1e-15);
    let out = run(&["bound", "--x", "1"], Some(&table));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_summary() {
    let ecf = random_valid_ecf(4, 6, 1).unwrap();
    let text = io::to_json_string(&io::ecf_to_json(&ecf));
    let report = json(&ok(&["check"], Some(&text)));
    assert_eq!(report["passed"], Value::Bool(true));
    let names: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for want in ["validate", "complete_alternation", "tau_roundtrip", "triangle", "cooley", "polytope", "fdd_bound"] {
        assert!(names.contains(&want), "{want}");
    }
    let invalid = r#"{"labels": ["a", "b", "c"], "theta": {"[a]": 1, "[b]": 1, "[c]": 1, "[a,b]": 1.1, "[a,c]": 1.1, "[b,c]": 1.1, "[a,b,c]": 2.9}}"#;
    let out = run(&["check"], Some(invalid));
    assert_eq!(out.status.code(), Some(1));
    let report = json(&String::from_utf8(out.stdout).unwrap());
    let ca = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "complete_alternation").unwrap();
    assert_eq!(ca["passed"], Value::Bool(false));
    let agree = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "characterization_agrees").unwrap();
    assert_eq!(agree["passed"], Value::Bool(true));
}

#[test]
fn brown_resnick_models() {
    let v = json(&ok(&["ecf", "--model", "br", "--gamma", "8"], None));
    assert!((get(&v, "theta", "[0,1]") - (1.0 + ERF_ONE)).abs() < 1e-15);
    let dir = tempfile::tempdir().unwrap();
    let coords = dir.path().join("c.csv");
    fs::write(&coords, "label,x1\na,0\nb,1\nc,2.5\n").unwrap();
    let args = ["ecf", "--model", "br", "--lambda", "1", "--alpha", "1", "--coords", path_str(&coords), "--n", "20000"];
    let v = json(&ok(&args, None));
    assert_eq!(get(&v, "theta", "[a]"), 1.0);
    assert_eq!(v["mc"]["n"], 20000);
    assert!(v["mc"]["se"]["[a,b]"].as_f64().unwrap() > 0.0);
    ok(&["validate"], Some(&serde_json::to_string(&v).unwrap()));
    fs::write(&coords, "label,x1\na,0\nb,1\n").unwrap();
    ok(&["ecf", "--model", "m3box", "--coords", path_str(&coords)], None);
}

const ERF_ONE: f64 = 0.842_700_792_949_714_9;
