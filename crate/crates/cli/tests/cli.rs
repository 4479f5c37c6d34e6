use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_domeforge"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const SQUARE: &str = r#"{"points":[[0,0],[1,0],[0,1],"inf"]}"#;

#[test]
fn constants_table() {
    let v = json(&run(&["constants"], ""));
    for key in ["K", "K0", "Kprime", "K0prime", "k", "m", "Phi", "G_asinh1"] {
        assert!(v[key].is_f64(), "missing {key}");
    }
}

#[test]
fn hull_of_four_points() {
    let v = json(&run(&["hull"], SQUARE));
    assert_eq!(v["faces"].as_array().unwrap().len(), 4);
    let edges = v["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 6);
    let total: f64 = edges.iter().map(|e| e["theta"].as_f64().unwrap()).sum();
    assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    assert_eq!(v["diagnostics"]["euler_ok"], Value::Bool(true));
}

#[test]
fn metric_bounds_are_ordered() {
    let v = json(&run(&["metric"], r#"{"points":[[0,0],[1,0],[0,1],"inf"],"z":{"re":0.3,"im":0.3}}"#));
    let (q, tau) = (v["q"].as_f64().unwrap(), v["tau"].as_f64().unwrap());
    assert!(0.5 * tau <= q && q <= tau);
    let b = v["rho_bounds"].as_array().unwrap();
    assert!(b[0].as_f64().unwrap() <= b[1].as_f64().unwrap());
}

#[test]
fn metric_sweep_writes_csv() {
    let out = run(&["metric", "--sweep"], r#"{"points":[[0,0],[1,0],[0,1],"inf"],"zs":[[0.3,0.3],[2,2]]}"#);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("re,im,q,"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn tau_dist_brackets() {
    let v = json(&run(&["tau-dist"], r#"{"points":[[0,0],[1,0],[0,1],"inf"],"z":[0.3,0.3],"w":[-1,2]}"#));
    assert!(v["lower"].as_f64().unwrap() <= v["upper"].as_f64().unwrap());
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(run(&["hull"], r#"{"bogus":1}"#).status.code(), Some(2));
    assert_eq!(run(&["hull"], "not json").status.code(), Some(2));
    assert_eq!(run(&["metric"], r#"{"points":[[0,0],[1,0],[0,1],"inf"],"z":[0,0]}"#).status.code(), Some(2));
    assert_eq!(run(&["verify", "--suite", "nope"], "").status.code(), Some(2));
    assert_eq!(run(&["no-such-command"], "").status.code(), Some(2));
}

#[test]
fn verify_violation_exits_one() {
    let cfg = std::env::temp_dir().join("domeforge-cli-strict.json");
    std::fs::write(&cfg, r#"{"suite":"vertex-sums","configs":3,"tolerances":{"angle":0}}"#).unwrap();
    let out = run(&["verify", "--config", cfg.to_str().unwrap()], "");
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], Value::Bool(false));
}

#[test]
fn verify_is_deterministic() {
    let cfg = std::env::temp_dir().join("domeforge-cli-vs.json");
    std::fs::write(&cfg, r#"{"suite":"vertex-sums","configs":5}"#).unwrap();
    let path = cfg.to_str().unwrap();
    let a = run(&["verify", "--config", path, "--seed", "4"], "");
    let b = run(&["verify", "--config", path, "--seed", "4"], "");
    let c = run(&["verify", "--config", path, "--seed", "5"], "");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn generated_family_is_seeded() {
    let input = r#"{"family":{"family":"random-n","n":6}}"#;
    let a = json(&run(&["hull", "--seed", "2"], input));
    let b = json(&run(&["hull", "--seed", "2"], input));
    assert_eq!(a, b);
    assert_eq!(a["vertices"].as_array().unwrap().len(), 6);
}
