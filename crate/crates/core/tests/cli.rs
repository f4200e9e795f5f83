use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deadline-mdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_bundled_and_missing() {
    let o = run(&["validate", "example1.json"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("3 nodes"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sha256="));
    assert_eq!(run(&["validate", "/nonexistent/spec.json"]).status.code(), Some(1));
}

#[test]
fn invalid_spec_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"nodes": 2, "links": [], "flows": []}"#).unwrap();
    let o = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(
        run(&["simulate", "example1.json", "--policy", "optimal", "--T", "10"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(
        run(&[
            "simulate",
            "example1.json",
            "--policy",
            "nope",
            "--T",
            "10",
            "--seed",
            "1"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn solve_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sol");
    let o = run(&[
        "solve",
        "example1.json",
        "--out",
        out.to_str().unwrap(),
        "--dump-lp",
        "--dump-values",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let obj: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("objective "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((obj - 0.58).abs() < 1e-9);
    for f in ["solution.json", "policy.json", "prices.json", "lp.txt", "values.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let prices: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("prices.json")).unwrap()).unwrap();
    assert_eq!(prices["node"].as_array().unwrap().len(), 3);
}

#[test]
fn compare_emits_one_row_per_cell() {
    let o = run(&[
        "compare",
        "fig6.json",
        "--policies",
        "truncated-link,edf-sp",
        "--deadlines",
        "3:4",
        "--seeds",
        "2",
        "--seed",
        "5",
        "--T",
        "200",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[0].starts_with("deadline,policy,N,seed,T"));
}

#[test]
fn simulate_and_prices() {
    let o = run(&[
        "simulate",
        "example1.json",
        "--policy",
        "optimal",
        "--T",
        "500",
        "--seed",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = run(&[
        "prices",
        "example1.json",
        "--method",
        "tatonnement",
        "--eps",
        "0.04",
        "--iters",
        "2000",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("converged"));
}
