use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use expvar_core::expvar::FixedPointOptions;
use expvar_core::{optimal_projected_var, DataMatrix, Loadings, Weights};
use nalgebra::DMatrix;
use serde_json::Value;
use tempfile::TempDir;

fn expvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expvar")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn compute_coordinate_loadings_agree_across_definitions() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "3,0,0\n0,2,0\n0,0,1\n");
    let z = write(&dir, "z.csv", "1,0\n0,1\n0,0\n");
    let out = expvar(&["compute", "--data", s(&a), "--loadings", s(&z)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 6);
    for r in results {
        assert_eq!(r["value"].as_f64().unwrap(), 13.0);
        assert_eq!(r["pev"].as_f64().unwrap(), 0.928571428571);
    }

    let csv = expvar(&["--format", "csv", "compute", "--data", s(&a), "--loadings", s(&z)]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("definition,value,pev\nsubspVar,13,0.928571428571\n"));
}

#[test]
fn rank_deficient_components_exit_2() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "3,0,0\n0,2,0\n0,0,1\n");
    let z = write(&dir, "z.csv", "1,1\n0,0\n0,0\n");
    let out = expvar(&["compute", "--data", s(&a), "--loadings", s(&z)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("RankDeficient"));
}

#[test]
fn unnormalized_loadings_suggest_normalize() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "3,0\n0,2\n");
    let z = write(&dir, "z.csv", "2,0\n0,1\n");
    let out = expvar(&["compute", "--data", s(&a), "--loadings", s(&z)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--normalize"));
    let ok = expvar(&["compute", "--data", s(&a), "--loadings", s(&z), "--normalize"]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn weighted_optproj_matches_library() {
    let dir = TempDir::new().unwrap();
    let rows = [[2.0, 0.3, -0.1], [0.1, 1.5, 0.4], [-0.2, 0.5, 1.0], [0.7, -0.3, 0.2]];
    let zrows = [[0.8, 0.6], [0.6, 0.0], [0.0, 0.8]];
    let text = |r: &[[f64; 3]]| r.iter().map(|x| format!("{},{},{}\n", x[0], x[1], x[2])).collect::<String>();
    let a_path = write(&dir, "a.csv", &text(&rows));
    let z_path = write(
        &dir,
        "z.csv",
        &zrows.iter().map(|x| format!("{},{}\n", x[0], x[1])).collect::<String>(),
    );
    let out = expvar(&[
        "compute", "--data", s(&a_path), "--loadings", s(&z_path), "--method", "optproj", "--weights", "2,1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let got = json_stdout(&out)["results"][0]["value"].as_f64().unwrap();

    let a = DataMatrix::new(DMatrix::from_fn(4, 3, |i, j| rows[i][j])).unwrap();
    let z = Loadings::new(DMatrix::from_fn(3, 2, |i, j| zrows[i][j])).unwrap();
    let w = Weights::new(vec![2.0, 1.0]).unwrap();
    let want = optimal_projected_var(&a, &z, Some(&w), FixedPointOptions::default()).unwrap().value;
    assert!((got - want).abs() <= 1e-11 * want, "{got} vs {want}");
}

#[test]
fn solve_recovers_principal_loadings() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.csv", "3,0,0\n0,2,0\n0,0,1\n");
    let out = expvar(&["--seed", "7", "solve", "--data", s(&a), "--m", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["matched_svd"], Value::Bool(true));
    assert_eq!(v["converged"], Value::Bool(true));
    assert_eq!(v["optimum"].as_f64().unwrap(), 40.0);

    let constant = expvar(&["solve", "--data", s(&a), "--m", "2", "--weights", "constant"]);
    assert_eq!(constant.status.code(), Some(0));
    assert!(json_stdout(&constant)["note"].is_string());

    let too_many = expvar(&["solve", "--data", s(&a), "--m", "4"]);
    assert_eq!(too_many.status.code(), Some(2));
}

#[test]
fn pev_curves_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", r#"{"name": "different_eigenvalues", "lambdas": [0, 0.4], "trials": 3}"#);
    let first = dir.path().join("one.csv");
    let second = dir.path().join("two.csv");
    for out in [&first, &second] {
        let r = expvar(&["--seed", "11", "--out", s(out), "experiment", "pev-curves", "--config", s(&cfg)]);
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let a = fs::read_to_string(&first).unwrap();
    assert_eq!(a, fs::read_to_string(&second).unwrap());
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("one.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"].as_u64(), Some(11));
    assert_eq!(meta["trials"].as_u64(), Some(3));

    // at lambda = 0 the loadings are V_m and every definition gives the same mean
    let means: Vec<f64> = a
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1) == Some("0"))
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(means.len(), 6);
    for m in &means {
        assert!((m - means[0]).abs() <= 1e-10);
    }
}

#[test]
fn ranking_reports_metadata_and_agreement() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", r#"{"name": "close_eigenvalues", "lambdas": [0, 0.3, 0.6, 0.9]}"#);
    let out = expvar(&["experiment", "ranking", "--config", s(&cfg), "--trials", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_stdout(&out);
    assert_eq!(v["metadata"]["trials"].as_u64(), Some(2));
    assert_eq!(v["reports"].as_array().unwrap().len(), 3);
    let unknown = write(&dir, "bad.json", r#"{"name": "close_eigenvalues", "bogus": 1}"#);
    assert_eq!(expvar(&["experiment", "ranking", "--config", s(&unknown)]).status.code(), Some(2));
}

#[test]
fn demos_verify_their_witnesses() {
    for name in ["parasitic", "counterexample-norm", "anomaly-subspace"] {
        let out = expvar(&["demo", name]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("\"holds\": true"), "{name}");
    }
}
