use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn npmle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npmle")).args(args).output().unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = npmle(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn fit_reads_sample_file_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "x.txt", "x\n-3\n3\n");
    let v = json(&["fit", "--input", &input]);
    assert_eq!(v["atom_count"], 2);
    assert_eq!(v["converged"], true);
    assert!(v["certificate"]["gap_bound"].as_f64().unwrap() <= 1e-6);
    let out = dir.path().join("fit.json");
    let run = npmle(&["fit", "--input", &input, "--out", out.to_str().unwrap()]);
    assert!(run.status.success() && run.stdout.is_empty());
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(saved["pi_hat"], v["pi_hat"]);
}

#[test]
fn fit_respects_window_and_seed() {
    let args = ["fit", "--spec", "gaussian:mean=0,sd=2", "--n", "80", "--seed", "5", "--theta-lo", "-1", "--theta-hi", "1"];
    let a = json(&args);
    let b = json(&args);
    assert_eq!(a, b);
    for atom in a["pi_hat"]["atoms"].as_array().unwrap() {
        assert!(atom.as_f64().unwrap().abs() <= 1.0);
    }
}

#[test]
fn bound_reports_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "x.txt", "-2\n0.3\n2\n");
    let v = json(&["bound", "--input", &input]);
    assert_eq!(v["atom_bound"], 195.0);
    assert!((v["report"]["n1"].as_f64().unwrap() - 56.2231).abs() < 1e-3);
    let counts = write(dir.path(), "c.txt", "0\n1\n5\n");
    let v = json(&["bound", "--kernel", "poisson", "--input", &counts]);
    assert_eq!(v["atom_bound"], 5.0);
}

#[test]
fn modes_counts_sinusoid() {
    let v = json(&["modes", "--spec", "sinusoid:a=20,omega=5", "--interval", "-10:10"]);
    assert!(v["modes"].as_u64().unwrap() >= 15);
}

#[test]
fn quadrature_prints_csv() {
    let out = npmle(&["quadrature", "--spec", "uniform:lo=-1,hi=1", "--k", "2", "--a", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "atom,weight");
    let first: Vec<f64> = rows[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((first[0] + 1.0 / 3f64.sqrt()).abs() < 1e-12 && (first[1] - 0.5).abs() < 1e-12);
}

#[test]
fn construct_reports_conditions() {
    let v = json(&["construct", "--type", "sinusoid", "--a", "10", "--omega0", "2.5"]);
    assert_eq!(v["condition"]["holds"], true);
    let v = json(&["construct", "--type", "logconcave", "--a", "5"]);
    assert_eq!(v["decomposition"]["pieces"].as_array().unwrap().len(), 20);
    assert_eq!(v["decomposition"]["verified"], true);
}

#[test]
fn experiment_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "e.toml",
        "name = \"small\"\nexperiment = \"scaling\"\nkernel = \"gaussian\"\n\
         spec = \"gaussian:mean=0,sd=1\"\nn_list = [30, 60]\nreplicates = 2\nseed = 1\n",
    );
    let prefix = dir.path().join("run");
    let out = npmle(&["experiment", "--config", &cfg, "--out", prefix.to_str().unwrap(), "--plot"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("run.json").exists());
    assert!(dir.path().join("run_atoms.svg").exists());
}

#[test]
fn errors_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "x.txt", "1.5\n2\n");
    let out = npmle(&["fit", "--kernel", "poisson", "--input", &input]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integer"));
    let out = npmle(&["construct", "--type", "sinusoid", "--a", "2", "--omega0", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!npmle(&["fit", "--kernel", "cauchy", "--spec", "point:theta=0", "--n", "3"]).status.success());
}
