//! Oracle runs on the held-out seeds; prints a fresh `expectations.toml`.
//!
//! Each threshold is the worst value seen over the oracle seeds times a
//! slack factor, capped by the fixed acceptance level where one exists.

use npmle::experiments::{run_experiment, ExperimentConfig, ExperimentOutput, Expectations};

const SLACK: f64 = 1.5;

fn run(text: &str, seed: u64) -> ExperimentOutput {
    let cfg = ExperimentConfig::from_toml(&format!("{text}seed = {seed}\n")).expect("config");
    run_experiment(&cfg).expect("run")
}

fn main() {
    let current = Expectations::frozen();
    let (mut scaling_c, mut risk, mut probe_c, mut growth) = (0f64, 0f64, 0f64, 0f64);
    for &seed in &current.oracle_seeds {
        let out = run(
            "name = \"oracle-scaling\"\nexperiment = \"scaling\"\nkernel = \"gaussian\"\n\
             spec = \"gaussian:mean=0,sd=1\"\nn_list = [100, 1000, 10000]\nreplicates = 20\n",
            seed,
        );
        for s in &out.summary.per_n {
            scaling_c = scaling_c.max(s.median_atoms_over_ln_n);
        }
        let out = run(
            "name = \"oracle-risk\"\nexperiment = \"risk\"\nkernel = \"gaussian\"\n\
             spec = \"gaussian:mean=0,sd=1\"\nn_list = [2000]\nreplicates = 30\n",
            seed,
        );
        risk = risk.max(out.summary.per_n[0].mean_h2.unwrap());
        let out = run(
            "name = \"oracle-probe\"\nexperiment = \"exponential_probe\"\nkernel = \"exponential\"\n\
             spec = \"atomic:atoms=1;2,weights=0.5;0.5\"\nn_list = [100, 1000, 10000]\nreplicates = 10\n",
            seed,
        );
        let per_n = &out.summary.per_n;
        for s in per_n {
            probe_c = probe_c.max(s.median_constrained_atoms.unwrap() / (s.n as f64).ln());
        }
        growth = growth.max(per_n[2].median_constrained_atoms.unwrap() / per_n[0].median_constrained_atoms.unwrap());
        eprintln!("seed {seed}: scaling C {scaling_c:.3}, risk {risk:.5}, probe C {probe_c:.3}, growth {growth:.3}");
    }
    let round = |v: f64, step: f64| (v / step).ceil() * step;
    println!("# Thresholds for the experiment checks, frozen from oracle runs on the");
    println!("# held-out seeds below (regenerate with");
    println!("# `cargo run --release -p npmle --example freeze_expectations`).");
    println!("# The acceptance tests use test_seeds, which are disjoint from oracle_seeds.");
    println!("# Oracle maxima: scaling C {scaling_c:.4}, risk mean H2 {risk:.5}, probe C {probe_c:.4}, growth {growth:.4}.");
    println!("oracle_seeds = {:?}", current.oracle_seeds);
    println!("test_seeds = {:?}", current.test_seeds);
    println!("scaling_log_constant = {:.2}", round(SLACK * scaling_c, 0.05).min(10.0));
    println!("risk_mean_h2_at_2000 = {:.4}", round(SLACK * risk, 0.0005).min(0.05));
    println!("probe_log_constant = {:.2}", round(SLACK * probe_c, 0.05));
    println!("probe_growth_factor = {:.2}", round(SLACK * growth, 0.05).min(4.0));
}
