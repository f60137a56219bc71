//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! fails. Set `NPMLE_ACCEPTANCE=1,4,7` to run a subset.

mod common;

use std::time::Instant;

use npmle::analysis::{divergences, gauss_quadrature_from_moments, k_atomic_approximation, Divergences};
use npmle::bounds::{blaschke_power, blaschke_zero_bound, crit_bound, gaussian_atom_bound, max_modulus};
use npmle::constructions::{build_sinusoid, logconcave_decomposition, piece_density, verify_sinusoid_modes, PIECE_WIDTH};
use npmle::experiments::{records_csv, run_risk, run_scaling, ExperimentConfig, Expectations};
use npmle::measures::{sample_mixture, sinusoid_convolution};
use npmle::special::norm_pdf;
use npmle::{solve_npmle, Kernel, MixingSpec, NpmleSolution, Sample, SolveConfig};

use common::{brute_force, gradient_direct, theta_grid};

// criterion 1
const SUP_D_TOL: f64 = 1e-5;
const MEAN_D_TOL: f64 = 1e-10;
const ATOM_D_TOL: f64 = 1e-4;
const TRACE_SLACK: f64 = 1e-12;
const INSTANCE_SECONDS: f64 = 5.0;
const CHECK_GRID: usize = 20_001;
// criterion 2
const ORACLE_SLACK: f64 = 1e-5;
// criterion 4
const N1_EXPECTED: f64 = 56.2231;
const N1_TOL: f64 = 1e-3;
const BOUND_EXPECTED: f64 = 195.43;
const BOUND_TOL: f64 = 0.05;
// criterion 5
const BLASCHKE_REL_TOL: f64 = 1e-9;
// criterion 6
const SCALING_LOG_CONSTANT: f64 = 10.0;
const SCALING_SECONDS: f64 = 600.0;
// criterion 7
const SINUSOID_SECONDS: f64 = 60.0;
const MODE_GRID: usize = 65_536;
// criterion 8
const MOMENT_REL_TOL: f64 = 1e-8;
const CHI2_BOUND: f64 = 1.455e-5;
// criterion 9
const H2_EXPECTED: f64 = 0.1175031;
const H2_TOL: f64 = 1e-6;
const ORDER_SLACK: f64 = 1e-12;
// criterion 10
const RISK_MEAN_H2: f64 = 0.05;
// criterion 11
const LC_MARGIN: f64 = 0.7;
const LC_RECOMBINATION: f64 = 1e-10;
const LC_PIECES: usize = 80;
const LC_MODES: usize = 15;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gaussian_instances() -> Vec<(MixingSpec, usize, u64)> {
    let specs = [
        "gaussian:mean=0,sd=1",
        "atomic:atoms=-2;0;2.5,weights=0.3;0.4;0.3",
        "uniform:lo=-3,hi=3",
        "gaussian:mean=1,sd=2",
        "sinusoid:a=4,omega=2",
    ];
    let ns = [50, 200, 500];
    (0..50)
        .map(|i| (specs[i % specs.len()].parse().unwrap(), ns[i % ns.len()], 1000 + i as u64))
        .collect()
}

struct Instance {
    sample: Sample,
    sol: NpmleSolution,
    seconds: f64,
}

fn solve_instances() -> Vec<Instance> {
    gaussian_instances()
        .into_iter()
        .map(|(spec, n, seed)| {
            let sample = sample_mixture(Kernel::Gaussian, &spec, n, seed).unwrap();
            let start = Instant::now();
            let sol = solve_npmle(Kernel::Gaussian, &sample, &SolveConfig::default()).unwrap();
            Instance { sample, sol, seconds: start.elapsed().as_secs_f64() }
        })
        .collect()
}

fn criterion_1(instances: &[Instance]) -> Outcome {
    let mut failures = Vec::new();
    let (mut worst_sup, mut worst_mean, mut worst_atom, mut slowest) = (0f64, 0f64, f64::INFINITY, 0f64);
    for (i, inst) in instances.iter().enumerate() {
        let pi = &inst.sol.pi_hat;
        let xs = inst.sample.values();
        let d = |t: f64| gradient_direct(Kernel::Gaussian, pi.atoms(), pi.weights(), xs, t);
        // independent dense evaluation of D over the data range, padded
        let (lo, hi) = (inst.sample.x_min() - 0.5, inst.sample.x_max() + 0.5);
        let sup = (0..CHECK_GRID)
            .map(|g| d(lo + (hi - lo) * g as f64 / (CHECK_GRID - 1) as f64))
            .chain(pi.atoms().iter().map(|&a| d(a)))
            .fold(f64::NEG_INFINITY, f64::max);
        let mean_d: f64 = pi.iter().map(|(a, w)| w * d(a)).sum();
        let atom_d = pi.atoms().iter().map(|&a| d(a)).fold(f64::INFINITY, f64::min);
        let monotone = inst.sol.trace.windows(2).all(|w| w[1] >= w[0] - TRACE_SLACK);
        worst_sup = worst_sup.max(sup);
        worst_mean = worst_mean.max((mean_d - 1.0).abs());
        worst_atom = worst_atom.min(atom_d);
        slowest = slowest.max(inst.seconds);
        let ok = inst.sol.converged
            && sup <= 1.0 + SUP_D_TOL
            && (mean_d - 1.0).abs() <= MEAN_D_TOL
            && atom_d >= 1.0 - ATOM_D_TOL
            && monotone
            && inst.seconds <= INSTANCE_SECONDS;
        if !ok {
            failures.push(format!(
                "#{i}: converged={} sup={sup} mean={mean_d} atomD={atom_d} monotone={monotone} t={:.2}s",
                inst.sol.converged, inst.seconds
            ));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} instances; max sup D {:.9}, max |int D - 1| {:.1e}, min atom D {:.9}, slowest {:.2}s{}",
            instances.len(),
            worst_sup,
            worst_mean,
            worst_atom,
            slowest,
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(" | ")) }
        ),
    )
}

fn criterion_2() -> Outcome {
    let cases: [(Kernel, &str); 3] = [
        (Kernel::Gaussian, "atomic:atoms=-1.5;1.5"),
        (Kernel::Poisson, "atomic:atoms=0;1.6"),
        (Kernel::Exponential, "uniform:lo=0.5,hi=3"),
    ];
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for (kernel, spec) in cases {
        let spec: MixingSpec = spec.parse().unwrap();
        for n in 1..=4usize {
            for seed in 0..5u64 {
                let sample = sample_mixture(kernel, &spec, n, 500 + seed).unwrap();
                let sol = solve_npmle(kernel, &sample, &SolveConfig::default()).unwrap();
                let m = if n == 4 { 21 } else { 41 };
                let oracle = brute_force(kernel, sample.values(), &theta_grid(kernel, &sample, m), n);
                let margin = sol.log_likelihood - oracle;
                worst = worst.min(margin);
                checked += 1;
                if margin < -ORACLE_SLACK {
                    failures.push(format!("{kernel} n={n} seed={seed}: solver {} < oracle {oracle}", sol.log_likelihood));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{checked} samples over 3 kernels; min (solver - grid oracle) = {worst:.3e}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join(" | ")) }
        ),
    )
}

fn criterion_3(instances: &[Instance]) -> Outcome {
    let mut violations = Vec::new();
    let mut tightest = f64::INFINITY;
    for (i, inst) in instances.iter().enumerate() {
        let bound = gaussian_atom_bound(&inst.sample).unwrap();
        tightest = tightest.min(bound - inst.sol.pi_hat.len() as f64);
        if inst.sol.pi_hat.len() as f64 > bound {
            violations.push(format!("gaussian #{i}: {} > {bound}", inst.sol.pi_hat.len()));
        }
    }
    let means: MixingSpec = format!(
        "atomic:atoms={}",
        (1..=5).map(|m| (m as f64).ln().to_string()).collect::<Vec<_>>().join(";")
    )
    .parse()
    .unwrap();
    let mut poisson = 0;
    for n in [50, 200, 1000] {
        for seed in 0..10u64 {
            let sample = sample_mixture(Kernel::Poisson, &means, n, 900 + seed).unwrap();
            let sol = solve_npmle(Kernel::Poisson, &sample, &SolveConfig::default()).unwrap();
            poisson += 1;
            if sol.pi_hat.len() as f64 > sample.x_max() {
                violations.push(format!("poisson n={n} seed={seed}: {} > x_max {}", sol.pi_hat.len(), sample.x_max()));
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "{} gaussian rows (min slack {tightest}), {poisson} poisson rows; violations: {}",
            instances.len(),
            if violations.is_empty() { "none".into() } else { violations.join(" | ") }
        ),
    )
}

fn criterion_4() -> Outcome {
    match crit_bound(Kernel::Gaussian, -2.0, 2.0, 2.0) {
        Ok(rep) => outcome(
            (rep.n1 - N1_EXPECTED).abs() <= N1_TOL && (rep.bound - BOUND_EXPECTED).abs() <= BOUND_TOL,
            format!("N1 = {:.6} (want {N1_EXPECTED} +- {N1_TOL}), bound = {:.4} (want {BOUND_EXPECTED} +- {BOUND_TOL})", rep.n1, rep.bound),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_5() -> Outcome {
    let mut worst = 0f64;
    for (r, r2) in [(0.3, 0.5), (0.5, 0.75)] {
        for n in 1..=10u32 {
            let f = blaschke_power(r, n);
            let ratio = (max_modulus(&f, 1.0, 8192) / max_modulus(&f, r2, 8192)).ln();
            let b = blaschke_zero_bound(r, r2, 1.0, ratio).unwrap();
            worst = worst.max((b - n as f64).abs() / n as f64);
        }
    }
    outcome(worst <= BLASCHKE_REL_TOL, format!("20 extremal products; max relative |bound - n| / n = {worst:.2e}"))
}

fn scaling_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        "name = \"acceptance-scaling\"\nexperiment = \"scaling\"\nkernel = \"gaussian\"\n\
         spec = \"gaussian:mean=0,sd=1\"\nn_list = [100, 1000, 10000]\nreplicates = 20\nseed = {seed}\n"
    ))
    .unwrap()
}

fn criterion_6(seed: u64) -> (Outcome, Option<String>) {
    let start = Instant::now();
    let out = match run_scaling(&scaling_config(seed)) {
        Ok(out) => out,
        Err(e) => return (outcome(false, e.to_string()), None),
    };
    let secs = start.elapsed().as_secs_f64();
    let per_n = &out.summary.per_n;
    let below = per_n.iter().all(|s| s.median_atoms <= SCALING_LOG_CONSTANT * (s.n as f64).ln());
    let decreasing = per_n.windows(2).all(|w| w[1].median_atoms_over_sqrt_n < w[0].median_atoms_over_sqrt_n);
    let medians: Vec<String> = per_n
        .iter()
        .map(|s| format!("n={}: median {} (10 ln n = {:.1}, /sqrt n = {:.4})", s.n, s.median_atoms, 10.0 * (s.n as f64).ln(), s.median_atoms_over_sqrt_n))
        .collect();
    (
        outcome(
            below && decreasing && secs <= SCALING_SECONDS,
            format!("{}; {:.1}s", medians.join(", "), secs),
        ),
        Some(records_csv(&out.records)),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for (a, w, need) in [(10.0, 2.5, 3u64), (20.0, 5.0, 15), (30.0, 7.5, 35)] {
        match build_sinusoid(a, w).and_then(|c| verify_sinusoid_modes(&c, MODE_GRID).map(|v| (c, v))) {
            Ok((c, v)) => {
                pass &= c.guaranteed_modes == need && v.counted as u64 >= need && c.condition_lhs > c.condition_rhs;
                parts.push(format!(
                    "a={a}: {} modes (need {need}), lhs {:.4e} > rhs {:.4e}",
                    v.counted, c.condition_lhs, c.condition_rhs
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("a={a}: {e}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs <= SINUSOID_SECONDS, format!("{}; {secs:.1}s", parts.join("; ")))
}

fn relative_moment_error(atoms: &[f64], weights: &[f64], moments: &[f64]) -> f64 {
    moments
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let (mut s, mut scale) = (0.0, m.abs());
            for (x, w) in atoms.iter().zip(weights) {
                let p = x.powi(j as i32);
                s += w * p;
                scale = scale.max((w * p).abs());
            }
            (s - m).abs() / scale
        })
        .fold(0.0, f64::max)
}

fn criterion_8(collected: &mut Vec<Divergences>) -> Outcome {
    let double_factorial = |j: usize| -> f64 { (1..j).step_by(2).map(|v| v as f64).product() };
    let gaussian: Vec<f64> = (0..20).map(|j| if j % 2 == 1 { 0.0 } else { double_factorial(j) }).collect();
    let uniform: Vec<f64> = (0..20).map(|j| 2f64.powi(j) / (j + 1) as f64).collect();
    let pts: Vec<f64> = (0..12).map(|i| -1.0 + 0.2 * i as f64 + 0.03 * (i * i) as f64).collect();
    let wts: Vec<f64> = (0..12).map(|i| (1 + i % 4) as f64 / 30.0).collect();
    let discrete: Vec<f64> = (0..20).map(|j| pts.iter().zip(&wts).map(|(x, w)| w * x.powi(j)).sum()).collect();
    let sources = [
        ("N(0,1)", &gaussian, None),
        ("U[0,2]", &uniform, Some((0.0, 2.0))),
        ("12-atom", &discrete, Some((-1.0, 4.3))),
    ];
    let mut worst = 0f64;
    let mut errors = Vec::new();
    for (name, m, hint) in sources {
        for k in 1..=10 {
            match gauss_quadrature_from_moments(&m[..2 * k], hint) {
                Ok(q) => {
                    let e = relative_moment_error(q.distribution.atoms(), q.distribution.weights(), &m[..2 * k]);
                    worst = worst.max(e);
                }
                Err(e) => errors.push(format!("{name} k={k}: {e}")),
            }
        }
    }
    let chi2 = match k_atomic_approximation(&MixingSpec::Gaussian { mean: 0.0, sd: 1.0 }, 1.0, 5) {
        Ok(q) => {
            let approx = |x: f64| q.distribution.iter().map(|(t, w)| w * norm_pdf(x - t)).sum::<f64>();
            collected.push(divergences(approx, norm_pdf , (-20.0, 20.0), 8000).unwrap());
            q.chi2_to_conditioned
        }
        Err(e) => {
            errors.push(e.to_string());
            f64::INFINITY
        }
    };
    outcome(
        worst <= MOMENT_REL_TOL && chi2 <= CHI2_BOUND && errors.is_empty(),
        format!(
            "max relative moment error {worst:.2e} over k=1..10 on 3 sources; chi2(a=1,k=5) = {chi2:.3e} <= {CHI2_BOUND:e}{}",
            if errors.is_empty() { String::new() } else { format!("; {}", errors.join(" | ")) }
        ),
    )
}

fn criterion_9(instances: &[Instance], mut collected: Vec<Divergences>) -> Outcome {
    let d = divergences(norm_pdf, |x| norm_pdf(x - 1.0), (-20.0, 21.0), 8000).unwrap();
    collected.push(d);
    let oracle = 1.0 - (-0.125f64).exp();
    let h2_ok = (d.h2 - H2_EXPECTED).abs() <= H2_TOL && (d.h2 - oracle).abs() <= H2_TOL;
    for s in [0.5, 2.0, 3.0] {
        collected.push(divergences(norm_pdf, |x| norm_pdf(x / s) / s, (-40.0, 40.0), 16000).unwrap());
    }
    let sin = |x: f64| sinusoid_convolution(6.0, 1.5, x);
    let uni = |x: f64| MixingSpec::Uniform { lo: -6.0, hi: 6.0 }.gaussian_mixture_density(x);
    collected.push(divergences(sin, uni, (-20.0, 20.0), 8000).unwrap());
    collected.push(divergences(uni, sin, (-20.0, 20.0), 8000).unwrap());
    // fitted mixtures against their generating mixtures
    let specs = gaussian_instances();
    for (inst, (spec, _, _)) in instances.iter().zip(&specs).take(10) {
        let pi = &inst.sol.pi_hat;
        let fit = |x: f64| pi.iter().map(|(a, w)| w * norm_pdf(x - a)).sum::<f64>();
        collected.push(divergences(fit, |x| spec.gaussian_mixture_density(x), (-30.0, 30.0), 12000).unwrap());
    }
    let unordered = collected.iter().filter(|d| !d.ordered(ORDER_SLACK)).count();
    outcome(
        h2_ok && unordered == 0,
        format!(
            "H2(N(0,1), N(1,1)) = {:.9} (closed form {oracle:.9}); ordering H2 <= TV <= sqrt(chi2/2) violated in {unordered} of {} evaluations",
            d.h2,
            collected.len()
        ),
    )
}

fn criterion_10(seed: u64) -> Outcome {
    let cfg = ExperimentConfig::from_toml(&format!(
        "name = \"acceptance-risk\"\nexperiment = \"risk\"\nkernel = \"gaussian\"\n\
         spec = \"gaussian:mean=0,sd=1\"\nn_list = [500, 2000, 8000]\nreplicates = 30\nseed = {seed}\n"
    ))
    .unwrap();
    match run_risk(&cfg) {
        Ok(out) => {
            let per_n = &out.summary.per_n;
            let mean_2000 = per_n[1].mean_h2.unwrap();
            let medians: Vec<f64> = per_n.iter().map(|s| s.median_h2.unwrap()).collect();
            let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
            outcome(
                mean_2000 <= RISK_MEAN_H2 && decreasing,
                format!("mean H2 at n=2000 = {mean_2000:.3e} (<= {RISK_MEAN_H2}); median H2 over n=500,2000,8000 = {}", medians.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>().join(", ")),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_11() -> Outcome {
    let a = 20.0;
    let dec = match logconcave_decomposition(a, 4096) {
        Ok(d) => d,
        Err(e) => return outcome(false, e.to_string()),
    };
    let tiles = dec.pieces.len() == LC_PIECES
        && dec.pieces.iter().enumerate().all(|(i, p)| {
            (p.lo - (-a + PIECE_WIDTH * i as f64)).abs() < 1e-12 && (p.hi - p.lo - PIECE_WIDTH).abs() < 1e-12
        })
        && (dec.pieces.last().unwrap().hi - a).abs() < 1e-12;
    let margin = dec.pieces.iter().map(|p| p.min_neg_second_derivative).fold(f64::INFINITY, f64::min);
    // spot check of the recombination through the public per-piece densities
    let mut spot = 0f64;
    for g in 0..401 {
        let x = -a - 3.0 + (2.0 * a + 6.0) * g as f64 / 400.0;
        let sum: f64 = dec.pieces.iter().map(|p| p.weight * piece_density(a, p.lo, x)).sum();
        spot = spot.max((sum - sinusoid_convolution(a, a / 4.0, x)).abs());
    }
    outcome(
        tiles
            && margin >= LC_MARGIN
            && dec.max_recombination_error <= LC_RECOMBINATION
            && spot <= LC_RECOMBINATION
            && dec.modes >= LC_MODES,
        format!(
            "{} pieces tiling [-20, 20]: {tiles}; min -(ln f_i)'' = {margin:.4} (>= {LC_MARGIN}); recombination error {:.2e} (spot check {spot:.2e}); {} modes (>= {LC_MODES})",
            dec.pieces.len(),
            dec.max_recombination_error,
            dec.modes
        ),
    )
}

fn criterion_12(seed: u64, first: Option<&str>) -> Outcome {
    let Some(first) = first else {
        return outcome(false, "criterion 6 produced no CSV to compare");
    };
    let dir = tempfile::tempdir().unwrap();
    let out = run_scaling(&scaling_config(seed)).unwrap();
    let paths = out.write(&dir.path().join("rerun"), false).unwrap();
    let bytes = std::fs::read(&paths[0]).unwrap();
    std::fs::write(dir.path().join("first.csv"), first).unwrap();
    let again = std::fs::read(dir.path().join("first.csv")).unwrap();
    outcome(
        bytes == again,
        format!("rerun CSV {} bytes, identical: {}", bytes.len(), bytes == again),
    )
}

fn main() {
    let selected: Option<Vec<u32>> = std::env::var("NPMLE_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let want = |c: u32| selected.as_ref().is_none_or(|s| s.contains(&c));
    let seed = Expectations::frozen().test_seeds[0];
    let needs_instances = [1, 3, 9].iter().any(|&c| want(c));
    let instances = if needs_instances { solve_instances() } else { Vec::new() };
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut collected = Vec::new();
    let mut scaling_csv = None;
    let start = Instant::now();
    for c in 1..=12u32 {
        if !want(c) {
            continue;
        }
        let t = Instant::now();
        let (name, o) = match c {
            1 => ("kkt-certification", criterion_1(&instances)),
            2 => ("small-instance-oracle", criterion_2()),
            3 => ("bound-dominance", criterion_3(&instances)),
            4 => ("critical-point-bound-arithmetic", criterion_4()),
            5 => ("blaschke-tightness", criterion_5()),
            6 => {
                let (o, csv) = criterion_6(seed);
                scaling_csv = csv;
                ("self-regularization-scaling", o)
            }
            7 => ("sinusoid-construction", criterion_7()),
            8 => ("quadrature-moment-matching", criterion_8(&mut collected)),
            9 => ("divergence-oracle", criterion_9(&instances, std::mem::take(&mut collected))),
            10 => ("risk-decay", criterion_10(seed)),
            11 => ("log-concave-decomposition", criterion_11()),
            12 => {
                if scaling_csv.is_none() {
                    scaling_csv = criterion_6(seed).1;
                }
                ("determinism", criterion_12(seed, scaling_csv.as_deref()))
            }
            _ => unreachable!(),
        };
        println!(
            "criterion {c:>2} {name}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
        results.push((c, name, o));
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed{} in {:.1}s",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({failed:?})") },
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
