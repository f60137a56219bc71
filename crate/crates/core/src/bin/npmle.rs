use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use npmle::analysis::{count_density_modes, k_atomic_approximation};
use npmle::bounds::{
    crit_bound, crit_bound_optimized, exponential_atom_bound, exponential_bound_report, gaussian_atom_bound,
    gaussian_bound_report, poisson_atom_bound,
};
use npmle::constructions::{
    build_sinusoid, level_crossing_check, logconcave_decomposition, truncation_check, verify_sinusoid_modes,
};
use npmle::experiments::ExperimentConfig;
use npmle::measures::sample_mixture;
use npmle::{solve_npmle, Error, Kernel, MixingSpec, Result, Sample, SolveConfig};

#[derive(Parser)]
#[command(name = "npmle", version, about = "Nonparametric maximum likelihood for exponential-family mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the NPMLE to a sample and print it with its optimality certificate.
    Fit(FitArgs),
    /// Deterministic atom-count bound for a sample.
    Bound(BoundArgs),
    /// Count modes of the Gaussian location mixture of a mixing spec.
    Modes(ModesArgs),
    /// k-point Gauss quadrature of a mixing spec conditioned on [-a, a].
    Quadrature(QuadratureArgs),
    /// Build and verify a many-modes construction.
    Construct(ConstructArgs),
    /// Run an experiment described by a TOML config.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, default_value = "gaussian")]
    kernel: Kernel,
    /// Sample file: one observation per line (first column of a CSV; `#` comments and an `x` header are skipped).
    #[arg(long, conflicts_with = "spec")]
    input: Option<PathBuf>,
    /// Simulate instead: mixing spec such as `gaussian:mean=0,sd=1`.
    #[arg(long, requires = "n", allow_hyphen_values = true)]
    spec: Option<MixingSpec>,
    /// Sample size when simulating.
    #[arg(long)]
    n: Option<usize>,
    /// Seed when simulating.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SampleArgs {
    fn load(&self) -> Result<Sample> {
        let sample = match (&self.input, &self.spec, self.n) {
            (Some(path), _, _) => Sample::read(path)?,
            (None, Some(spec), Some(n)) => sample_mixture(self.kernel, spec, n, self.seed)?,
            _ => return Err(Error::InvalidArgument("give --input, or --spec with --n".into())),
        };
        sample.validate_for(self.kernel)?;
        Ok(sample)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long, allow_hyphen_values = true, requires = "theta_hi")]
    theta_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "theta_lo")]
    theta_hi: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    kkt_tol: f64,
    /// Grid points for locating the maximum of the gradient function.
    #[arg(long, default_value_t = 4096)]
    grid: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Output JSON file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    sample: SampleArgs,
    /// Bound parameter δ (default: the half-width r of the parameter range).
    #[arg(long, conflicts_with = "optimize")]
    delta: Option<f64>,
    /// Minimize the critical-point bound over δ on a log grid.
    #[arg(long)]
    optimize: bool,
}

#[derive(Args)]
struct ModesArgs {
    #[arg(long, allow_hyphen_values = true)]
    spec: MixingSpec,
    /// `lo:hi`; defaults to the middle half of the spec's support.
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    #[arg(long, default_value_t = 65536)]
    grid: usize,
}

#[derive(Args)]
struct QuadratureArgs {
    #[arg(long, allow_hyphen_values = true)]
    spec: MixingSpec,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    a: f64,
    /// Output CSV file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructionType {
    Sinusoid,
    Logconcave,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long = "type", value_enum)]
    kind: ConstructionType,
    #[arg(long)]
    a: f64,
    /// Frequency; the log-concave decomposition always uses a/4.
    #[arg(long)]
    omega0: Option<f64>,
    #[arg(long, default_value_t = 65536)]
    grid: usize,
    /// Also write the convolved density on a grid over [-a-3, a+3].
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 4001)]
    csv_points: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output prefix.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long)]
    plot: bool,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Internal(e.to_string()))
}

fn fit(args: &FitArgs) -> Result<()> {
    let kernel = args.sample.kernel;
    let sample = args.sample.load()?;
    let config = SolveConfig {
        theta_window: args.theta_lo.zip(args.theta_hi),
        grid_size: args.grid,
        kkt_tol: args.kkt_tol,
        max_outer_iters: args.max_iters,
        ..SolveConfig::default()
    };
    let sol = solve_npmle(kernel, &sample, &config)?;
    let report = json!({
        "kernel": kernel,
        "n": sample.n(),
        "pi_hat": sol.pi_hat,
        "atom_count": sol.pi_hat.len(),
        "log_likelihood": sol.log_likelihood,
        "certificate": sol.certificate,
        "iterations": sol.outer_iters,
        "converged": sol.converged,
        "boundary_clamped": sol.boundary_clamped,
    });
    emit(&to_json(&report)?, args.out.as_deref())
}

fn bound(args: &BoundArgs) -> Result<()> {
    let kernel = args.sample.kernel;
    let sample = args.sample.load()?;
    let (lo, hi) = (sample.x_min(), sample.x_max());
    let mut out = json!({ "kernel": kernel, "n": sample.n(), "x_min": lo, "x_max": hi });
    match kernel {
        Kernel::Gaussian => {
            let x0 = 0.5 * (lo + hi);
            let report = if lo == hi {
                None
            } else if args.optimize {
                Some(crit_bound_optimized(kernel, lo - x0, hi - x0)?)
            } else if let Some(delta) = args.delta {
                Some(crit_bound(kernel, lo - x0, hi - x0, delta)?)
            } else {
                gaussian_bound_report(&sample)?
            };
            out["atom_bound"] = match &report {
                Some(r) => json!(r.bound_floor.max(1.0)),
                None => json!(gaussian_atom_bound(&sample)?),
            };
            out["report"] = json!(report);
        }
        Kernel::Poisson => {
            out["atom_bound"] = json!(poisson_atom_bound(&sample)?.max(1));
            // the generic bound needs mu(0) = 1 inside the data range and no zeros
            let generic = if lo <= 0.0 {
                Err(Error::InvalidArgument("the generic bound needs positive counts (x_min > 0)".into()))
            } else if args.optimize {
                crit_bound_optimized(kernel, lo, hi)
            } else {
                let r = 0.5 * (hi.ln() - lo.ln());
                crit_bound(kernel, lo, hi, args.delta.unwrap_or(r))
            };
            match generic {
                Ok(r) => out["report"] = json!(r),
                Err(e) => out["report_unavailable"] = json!(e.to_string()),
            }
        }
        Kernel::Exponential => {
            out["atom_bound"] = json!(exponential_atom_bound(&sample)?);
            out["report"] = json!(exponential_bound_report(&sample)?);
        }
    }
    emit(&to_json(&out)?, None)
}

fn parse_interval(text: &str) -> Result<(f64, f64)> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("interval must look like lo:hi, got '{text}'")))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
    Ok((num(a)?, num(b)?))
}

fn modes(args: &ModesArgs) -> Result<()> {
    let interval = match &args.interval {
        Some(text) => parse_interval(text)?,
        None => {
            let (lo, hi) = args.spec.support();
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!("give --interval for {}", args.spec)));
            }
            let (c, h) = (0.5 * (lo + hi), 0.25 * (hi - lo));
            (c - h, c + h)
        }
    };
    let spec = &args.spec;
    let report = count_density_modes(|x| spec.gaussian_mixture_density(x), interval, args.grid)?;
    let out = json!({ "spec": spec.to_string(), "modes": report.count, "report": report });
    emit(&to_json(&out)?, None)
}

fn quadrature(args: &QuadratureArgs) -> Result<()> {
    let q = k_atomic_approximation(&args.spec, args.a, args.k)?;
    let mut csv = String::new();
    writeln!(csv, "# spec={} a={} k={}", args.spec, q.a, q.k).unwrap();
    writeln!(csv, "# tv_bound={:e} measured_tv={:e} measured_h2={:e}", q.tv_bound, q.measured_tv, q.measured_h2).unwrap();
    writeln!(csv, "# chi2_bound={:e} chi2_to_conditioned={:e} max_moment_error={:e}", q.chi2_bound, q.chi2_to_conditioned, q.max_moment_error).unwrap();
    csv.push_str(&q.distribution.to_csv());
    emit(&csv, args.out.as_deref())
}

fn density_csv(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> String {
    let mut out = String::from("x,density\n");
    for i in 0..points {
        let x = lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64;
        writeln!(out, "{x},{}", f(x)).unwrap();
    }
    out
}

fn construct(args: &ConstructArgs) -> Result<()> {
    let a = args.a;
    let report: Value = match args.kind {
        ConstructionType::Sinusoid => {
            let omega0 = args
                .omega0
                .ok_or_else(|| Error::InvalidArgument("--omega0 is required for the sinusoid construction".into()))?;
            let cons = build_sinusoid(a, omega0)?;
            let modes = verify_sinusoid_modes(&cons, args.grid)?;
            let truncation = truncation_check(&cons, 2001, 1e-12)?;
            let crossing = level_crossing_check(&cons);
            if let Some(path) = &args.csv {
                fs::write(path, density_csv(|x| cons.density(x), -a - 3.0, a + 3.0, args.csv_points))?;
            }
            json!({
                "type": "sinusoid",
                "construction": cons,
                "condition": { "lhs": cons.condition_lhs, "rhs": cons.condition_rhs, "holds": cons.condition_lhs > cons.condition_rhs },
                "modes": modes,
                "truncation": truncation,
                "level_crossing": crossing,
            })
        }
        ConstructionType::Logconcave => {
            if args.omega0.is_some_and(|w| w != a / 4.0) {
                eprintln!("note: the log-concave decomposition uses omega0 = a/4 = {}", a / 4.0);
            }
            let dec = logconcave_decomposition(a, args.grid)?;
            if let Some(path) = &args.csv {
                let cons = build_sinusoid(a, a / 4.0)?;
                fs::write(path, density_csv(|x| cons.density(x), -a - 3.0, a + 3.0, args.csv_points))?;
            }
            json!({ "type": "logconcave", "decomposition": dec })
        }
    };
    emit(&to_json(&report)?, None)
}

fn experiment(args: &ExperimentArgs) -> Result<()> {
    let config = ExperimentConfig::read(&args.config)?;
    let prefix = args
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from(&config.name));
    let output = npmle::experiments::run_experiment(&config)?;
    for path in output.write(&prefix, args.plot)? {
        eprintln!("wrote {}", path.display());
    }
    emit(&to_json(&output.summary)?, None)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => fit(a),
        Command::Bound(a) => bound(a),
        Command::Modes(a) => modes(a),
        Command::Quadrature(a) => quadrature(a),
        Command::Construct(a) => construct(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
