//! Seeded, reproducible experiment harness: atom-count scaling, Hellinger
//! risk and the exponential-mixture probe.
//!
//! Replicate `r` at sample size `n` draws its data from
//! [`replicate_rng`](crate::measures::replicate_rng) keyed by
//! `(seed, n << 32 | r)`, so every row is reproducible on its own and
//! independent of thread scheduling or of which other sizes are run.

mod plot;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::analysis::divergences;
use crate::bounds::{exponential_atom_bound, gaussian_atom_bound, poisson_atom_bound};
use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;
use crate::measures::{sample_mixture_replicate, AtomicDistribution, MixingSpec, Sample};
use crate::solver::{default_window, solve_npmle, SolveConfig};
use crate::special::norm_pdf;

pub use plot::{line_chart, Axis, Series};

/// Upper end of the constrained window of the exponential probe.
pub const DEFAULT_CONSTRAINED_HI: f64 = 4.0;
/// Padding of the Hellinger quadrature interval beyond data and atoms.
const H2_PAD: f64 = 12.0;
const H2_POINTS_PER_UNIT: f64 = 400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Scaling,
    Risk,
    ExponentialProbe,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Risk => "risk",
            ExperimentKind::ExponentialProbe => "exponential_probe",
        }
    }
}

/// Experiment description, usually read from TOML:
///
/// ```toml
/// name = "gaussian-scaling"
/// experiment = "scaling"          # scaling | risk | exponential_probe
/// kernel = "gaussian"
/// spec = "gaussian:mean=0,sd=1"   # or a table: { type = "gaussian", mean = 0, sd = 1 }
/// n_list = [100, 1000, 10000]
/// replicates = 20
/// seed = 7
/// output = "results/gaussian-scaling"
///
/// [solver]                        # any SolveConfig field
/// kkt_tol = 1e-6
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub experiment: ExperimentKind,
    pub kernel: Kernel,
    #[serde(deserialize_with = "spec_text_or_table")]
    pub spec: MixingSpec,
    pub n_list: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolveConfig,
    /// Output prefix: writes `<output>.csv`, `<output>.json` and, with
    /// plots, `<output>_atoms.svg` / `<output>_h2.svg`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Exponential probe only: the constrained fit uses rates up to this.
    #[serde(default)]
    pub constrained_hi: Option<f64>,
}

fn spec_text_or_table<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<MixingSpec, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Field {
        Text(String),
        Table(MixingSpec),
    }
    match Field::deserialize(d)? {
        Field::Text(s) => MixingSpec::from_str(&s).map_err(serde::de::Error::custom),
        Field::Table(spec) => Ok(spec),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return invalid("replicates must be at least 1");
        }
        if self.n_list.is_empty() || self.n_list[0] < 1 {
            return invalid("n_list must be nonempty with positive sizes");
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return invalid(format!("n_list must be strictly increasing, got {:?}", self.n_list));
        }
        if self.n_list.last().is_some_and(|&n| n as u64 > u32::MAX as u64) || self.replicates as u64 > u32::MAX as u64 {
            return invalid("sample sizes and replicate counts must fit in 32 bits");
        }
        self.spec.check_kernel(self.kernel)?;
        self.solver.validate()?;
        match self.experiment {
            ExperimentKind::Risk if self.kernel != Kernel::Gaussian => {
                invalid("the risk experiment needs the gaussian kernel (closed-form true density)")
            }
            ExperimentKind::ExponentialProbe if self.kernel != Kernel::Exponential => {
                invalid("the exponential probe needs the exponential kernel")
            }
            ExperimentKind::ExponentialProbe if !(self.constrained_hi() > 0.0) => {
                invalid("constrained_hi must be positive")
            }
            _ => Ok(()),
        }
    }

    pub fn constrained_hi(&self) -> f64 {
        self.constrained_hi.unwrap_or(DEFAULT_CONSTRAINED_HI)
    }
}

/// One row per `(n, replicate)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub n: usize,
    pub replicate: usize,
    pub atom_count: usize,
    pub log_likelihood: f64,
    pub gap_bound: f64,
    pub converged: bool,
    pub x_min: f64,
    pub x_max: f64,
    /// Deterministic atom-count bound for this sample.
    pub bound_value: f64,
    /// `H²(p_π̂, p_π)`, when the true density is computable.
    pub h2: Option<f64>,
    pub constrained_atom_count: Option<usize>,
    pub constrained_gap_bound: Option<f64>,
    /// Seconds; left out of the CSV so reruns compare byte for byte.
    pub wall_time: f64,
}

impl ExperimentRecord {
    pub fn violates_bound(&self) -> bool {
        self.atom_count as f64 > self.bound_value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub rows: usize,
    pub nonconverged: usize,
    pub bound_violations: usize,
    pub median_atoms: f64,
    pub mean_atoms: f64,
    pub max_atoms: usize,
    pub median_atoms_over_sqrt_n: f64,
    pub median_atoms_over_ln_n: f64,
    pub mean_h2: Option<f64>,
    pub median_h2: Option<f64>,
    /// `mean H² · n / ln²n`.
    pub risk_ratio: Option<f64>,
    pub median_constrained_atoms: Option<f64>,
    /// Rows whose constrained fit has more atoms than the unconstrained one.
    pub constrained_exceeds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub experiment: ExperimentKind,
    pub kernel: Kernel,
    pub spec: String,
    pub seed: u64,
    pub replicates: usize,
    pub per_n: Vec<SizeSummary>,
    /// Least-squares slope and intercept of median atom count on `ln n`.
    pub slope_vs_ln_n: Option<f64>,
    pub intercept_vs_ln_n: Option<f64>,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub summary: ExperimentSummary,
}

/// Runs whichever experiment `config.experiment` names.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let start = Instant::now();
    let jobs: Vec<(usize, usize)> = config
        .n_list
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |r| (n, r)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(n, r)| run_replicate(config, n, r))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(config, &records, start.elapsed().as_secs_f64());
    Ok(ExperimentOutput { records, summary })
}

/// Atom counts against `n` (and the deterministic bounds).
pub fn run_scaling(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::Scaling)?;
    run_experiment(config)
}

/// Hellinger risk of the fitted mixture against the truth.
pub fn run_risk(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::Risk)?;
    run_experiment(config)
}

/// Unconstrained against window-constrained fits for exponential mixtures.
/// Produces evidence only; nothing is asserted about the growth rate.
pub fn run_exponential_probe(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(config, ExperimentKind::ExponentialProbe)?;
    run_experiment(config)
}

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if config.experiment != kind {
        return invalid(format!("config describes a '{}' experiment, not '{}'", config.experiment.name(), kind.name()));
    }
    Ok(())
}

/// Stream index of replicate `r` at size `n`.
pub fn replicate_stream(n: usize, r: usize) -> u64 {
    ((n as u64) << 32) | r as u64
}

fn run_replicate(config: &ExperimentConfig, n: usize, r: usize) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let kernel = config.kernel;
    let sample = sample_mixture_replicate(kernel, &config.spec, n, config.seed, replicate_stream(n, r))?;
    let sol = solve_npmle(kernel, &sample, &config.solver)?;
    let bound_value = match kernel {
        Kernel::Gaussian => gaussian_atom_bound(&sample)?,
        Kernel::Poisson => poisson_atom_bound(&sample)?.max(1) as f64,
        Kernel::Exponential => exponential_atom_bound(&sample)?.floor().max(1.0),
    };
    let h2 = match kernel {
        Kernel::Gaussian => Some(gaussian_h2(&sol.pi_hat, &config.spec, &sample)?),
        _ => None,
    };
    let (constrained_atom_count, constrained_gap_bound) = if config.experiment == ExperimentKind::ExponentialProbe {
        let (lo, hi) = default_window(kernel, &sample);
        let cap = config.constrained_hi();
        let window = if lo < cap { (lo, hi.min(cap)) } else { (lo, hi) };
        let cfg = SolveConfig { theta_window: Some(window), ..config.solver.clone() };
        let c = solve_npmle(kernel, &sample, &cfg)?;
        (Some(c.pi_hat.len()), Some(c.certificate.gap_bound))
    } else {
        (None, None)
    };
    Ok(ExperimentRecord {
        n,
        replicate: r,
        atom_count: sol.pi_hat.len(),
        log_likelihood: sol.log_likelihood,
        gap_bound: sol.certificate.gap_bound,
        converged: sol.converged,
        x_min: sample.x_min(),
        x_max: sample.x_max(),
        bound_value,
        h2,
        constrained_atom_count,
        constrained_gap_bound,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `H²` between the fitted and the true Gaussian location mixtures.
pub fn gaussian_h2(pi_hat: &AtomicDistribution, spec: &MixingSpec, sample: &Sample) -> Result<f64> {
    let (slo, shi) = match spec {
        MixingSpec::Gaussian { mean, sd } => (mean - 8.0 * sd, mean + 8.0 * sd),
        other => other.support(),
    };
    let atoms = pi_hat.atoms();
    let lo = sample.x_min().min(slo).min(atoms[0]) - H2_PAD;
    let hi = sample.x_max().max(shi).max(atoms[atoms.len() - 1]) + H2_PAD;
    let points = ((hi - lo) * H2_POINTS_PER_UNIT).ceil().max(8000.0) as usize;
    let fitted = |x: f64| pi_hat.iter().map(|(a, w)| w * norm_pdf(x - a)).sum::<f64>();
    Ok(divergences(fitted, |x| spec.gaussian_mixture_density(x), (lo, hi), points)?.h2)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn summarize(config: &ExperimentConfig, records: &[ExperimentRecord], wall_time: f64) -> ExperimentSummary {
    let per_n: Vec<SizeSummary> = config
        .n_list
        .iter()
        .map(|&n| {
            let rows: Vec<&ExperimentRecord> = records.iter().filter(|r| r.n == n).collect();
            let mut atoms: Vec<f64> = rows.iter().map(|r| r.atom_count as f64).collect();
            let mean_atoms = atoms.iter().sum::<f64>() / atoms.len() as f64;
            let median_atoms = median(&mut atoms);
            let mut h2: Vec<f64> = rows.iter().filter_map(|r| r.h2).collect();
            let (mean_h2, median_h2) = if h2.is_empty() {
                (None, None)
            } else {
                let mean = h2.iter().sum::<f64>() / h2.len() as f64;
                (Some(mean), Some(median(&mut h2)))
            };
            let ln_n = (n as f64).ln();
            let mut constrained: Vec<f64> =
                rows.iter().filter_map(|r| r.constrained_atom_count.map(|c| c as f64)).collect();
            let has_constrained = !constrained.is_empty();
            SizeSummary {
                n,
                rows: rows.len(),
                nonconverged: rows.iter().filter(|r| !r.converged).count(),
                bound_violations: rows.iter().filter(|r| r.violates_bound()).count(),
                median_atoms,
                mean_atoms,
                max_atoms: rows.iter().map(|r| r.atom_count).max().unwrap_or(0),
                median_atoms_over_sqrt_n: median_atoms / (n as f64).sqrt(),
                median_atoms_over_ln_n: if n > 1 { median_atoms / ln_n } else { f64::NAN },
                mean_h2,
                median_h2,
                risk_ratio: mean_h2.filter(|_| n > 1).map(|m| m * n as f64 / (ln_n * ln_n)),
                median_constrained_atoms: has_constrained.then(|| median(&mut constrained)),
                constrained_exceeds: has_constrained.then(|| {
                    rows.iter()
                        .filter(|r| r.constrained_atom_count.is_some_and(|c| c > r.atom_count))
                        .count()
                }),
            }
        })
        .collect();
    let (slope, intercept) = regression(&per_n);
    ExperimentSummary {
        name: config.name.clone(),
        experiment: config.experiment,
        kernel: config.kernel,
        spec: config.spec.to_string(),
        seed: config.seed,
        replicates: config.replicates,
        per_n,
        slope_vs_ln_n: slope,
        intercept_vs_ln_n: intercept,
        wall_time,
    }
}

fn regression(per_n: &[SizeSummary]) -> (Option<f64>, Option<f64>) {
    if per_n.len() < 2 {
        return (None, None);
    }
    let xs: Vec<f64> = per_n.iter().map(|s| (s.n as f64).ln()).collect();
    let ys: Vec<f64> = per_n.iter().map(|s| s.median_atoms).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (Some(slope), Some(my - slope * mx))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV with one row per record. Floats use the shortest round-trip form,
/// so equal runs give equal bytes.
pub fn records_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(
        "n,replicate,atom_count,log_likelihood,gap_bound,converged,x_min,x_max,bound_value,h2,constrained_atom_count,constrained_gap_bound\n",
    );
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.replicate,
            r.atom_count,
            r.log_likelihood,
            r.gap_bound,
            r.converged,
            r.x_min,
            r.x_max,
            r.bound_value,
            opt(r.h2),
            opt(r.constrained_atom_count),
            opt(r.constrained_gap_bound),
        )
        .unwrap();
    }
    out
}

/// SVG charts of the summary: median atom count against `ln n`, and for
/// experiments with a true density, `H²` against `n` on log-log axes.
pub fn summary_plots(summary: &ExperimentSummary) -> Vec<(&'static str, String)> {
    let mut plots = Vec::new();
    let ln = |s: &SizeSummary| (s.n as f64).ln();
    let mut series = vec![Series {
        name: "median atoms".into(),
        points: summary.per_n.iter().map(|s| (ln(s), s.median_atoms)).collect(),
    }];
    if summary.per_n.iter().all(|s| s.median_constrained_atoms.is_some()) {
        series.push(Series {
            name: "median atoms (constrained)".into(),
            points: summary.per_n.iter().map(|s| (ln(s), s.median_constrained_atoms.unwrap())).collect(),
        });
    }
    plots.push((
        "atoms",
        line_chart(&format!("{}: atom count", summary.name), Axis::linear("ln n"), Axis::linear("atoms"), &series),
    ));
    if summary.per_n.iter().all(|s| s.mean_h2.is_some_and(|h| h > 0.0)) {
        let series = [
            Series {
                name: "mean H²".into(),
                points: summary.per_n.iter().map(|s| (s.n as f64, s.mean_h2.unwrap())).collect(),
            },
            Series {
                name: "median H²".into(),
                points: summary.per_n.iter().map(|s| (s.n as f64, s.median_h2.unwrap())).collect(),
            },
        ];
        plots.push((
            "h2",
            line_chart(&format!("{}: Hellinger risk", summary.name), Axis::log("n"), Axis::log("H²"), &series),
        ));
    }
    plots
}

impl ExperimentOutput {
    /// Writes `<prefix>.csv`, `<prefix>.json` and optionally the SVG plots;
    /// returns the paths written.
    pub fn write(&self, prefix: &Path, plots: bool) -> Result<Vec<PathBuf>> {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let with_suffix = |s: &str| {
            let mut p = prefix.as_os_str().to_owned();
            p.push(s);
            PathBuf::from(p)
        };
        let mut written = Vec::new();
        let csv = with_suffix(".csv");
        fs::write(&csv, records_csv(&self.records))?;
        written.push(csv);
        let json = with_suffix(".json");
        let text = serde_json::to_string_pretty(&self.summary).map_err(|e| Error::Internal(e.to_string()))?;
        fs::write(&json, text)?;
        written.push(json);
        if plots {
            for (tag, svg) in summary_plots(&self.summary) {
                let path = with_suffix(&format!("_{tag}.svg"));
                fs::write(&path, svg)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

/// Thresholds frozen from oracle runs on held-out seeds (see
/// `expectations.toml` at the crate root and the `freeze_expectations`
/// example that regenerates it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    pub oracle_seeds: Vec<u64>,
    pub test_seeds: Vec<u64>,
    /// Gaussian scaling: median atoms ≤ `scaling_log_constant · ln n`.
    pub scaling_log_constant: f64,
    /// Gaussian risk: mean `H²` at `n = 2000` is at most this.
    pub risk_mean_h2_at_2000: f64,
    /// Exponential probe: constrained median atoms ≤ `probe_log_constant · ln n`.
    pub probe_log_constant: f64,
    /// Exponential probe: constrained median count growth from n=100 to 10000.
    pub probe_growth_factor: f64,
}

const EXPECTATIONS: &str = include_str!("../../expectations.toml");

impl Expectations {
    pub fn frozen() -> Self {
        toml::from_str(EXPECTATIONS).expect("expectations.toml is malformed")
    }
}
