//! Atomic mixing distributions, samples, mixing specifications and random
//! generation.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{Kernel, LogFactorial};
use crate::quadrature::GaussLegendre;
use crate::special::{log_sum_exp, norm_interval, norm_pdf};

/// Default canonicalization constants.
pub const MERGE_RADIUS: f64 = 1e-8;
pub const PRUNE_THRESHOLD: f64 = 1e-12;

/// A finitely supported probability measure on the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicDistribution {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicDistribution {
    /// Builds a canonical distribution from unsorted atoms and nonnegative
    /// weights (normalised here).
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::from_parts(atoms, weights)?.canonicalize(MERGE_RADIUS, PRUNE_THRESHOLD)
    }

    /// Sorts and normalises without merging or pruning.
    pub fn from_parts(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return invalid("atomic distribution needs at least one atom");
        }
        if atoms.len() != weights.len() {
            return invalid(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            ));
        }
        if let Some(a) = atoms.iter().find(|a| !a.is_finite()) {
            return invalid(format!("atom {a} is not finite"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return invalid(format!("weight {w} is not a finite nonnegative number"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return invalid("weights sum to zero");
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (atoms, mut weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if (total - 1.0).abs() > 1e-15 {
            for w in &mut weights {
                *w /= total;
            }
        }
        Ok(AtomicDistribution { atoms, weights })
    }

    pub fn point_mass(theta: f64) -> Self {
        AtomicDistribution {
            atoms: vec![theta],
            weights: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + Clone + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    /// Drops weights below `prune`, merges chains of atoms closer than
    /// `merge_radius` into their weighted mean, and renormalises. Leaves the
    /// input bit-identical when nothing needs to change, so the operation is
    /// idempotent.
    pub fn canonicalize(&self, merge_radius: f64, prune: f64) -> Result<Self> {
        let keep: Vec<(f64, f64)> = self.iter().filter(|&(_, w)| w >= prune).collect();
        if keep.is_empty() {
            return invalid("every weight is below the prune threshold");
        }
        let mut pruned = keep.len() != self.len();
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(keep.len());
        let mut group: Vec<(f64, f64)> = vec![keep[0]];
        let flush = |group: &mut Vec<(f64, f64)>, out: &mut Vec<(f64, f64)>| {
            if group.len() == 1 {
                out.push(group[0]);
            } else {
                let w: f64 = group.iter().map(|p| p.1).sum();
                let loc = group.iter().map(|p| p.0 * p.1).sum::<f64>() / w;
                out.push((loc, w));
            }
            group.clear();
        };
        for pair in keep.iter().skip(1) {
            let last = group.last().unwrap().0;
            if pair.0 - last < merge_radius {
                group.push(*pair);
                pruned = true;
            } else {
                flush(&mut group, &mut merged);
                group.push(*pair);
            }
        }
        flush(&mut group, &mut merged);
        if !pruned {
            return Ok(self.clone());
        }
        let total: f64 = merged.iter().map(|p| p.1).sum();
        Ok(AtomicDistribution {
            atoms: merged.iter().map(|p| p.0).collect(),
            weights: merged.iter().map(|p| p.1 / total).collect(),
        })
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(a, w)| a * w).sum()
    }

    pub fn moment(&self, j: u32) -> f64 {
        self.iter().map(|(a, w)| w * a.powi(j as i32)).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("atom,weight\n");
        for (a, w) in self.iter() {
            s.push_str(&format!("{a},{w}\n"));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("atom")) {
                continue;
            }
            let mut parts = line.split(',');
            let a = parse_f64(parts.next().unwrap_or(""))?;
            let w = parse_f64(parts.next().unwrap_or(""))?;
            atoms.push(a);
            weights.push(w);
        }
        Self::from_parts(atoms, weights)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("atomic distribution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            atoms: Vec<f64>,
            weights: Vec<f64>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_parts(raw.atoms, raw.weights)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("'{}' is not a number", s.trim())))
}

/// Sorted observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("sample must contain at least one observation");
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return invalid(format!("observation {x} is not finite"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Sample { values })
    }

    /// Like [`Sample::new`], additionally checking every observation against
    /// the kernel's observation space.
    pub fn for_kernel(values: Vec<f64>, kernel: Kernel) -> Result<Self> {
        let s = Self::new(values)?;
        s.validate_for(kernel)?;
        Ok(s)
    }

    pub fn validate_for(&self, kernel: Kernel) -> Result<()> {
        self.values.iter().try_for_each(|&x| kernel.check_observation(x))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn x_min(&self) -> f64 {
        self.values[0]
    }

    pub fn x_max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn shifted(&self, c: f64) -> Sample {
        Sample {
            values: self.values.iter().map(|x| x + c).collect(),
        }
    }

    /// Distinct values with their multiplicities, ascending.
    pub fn distinct(&self) -> (Vec<f64>, Vec<usize>) {
        let mut xs: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for &x in &self.values {
            if xs.last() == Some(&x) {
                *counts.last_mut().unwrap() += 1;
            } else {
                xs.push(x);
                counts.push(1);
            }
        }
        (xs, counts)
    }

    /// Parses one observation per line; blank lines, `#` comments and a
    /// leading `x` CSV header are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line == "x") {
                continue;
            }
            let field = line.split(',').next().unwrap_or("");
            values.push(parse_f64(field)?);
        }
        Self::new(values)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.n() * 12);
        for x in &self.values {
            s.push_str(&format!("{x}\n"));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        format!("x\n{}", self.to_text())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Description of a true mixing distribution used for data generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MixingSpec {
    Point { theta: f64 },
    Atomic { atoms: Vec<f64>, weights: Vec<f64> },
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Density `c(1 + sin(ω₀θ))` on `[−a, a]`.
    Sinusoid { a: f64, omega: f64 },
}

impl MixingSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MixingSpec::Point { theta } if theta.is_finite() => Ok(()),
            MixingSpec::Point { theta } => invalid(format!("point mass at {theta}")),
            MixingSpec::Atomic { atoms, weights } => {
                AtomicDistribution::from_parts(atoms.clone(), weights.clone()).map(|_| ())
            }
            MixingSpec::Gaussian { mean, sd } if mean.is_finite() && *sd > 0.0 && sd.is_finite() => {
                Ok(())
            }
            MixingSpec::Gaussian { sd, .. } => invalid(format!("gaussian spec needs sd > 0, got {sd}")),
            MixingSpec::Uniform { lo, hi } if lo < hi && lo.is_finite() && hi.is_finite() => Ok(()),
            MixingSpec::Uniform { lo, hi } => invalid(format!("uniform spec needs lo < hi, got [{lo}, {hi}]")),
            MixingSpec::Sinusoid { a, omega } if *a > 0.0 && *omega > 0.0 => Ok(()),
            MixingSpec::Sinusoid { a, omega } => {
                invalid(format!("sinusoid spec needs a > 0 and omega > 0, got a={a}, omega={omega}"))
            }
        }
    }

    /// Checks that every parameter the spec can produce lies in the kernel's
    /// domain and that the combination is supported.
    pub fn check_kernel(&self, kernel: Kernel) -> Result<()> {
        self.validate()?;
        match (kernel, self) {
            (Kernel::Poisson, MixingSpec::Sinusoid { .. }) => {
                invalid("sinusoid mixing spec is not supported with the poisson kernel")
            }
            (Kernel::Exponential, MixingSpec::Gaussian { .. } | MixingSpec::Sinusoid { .. }) => {
                invalid(format!("{self} can produce nonpositive rates for the exponential kernel"))
            }
            (Kernel::Exponential, _) => {
                let (lo, _) = self.support();
                if lo <= 0.0 {
                    invalid(format!("{self} has nonpositive rates for the exponential kernel"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Smallest interval containing the support (infinite for gaussian).
    pub fn support(&self) -> (f64, f64) {
        match self {
            MixingSpec::Point { theta } => (*theta, *theta),
            MixingSpec::Atomic { atoms, .. } => (
                atoms.iter().copied().fold(f64::INFINITY, f64::min),
                atoms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            MixingSpec::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            MixingSpec::Uniform { lo, hi } => (*lo, *hi),
            MixingSpec::Sinusoid { a, .. } => (-a, *a),
        }
    }

    /// Draws one parameter value.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MixingSpec::Point { theta } => *theta,
            MixingSpec::Atomic { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (a, w) in atoms.iter().zip(weights) {
                    if u < *w {
                        return *a;
                    }
                    u -= w;
                }
                *atoms.last().unwrap()
            }
            MixingSpec::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            MixingSpec::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            MixingSpec::Sinusoid { a, omega } => loop {
                let x = -a + 2.0 * a * rng.random::<f64>();
                if 2.0 * rng.random::<f64>() < 1.0 + (omega * x).sin() {
                    break x;
                }
            },
        }
    }

    /// Density of the Gaussian location mixture `(π ∗ φ)(x)`.
    pub fn gaussian_mixture_density(&self, x: f64) -> f64 {
        match self {
            MixingSpec::Point { theta } => norm_pdf(x - theta),
            MixingSpec::Atomic { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                atoms
                    .iter()
                    .zip(weights)
                    .map(|(a, w)| w * norm_pdf(x - a))
                    .sum::<f64>()
                    / total
            }
            MixingSpec::Gaussian { mean, sd } => {
                let s = (1.0 + sd * sd).sqrt();
                norm_pdf((x - mean) / s) / s
            }
            MixingSpec::Uniform { lo, hi } => norm_interval(x - hi, x - lo) / (hi - lo),
            MixingSpec::Sinusoid { a, omega } => sinusoid_convolution(*a, *omega, x),
        }
    }
}

/// `((c(1 + sin ω·)) 1{|·| ≤ a}) ∗ φ` at `x`, with `c = 1/(2a)`.
///
/// The sinusoid's full-line convolution is `e^{−ω²/2} sin(ωx)`; only the
/// part of it lying outside `[−a, a]` is integrated numerically, which keeps
/// the modulation (as small as `e^{−ω²/2}`) free of cancellation error.
pub fn sinusoid_convolution(a: f64, omega: f64, x: f64) -> f64 {
    let c = 0.5 / a;
    if x.abs() >= a {
        // outside the support the integrand is nonnegative: integrate directly
        let f = |y: f64| (1.0 + (omega * y).sin()) * norm_pdf(x - y);
        let (lo, hi) = ((-a).max(x - TAIL_REACH), a.min(x + TAIL_REACH));
        if hi <= lo {
            return 0.0;
        }
        return c * composite_oscillatory(&f, lo, hi, omega);
    }
    let base = norm_interval(x - a, x + a);
    let wave = (-0.5 * omega * omega).exp() * (omega * x).sin();
    (c * (base + wave - sinusoid_tail(a, omega, x))).max(0.0)
}

/// Half-width beyond which `φ` is below about `1e−32`.
const TAIL_REACH: f64 = 12.0;

/// Composite 20-point Gauss–Legendre with panels short relative to `1/ω`.
fn composite_oscillatory<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, omega: f64) -> f64 {
    let panel = 0.5f64.min(2.0 / omega.abs().max(1e-300));
    let panels = ((hi - lo) / panel).ceil().max(1.0) as usize;
    GaussLegendre::new(20).composite(f, lo, hi, panels)
}

/// `∫_{|y|>a} sin(ωy) φ(x − y) dy` over the part of the tail where
/// `φ(x − y)` is not negligible.
pub(crate) fn sinusoid_tail(a: f64, omega: f64, x: f64) -> f64 {
    let f = |y: f64| (omega * y).sin() * norm_pdf(x - y);
    let mut t = 0.0;
    let (lo, hi) = (a.max(x - TAIL_REACH), x + TAIL_REACH);
    if hi > lo {
        t += composite_oscillatory(&f, lo, hi, omega);
    }
    let (lo, hi) = (x - TAIL_REACH, (-a).min(x + TAIL_REACH));
    if hi > lo {
        t += composite_oscillatory(&f, lo, hi, omega);
    }
    t
}

impl fmt::Display for MixingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        match self {
            MixingSpec::Point { theta } => write!(f, "point:theta={theta}"),
            MixingSpec::Atomic { atoms, weights } => {
                write!(f, "atomic:atoms={},weights={}", join(atoms), join(weights))
            }
            MixingSpec::Gaussian { mean, sd } => write!(f, "gaussian:mean={mean},sd={sd}"),
            MixingSpec::Uniform { lo, hi } => write!(f, "uniform:lo={lo},hi={hi}"),
            MixingSpec::Sinusoid { a, omega } => write!(f, "sinusoid:a={a},omega={omega}"),
        }
    }
}

impl FromStr for MixingSpec {
    type Err = Error;

    /// Parses `kind:key=value,...`, e.g. `sinusoid:a=20,omega=5` or
    /// `atomic:atoms=1;2,weights=0.5;0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut fields = std::collections::BTreeMap::new();
        for kv in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{kv}'")))?;
            fields.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match fields.get(key) {
                Some(v) => parse_f64(v),
                None => default.ok_or_else(|| Error::Parse(format!("spec '{s}' is missing '{key}'"))),
            }
        };
        let list = |key: &str| -> Result<Vec<f64>> {
            fields
                .get(key)
                .ok_or_else(|| Error::Parse(format!("spec '{s}' is missing '{key}'")))?
                .split(';')
                .map(parse_f64)
                .collect()
        };
        let spec = match kind.trim().to_ascii_lowercase().as_str() {
            "point" | "delta" => MixingSpec::Point {
                theta: num("theta", Some(0.0))?,
            },
            "atomic" => {
                let atoms = list("atoms")?;
                let weights = match fields.get("weights") {
                    Some(_) => list("weights")?,
                    None => vec![1.0 / atoms.len() as f64; atoms.len()],
                };
                MixingSpec::Atomic { atoms, weights }
            }
            "gaussian" | "normal" => MixingSpec::Gaussian {
                mean: num("mean", Some(0.0))?,
                sd: num("sd", Some(1.0))?,
            },
            "uniform" => MixingSpec::Uniform {
                lo: num("lo", None)?,
                hi: num("hi", None)?,
            },
            "sinusoid" => MixingSpec::Sinusoid {
                a: num("a", None)?,
                omega: num("omega", None).or_else(|_| num("omega0", None))?,
            },
            other => return Err(Error::Parse(format!("unknown mixing spec kind '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `log Σ_j w_j p_{θ_j}(x)`, max-shifted.
pub fn mixture_log_density(kernel: Kernel, pi: &AtomicDistribution, x: f64) -> Result<f64> {
    if pi.is_empty() {
        return invalid("mixing distribution has no atoms");
    }
    kernel.check_observation(x)?;
    for &a in pi.atoms() {
        kernel.check_theta(a)?;
    }
    let base = kernel.log_base(x);
    Ok(log_sum_exp(
        pi.iter()
            .map(|(a, w)| w.ln() + kernel.log_density_with_base(a, x, base)),
    ))
}

/// Per-observation log-likelihood `(1/n) Σ log p_π(x_i)`.
pub fn mean_log_likelihood(kernel: Kernel, pi: &AtomicDistribution, sample: &Sample) -> Result<f64> {
    let (xs, counts) = sample.distinct();
    let lf = log_factorial_for(kernel, sample);
    let mut total = 0.0;
    for (&x, &c) in xs.iter().zip(&counts) {
        kernel.check_observation(x)?;
        let base = base_with(kernel, x, lf.as_ref());
        let lp = log_sum_exp(
            pi.iter()
                .map(|(a, w)| w.ln() + kernel.log_density_with_base(a, x, base)),
        );
        total += c as f64 * lp;
    }
    Ok(total / sample.n() as f64)
}

pub(crate) fn log_factorial_for(kernel: Kernel, sample: &Sample) -> Option<LogFactorial> {
    (kernel == Kernel::Poisson && sample.x_min() >= 0.0)
        .then(|| LogFactorial::up_to(sample.x_max().max(0.0) as u64))
}

pub(crate) fn base_with(kernel: Kernel, x: f64, lf: Option<&LogFactorial>) -> f64 {
    match (kernel, lf) {
        (Kernel::Poisson, Some(t)) => -1.0 - t.get(x as u64),
        _ => kernel.log_base(x),
    }
}

/// Counter-based generator for replicate `stream` of experiment `seed`.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` i.i.d. draws from `p_π`: first `θ ~ π`, then `x ~ p_θ`. Sorted.
pub fn sample_mixture(kernel: Kernel, spec: &MixingSpec, n: usize, seed: u64) -> Result<Sample> {
    sample_mixture_replicate(kernel, spec, n, seed, 0)
}

pub fn sample_mixture_replicate(
    kernel: Kernel,
    spec: &MixingSpec,
    n: usize,
    seed: u64,
    replicate: u64,
) -> Result<Sample> {
    if n == 0 {
        return invalid("sample size must be at least 1");
    }
    spec.check_kernel(kernel)?;
    let mut rng = replicate_rng(seed, replicate);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = spec.draw(&mut rng);
        let x = match kernel {
            Kernel::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                theta + z
            }
            Kernel::Poisson => {
                let mean = theta.exp();
                if mean <= 0.0 {
                    0.0
                } else {
                    Poisson::new(mean)
                        .map_err(|e| Error::InvalidArgument(format!("poisson mean {mean}: {e}")))?
                        .sample(&mut rng)
                }
            }
            Kernel::Exponential => Exp::new(theta)
                .map_err(|e| Error::InvalidArgument(format!("exponential rate {theta}: {e}")))?
                .sample(&mut rng),
        };
        values.push(x);
    }
    Sample::new(values)
}
