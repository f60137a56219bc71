//! Finite-atom approximation of Gaussian mixtures by moment matching, and
//! the statistical-degree probe built on it.

use serde::{Deserialize, Serialize};

use super::divergence::{divergences, DEFAULT_QUAD_POINTS};
use super::gauss::{gauss_rule, moment_error, MAX_NODES};
use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;
use crate::measures::{sinusoid_convolution, AtomicDistribution, MixingSpec};
use crate::quadrature::GaussLegendre;
use crate::special::{norm_interval, norm_pdf};

/// A mixing spec conditioned on `[−a, a]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Conditioned {
    Atomic(AtomicDistribution),
    Gaussian { mean: f64, sd: f64, lo: f64, hi: f64, mass: f64 },
    Uniform { lo: f64, hi: f64 },
    Sinusoid { a: f64, omega: f64 },
}

impl Conditioned {
    pub fn new(spec: &MixingSpec, a: f64) -> Result<Self> {
        spec.validate()?;
        if !(a > 0.0 && a.is_finite()) {
            return invalid(format!("truncation level must be positive, got {a}"));
        }
        let empty = || Error::UnsupportedSpec(format!("{spec} has no mass on [-{a}, {a}]"));
        Ok(match spec {
            MixingSpec::Point { theta } => {
                if theta.abs() > a {
                    return Err(empty());
                }
                Conditioned::Atomic(AtomicDistribution::point_mass(*theta))
            }
            MixingSpec::Atomic { atoms, weights } => {
                let (atoms, weights): (Vec<f64>, Vec<f64>) = atoms
                    .iter()
                    .zip(weights)
                    .filter(|(x, w)| x.abs() <= a && **w > 0.0)
                    .map(|(x, w)| (*x, *w))
                    .unzip();
                if atoms.is_empty() {
                    return Err(empty());
                }
                Conditioned::Atomic(AtomicDistribution::from_parts(atoms, weights)?)
            }
            MixingSpec::Gaussian { mean, sd } => {
                let mass = norm_interval((-a - mean) / sd, (a - mean) / sd);
                if !(mass > 0.0) {
                    return Err(empty());
                }
                Conditioned::Gaussian { mean: *mean, sd: *sd, lo: -a, hi: a, mass }
            }
            MixingSpec::Uniform { lo, hi } => {
                let (lo, hi) = (lo.max(-a), hi.min(a));
                if !(lo < hi) {
                    return Err(empty());
                }
                Conditioned::Uniform { lo, hi }
            }
            MixingSpec::Sinusoid { a: s, omega } => Conditioned::Sinusoid { a: s.min(a), omega: *omega },
        })
    }

    /// Support interval of the conditioned distribution.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Conditioned::Atomic(d) => (d.atoms()[0], d.atoms()[d.len() - 1]),
            Conditioned::Gaussian { lo, hi, .. } | Conditioned::Uniform { lo, hi } => (*lo, *hi),
            Conditioned::Sinusoid { a, .. } => (-a, *a),
        }
    }

    /// `(π̃ ∗ φ)(x)`.
    pub fn mixture_density(&self, x: f64) -> f64 {
        match self {
            Conditioned::Atomic(d) => d.iter().map(|(t, w)| w * norm_pdf(x - t)).sum(),
            Conditioned::Gaussian { mean, sd, lo, hi, mass } => {
                // joint Gaussian in (θ, x); θ | x is normal with mean c, sd s
                let v = sd * sd;
                let total = (1.0 + v).sqrt();
                let c = (mean + v * x) / (1.0 + v);
                let s = (v / (1.0 + v)).sqrt();
                norm_pdf((x - mean) / total) / total * norm_interval((lo - c) / s, (hi - c) / s) / mass
            }
            Conditioned::Uniform { lo, hi } => norm_interval(x - hi, x - lo) / (hi - lo),
            Conditioned::Sinusoid { a, omega } => sinusoid_convolution(*a, *omega, x),
        }
    }

    /// Density of the conditioned mixing distribution (continuous cases).
    fn density(&self, t: f64) -> f64 {
        match self {
            Conditioned::Atomic(_) => 0.0,
            Conditioned::Gaussian { mean, sd, mass, .. } => norm_pdf((t - mean) / sd) / (sd * mass),
            Conditioned::Uniform { lo, hi } => 1.0 / (hi - lo),
            Conditioned::Sinusoid { a, omega } => (1.0 + (omega * t).sin()) / (2.0 * a),
        }
    }

    /// Moments `E[((θ − c)/h)^j]`, `j < count`.
    pub fn moments_about(&self, c: f64, h: f64, count: usize) -> Vec<f64> {
        if let Conditioned::Atomic(d) = self {
            return (0..count)
                .map(|j| d.iter().map(|(t, w)| w * ((t - c) / h).powi(j as i32)).sum())
                .collect();
        }
        let (lo, hi) = self.support();
        let freq = match self {
            Conditioned::Sinusoid { omega, .. } => *omega,
            _ => 1.0,
        };
        let panels = (((hi - lo) * freq.max(1.0)).ceil() as usize).max(32);
        let rule = GaussLegendre::new(24);
        let step = (hi - lo) / panels as f64;
        let mut out = vec![0.0; count];
        for p in 0..panels {
            let a = lo + step * p as f64;
            let mut acc = vec![0.0; count];
            for (t, w) in rule.mapped(a, a + step) {
                let u = (t - c) / h;
                let mut pw = w * self.density(t);
                for m in acc.iter_mut() {
                    *m += pw;
                    pw *= u;
                }
            }
            for (o, m) in out.iter_mut().zip(&acc) {
                *o += m;
            }
        }
        out
    }

    /// Raw power moments `m₀ … m_{count−1}`.
    pub fn moments(&self, count: usize) -> Vec<f64> {
        self.moments_about(0.0, 1.0, count)
    }
}

/// TV bound `2e^{−a²/2} + 2e^{a²/4}(ea²/(2k))^k` for the k-atomic
/// approximation of a 1-subgaussian mixing distribution.
pub fn tv_bound(a: f64, k: usize) -> f64 {
    let k = k as f64;
    2.0 * (-a * a / 2.0).exp() + 2.0 * (a * a / 4.0).exp() * (std::f64::consts::E * a * a / (2.0 * k)).powf(k)
}

/// χ² bound `4e^{a²/2}(ea²/(2k))^{2k}` between the k-point quadrature
/// mixture and the conditioned mixture.
pub fn chi2_bound(a: f64, k: usize) -> f64 {
    let kf = k as f64;
    4.0 * (a * a / 2.0).exp() * (std::f64::consts::E * a * a / (2.0 * kf)).powf(2.0 * kf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KAtomicApproximation {
    pub distribution: AtomicDistribution,
    pub a: f64,
    pub k: usize,
    pub tv_bound: f64,
    /// `TV(π ∗ φ, π′ ∗ φ)`.
    pub measured_tv: f64,
    /// `H²(π ∗ φ, π′ ∗ φ)`.
    pub measured_h2: f64,
    /// `χ²(π′ ∗ φ ‖ π̃ ∗ φ)`, `π̃` the conditioned source.
    pub chi2_to_conditioned: f64,
    pub chi2_bound: f64,
    /// Relative error of the matched moments of `π̃`.
    pub max_moment_error: f64,
}

/// Default quadrature window: the spec's support widened by 10, or
/// `mean ± (12 sd + 10)` for a Gaussian spec.
pub fn default_interval(spec: &MixingSpec) -> (f64, f64) {
    match spec {
        MixingSpec::Gaussian { mean, sd } => (mean - 12.0 * sd - 10.0, mean + 12.0 * sd + 10.0),
        _ => {
            let (lo, hi) = spec.support();
            (lo - 10.0, hi + 10.0)
        }
    }
}

/// Conditions `spec` on `[−a, a]` and replaces it by its k-point Gauss
/// quadrature (or by itself when it already has at most `k` atoms).
pub fn k_atomic_approximation(spec: &MixingSpec, a: f64, k: usize) -> Result<KAtomicApproximation> {
    if k == 0 || k > MAX_NODES {
        return invalid(format!("k must be in 1..={MAX_NODES}, got {k}"));
    }
    let cond = Conditioned::new(spec, a)?;
    let (distribution, max_moment_error) = match &cond {
        Conditioned::Atomic(d) if d.len() <= k => (d.clone(), 0.0),
        _ => {
            let (lo, hi) = cond.support();
            let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            let scaled = cond.moments_about(c, h, 2 * k);
            let (nodes, weights) = gauss_rule(&scaled)?;
            let atoms: Vec<f64> = nodes.iter().map(|t| c + h * t).collect();
            let err = moment_error(&nodes, &weights, &scaled);
            (AtomicDistribution::from_parts(atoms, weights)?, err)
        }
    };
    let interval = default_interval(spec);
    let approx = |x: f64| -> f64 { distribution.iter().map(|(t, w)| w * norm_pdf(x - t)).sum() };
    let to_truth = divergences(|x| spec.gaussian_mixture_density(x), approx, interval, DEFAULT_QUAD_POINTS)?;
    let to_cond = divergences(approx, |x| cond.mixture_density(x), interval, DEFAULT_QUAD_POINTS)?;
    Ok(KAtomicApproximation {
        a,
        k,
        tv_bound: tv_bound(a, k),
        measured_tv: to_truth.tv,
        measured_h2: to_truth.h2,
        chi2_to_conditioned: to_cond.chi2,
        chi2_bound: chi2_bound(a, k),
        max_moment_error,
        distribution,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticalDegree {
    /// Smallest qualifying k, or `k_max + 1` when none qualifies.
    pub degree: usize,
    pub n: u64,
    pub a: f64,
    /// `1/(3√n)`.
    pub threshold: f64,
    /// `H(π ∗ φ, π′_k ∗ φ)` for each k tried, from 1.
    pub hellinger: Vec<f64>,
    pub note: String,
}

pub const DEGREE_NOTE: &str =
    "lower-bound probe: distance to k-atomic mixtures is measured for this single mixing distribution, not the supremum over its class";

/// Smallest `k ≤ k_max` whose k-atomic approximation (truncation level
/// `a = √(2 ln(6√n))`) is within Hellinger distance `1/(3√n)` of `π ∗ φ`.
pub fn statistical_degree(spec: &MixingSpec, kernel: Kernel, n: u64, k_max: usize) -> Result<StatisticalDegree> {
    if kernel != Kernel::Gaussian {
        return invalid("the statistical degree is implemented for the gaussian kernel only");
    }
    if n == 0 {
        return invalid("n must be positive");
    }
    let k_max = k_max.min(MAX_NODES);
    let root = (n as f64).sqrt();
    let a = (2.0 * (6.0 * root).ln()).sqrt();
    let threshold = 1.0 / (3.0 * root);
    let mut hellinger = Vec::new();
    for k in 1..=k_max {
        let approx = k_atomic_approximation(spec, a, k)?;
        let h = approx.measured_h2.sqrt();
        hellinger.push(h);
        if h <= threshold {
            return Ok(StatisticalDegree { degree: k, n, a, threshold, hellinger, note: DEGREE_NOTE.into() });
        }
    }
    Ok(StatisticalDegree { degree: k_max + 1, n, a, threshold, hellinger, note: DEGREE_NOTE.into() })
}
