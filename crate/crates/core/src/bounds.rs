//! Deterministic bounds on the number of NPMLE atoms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::Kernel;
use crate::measures::Sample;

/// Number of points in the log grid used by [`crit_bound_optimized`].
pub const DELTA_GRID: usize = 64;

/// Every intermediate quantity of the critical-point bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kernel: Kernel,
    pub x_min: f64,
    pub x_max: f64,
    pub x0: f64,
    pub a: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub r: f64,
    pub delta: f64,
    pub tau: f64,
    pub kappa_max: f64,
    pub abs_theta_max: f64,
    pub abs_x_max: f64,
    pub n1: f64,
    pub denominator: f64,
    pub bound: f64,
    pub bound_floor: f64,
}

/// Bound on the number of critical points of the gradient function for a
/// natural exponential family with data in `[x_min, x_max]`:
///
/// `N₁ = 2(a + |μ(0)| + |x₀|)(|θ|_max + 2δ) + κ_max + ln((|x|_max + 1/δ)/τ)`
/// divided by `ln((2r + 2δ)/(2r + δ))`.
pub fn crit_bound(kernel: Kernel, x_min: f64, x_max: f64, delta: f64) -> Result<BoundReport> {
    if !kernel.is_natural() {
        return invalid(format!(
            "the {kernel} kernel is not in natural-parameter form; use its dedicated bound"
        ));
    }
    if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
        return invalid(format!("need x_min < x_max, got [{x_min}, {x_max}]"));
    }
    let mu0 = kernel.mean(0.0);
    if !(x_min <= mu0 && mu0 <= x_max) {
        return invalid(format!("need x_min <= mu(0) <= x_max, got mu(0) = {mu0} and [{x_min}, {x_max}]"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return invalid(format!("need delta > 0, got {delta}"));
    }
    let theta_min = kernel.mean_inverse(x_min);
    let theta_max = kernel.mean_inverse(x_max);
    if !theta_min.is_finite() || !theta_max.is_finite() {
        return invalid(format!(
            "need a finite mean-map inverse on the data range, got [{theta_min}, {theta_max}]"
        ));
    }
    let (lower, upper) = kernel.theta_domain();
    let room = (theta_min - lower).min(upper - theta_max);
    if !(delta < room / 5.0) {
        return invalid(format!("need delta < min(theta_min - lower, upper - theta_max)/5 = {}", room / 5.0));
    }
    let (t_lo, t_hi) = (theta_min - 3.0 * delta, theta_max + 3.0 * delta);
    if !(t_lo > lower && t_hi < upper) {
        return invalid("need theta_min - 3 delta and theta_max + 3 delta inside the domain");
    }
    let x0 = 0.5 * (x_min + x_max);
    let a = 0.5 * (x_max - x_min);
    let r = 0.5 * (theta_max - theta_min);
    let tau = (kernel.mean(theta_max + delta) - x_max).max(x_min - kernel.mean(theta_min - delta));
    if !(tau > 0.0) {
        return invalid(format!("need tau > 0, got {tau}"));
    }
    let kappa = |t: f64| kernel.log_partition(t);
    let kappa_max = kappa(t_lo).max(kappa(t_hi));
    let abs_theta_max = theta_min.abs().max(theta_max.abs());
    let abs_x_max = x_min.abs().max(x_max.abs());
    let n1 = 2.0 * (a + mu0.abs() + x0.abs()) * (abs_theta_max + 2.0 * delta)
        + kappa_max
        + ((abs_x_max + 1.0 / delta) / tau).ln();
    let denominator = ((2.0 * r + 2.0 * delta) / (2.0 * r + delta)).ln();
    let bound = n1 / denominator;
    Ok(BoundReport {
        kernel,
        x_min,
        x_max,
        x0,
        a,
        theta_min,
        theta_max,
        r,
        delta,
        tau,
        kappa_max,
        abs_theta_max,
        abs_x_max,
        n1,
        denominator,
        bound,
        bound_floor: bound.floor(),
    })
}

/// [`crit_bound`] minimized over `δ` on a log grid spanning `[r/1000, 10r]`;
/// grid points violating a precondition are skipped.
pub fn crit_bound_optimized(kernel: Kernel, x_min: f64, x_max: f64) -> Result<BoundReport> {
    let r = 0.5 * (kernel.mean_inverse(x_max) - kernel.mean_inverse(x_min));
    if !(r > 0.0 && r.is_finite()) {
        return invalid(format!("degenerate parameter range r = {r}"));
    }
    let (lo, hi) = ((r * 1e-3).ln(), (r * 10.0).ln());
    let mut best: Option<BoundReport> = None;
    let mut last_err = None;
    for i in 0..DELTA_GRID {
        let delta = (lo + (hi - lo) * i as f64 / (DELTA_GRID - 1) as f64).exp();
        match crit_bound(kernel, x_min, x_max, delta) {
            Ok(rep) => {
                if best.as_ref().is_none_or(|b| rep.bound < b.bound) {
                    best = Some(rep);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => invalid("no admissible delta"),
    }
}

/// Gaussian report after re-centering the data at `x₀`, with `δ = r`.
pub fn gaussian_bound_report(sample: &Sample) -> Result<Option<BoundReport>> {
    sample.validate_for(Kernel::Gaussian)?;
    if sample.x_min() == sample.x_max() {
        return Ok(None);
    }
    let x0 = 0.5 * (sample.x_min() + sample.x_max());
    let (lo, hi) = (sample.x_min() - x0, sample.x_max() - x0);
    crit_bound(Kernel::Gaussian, lo, hi, 0.5 * (hi - lo)).map(Some)
}

/// Floored Gaussian atom-count bound; at least 1.
pub fn gaussian_atom_bound(sample: &Sample) -> Result<f64> {
    Ok(match gaussian_bound_report(sample)? {
        Some(rep) => rep.bound_floor.max(1.0),
        None => 1.0,
    })
}

/// Poisson atom-count bound: the gradient's numerator is a polynomial in
/// `e^θ` of degree at most `x_max`.
pub fn poisson_atom_bound(sample: &Sample) -> Result<u64> {
    sample.validate_for(Kernel::Poisson)?;
    Ok(sample.x_max() as u64)
}

/// Zero-count bound for a holomorphic `f` on the disk of radius `r₁`: the
/// number of zeros in the closed disk of radius `r` is at most
/// `ln(M(r₁)/M(r₂)) / ln((r₁² + r₂r)/(r₁(r₂ + r)))`.
pub fn blaschke_zero_bound(r: f64, r2: f64, r1: f64, log_modulus_ratio: f64) -> Result<f64> {
    if !(0.0 < r && r < r2 && r2 < r1 && r1.is_finite()) {
        return invalid(format!("need 0 < r < r2 < r1, got r={r}, r2={r2}, r1={r1}"));
    }
    if !(log_modulus_ratio >= 0.0) || log_modulus_ratio.is_infinite() {
        return invalid(format!("need a finite log modulus ratio >= 0, got {log_modulus_ratio}"));
    }
    let denominator = ((r1 * r1 + r2 * r) / (r1 * (r2 + r))).ln();
    Ok(log_modulus_ratio / denominator)
}

/// Maximum of `|f|` over `samples` equally spaced points of the circle of
/// the given radius, starting at angle 0. An even count includes angle π.
pub fn max_modulus<F: Fn(Complex64) -> Complex64>(f: F, radius: f64, samples: usize) -> f64 {
    (0..samples.max(1))
        .map(|j| {
            let phi = std::f64::consts::TAU * j as f64 / samples as f64;
            f(Complex64::from_polar(radius, phi)).norm()
        })
        .fold(0.0, f64::max)
}

/// The degree-`n` extremal function `((r − z)/(1 − rz))ⁿ`.
pub fn blaschke_power(r: f64, n: u32) -> impl Fn(Complex64) -> Complex64 {
    move |z| ((Complex64::from(r) - z) / (Complex64::from(1.0) - z * r)).powu(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialBoundReport {
    /// `1/x_max` and `1/x_min`: the atoms of the NPMLE lie in `[a, b]`.
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub r2: f64,
    pub r1: f64,
    /// Upper bound on `ln M_f(r₁)`; `M_f(r₂) ≥ 1`.
    pub log_m1: f64,
    pub bound: f64,
}

/// Exponential-mixture bound. The gradient numerator's derivative
/// `F′(θ) = Σ wᵢ e^{−θxᵢ}(1 − θxᵢ)` is recentred as `f(z) = F′(z + c)` with
/// `c = (a+b)/2`, so its relevant zeros lie in the disk of radius `r`.
/// `|f(−r₂)| = F′(0) = 1` and, for any weights,
/// `|f| ≤ maxᵢ e^{(r₁−c)xᵢ}(1 + (c+r₁)xᵢ)` on `|z| = r₁`.
/// Uses `r₁ = 2r` when that exceeds `r₂` and `r₁ = b` otherwise.
pub fn exponential_bound_report(sample: &Sample) -> Result<Option<ExponentialBoundReport>> {
    sample.validate_for(Kernel::Exponential)?;
    if sample.x_min() == sample.x_max() {
        return Ok(None);
    }
    let a = 1.0 / sample.x_max();
    let b = 1.0 / sample.x_min();
    let r = 0.5 * (b - a);
    let r2 = 0.5 * (a + b);
    let c = r2;
    let r1 = if 2.0 * r > r2 { 2.0 * r } else { b };
    let (xs, _) = sample.distinct();
    let log_m1 = xs
        .iter()
        .map(|&x| (r1 - c) * x + (1.0 + (c + r1) * x).ln())
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let bound = blaschke_zero_bound(r, r2, r1, log_m1)?;
    Ok(Some(ExponentialBoundReport { a, b, r, r2, r1, log_m1, bound }))
}

/// Exponential-mixture atom bound (real-valued); 1 for degenerate data.
pub fn exponential_atom_bound(sample: &Sample) -> Result<f64> {
    Ok(exponential_bound_report(sample)?.map_or(1.0, |rep| rep.bound.max(1.0)))
}

/// Margin by which `min κ(2θ)/κ(θ)` must exceed 2 for eligibility.
pub const KAPPA_GROWTH_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaGrowth {
    pub k0: f64,
    pub k1: f64,
    pub eligible: bool,
}

/// Ranges of `κ(2θ)/κ(θ)` over `grid` points of `[θ₀, θ_hi]`.
///
/// For the exponential kernel the cumulant is that of its unit-rate base
/// density, `κ(θ) = −ln(1 − θ)`, which needs `2θ_hi < 1`.
pub fn kappa_growth_check(kernel: Kernel, theta0: f64, theta_hi: f64, grid: usize) -> Result<KappaGrowth> {
    match kernel {
        Kernel::Exponential => {
            if !(2.0 * theta_hi < 1.0) {
                return invalid(format!("need 2 theta_hi < 1 for the exponential base cumulant, got {theta_hi}"));
            }
            kappa_growth_with(|t| -(-t).ln_1p(), theta0, theta_hi, grid)
        }
        _ => kappa_growth_with(|t| kernel.log_partition(t) - kernel.log_partition(0.0), theta0, theta_hi, grid),
    }
}

/// [`kappa_growth_check`] for an arbitrary cumulant function.
pub fn kappa_growth_with<F: Fn(f64) -> f64>(kappa: F, theta0: f64, theta_hi: f64, grid: usize) -> Result<KappaGrowth> {
    if !(theta0 > 0.0 && theta0 <= theta_hi && theta_hi.is_finite()) {
        return invalid(format!("need 0 < theta0 <= theta_hi, got [{theta0}, {theta_hi}]"));
    }
    if grid < 2 && theta0 < theta_hi {
        return invalid("grid must have at least 2 points");
    }
    let mut k0 = f64::INFINITY;
    let mut k1 = f64::NEG_INFINITY;
    let m = grid.max(1);
    for i in 0..m {
        let t = if m == 1 {
            theta0
        } else {
            theta0 + (theta_hi - theta0) * i as f64 / (m - 1) as f64
        };
        let k = kappa(t);
        if k == 0.0 || !k.is_finite() {
            return invalid(format!("kappa({t}) = {k}; choose a larger theta0"));
        }
        let ratio = kappa(2.0 * t) / k;
        k0 = k0.min(ratio);
        k1 = k1.max(ratio);
    }
    Ok(KappaGrowth {
        k0,
        k1,
        eligible: k0 > 2.0 + KAPPA_GROWTH_MARGIN,
    })
}
