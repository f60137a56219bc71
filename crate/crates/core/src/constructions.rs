//! Mixing densities whose Gaussian mixtures have many modes: the sinusoid
//! construction and its decomposition into strongly log-concave pieces.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analysis::{count_density_modes, CriticalPointReport};
use crate::error::{invalid, Error, Result};
use crate::measures::sinusoid_convolution;
use crate::quadrature::GaussLegendre;
use crate::special::{log_sum_exp, norm_cdf, norm_pdf, LN_SQRT_2PI};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidConstruction {
    pub a: f64,
    pub omega0: f64,
    /// Normalizer of `c(1 + sin(ω₀x))` on `[−a, a]`.
    pub c: f64,
    /// `⌊ω₀a/(2π)⌋`.
    pub guaranteed_modes: u64,
    /// `|ĥ(ω₀)| = e^{−ω₀²/2}`.
    pub condition_lhs: f64,
    /// `2(H(−a/2) + 1 − H(a/2)) = 4Φ(−a/2)`.
    pub condition_rhs: f64,
}

impl SinusoidConstruction {
    /// `(π ∗ φ)(x)`.
    pub fn density(&self, x: f64) -> f64 {
        sinusoid_convolution(self.a, self.omega0, x)
    }
}

/// Builds the sinusoid construction with Gaussian `h`; rejected unless
/// `e^{−ω₀²/2} > 4Φ(−a/2)`.
pub fn build_sinusoid(a: f64, omega0: f64) -> Result<SinusoidConstruction> {
    if !(a > 0.0 && omega0 > 0.0 && a.is_finite() && omega0.is_finite()) {
        return invalid(format!("need a > 0 and omega0 > 0, got a={a}, omega0={omega0}"));
    }
    let lhs = (-0.5 * omega0 * omega0).exp();
    let rhs = 4.0 * norm_cdf(-0.5 * a);
    if !(lhs > rhs) {
        return Err(Error::ConstructionRejected { lhs, rhs });
    }
    let panels = ((2.0 * a * omega0.max(1.0)).ceil() as usize).max(8);
    let mass = GaussLegendre::new(20).composite(|x| 1.0 + (omega0 * x).sin(), -a, a, panels);
    Ok(SinusoidConstruction {
        a,
        omega0,
        c: 1.0 / mass,
        guaranteed_modes: (omega0 * a / (2.0 * PI)).floor() as u64,
        condition_lhs: lhs,
        condition_rhs: rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeVerification {
    pub counted: usize,
    pub guaranteed: u64,
    pub satisfied: bool,
    pub report: CriticalPointReport,
}

/// Counts modes of `π ∗ φ` on `[−a/2, a/2]`.
pub fn verify_sinusoid_modes(cons: &SinusoidConstruction, grid_size: usize) -> Result<ModeVerification> {
    let half = 0.5 * cons.a;
    let report = count_density_modes(|x| cons.density(x), (-half, half), grid_size)?;
    Ok(ModeVerification {
        counted: report.count,
        guaranteed: cons.guaranteed_modes,
        satisfied: report.count as u64 >= cons.guaranteed_modes,
        report,
    })
}

/// Truncation error `Δ(x)` of the construction against the pointwise bound
/// `2c(H(x−a) + 1 − H(x+a))`, on a grid over `[−a/2, a/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub points: usize,
    /// `max (Δ(x) − bound(x))`; nonpositive when the bound holds.
    pub max_excess: f64,
    pub holds: bool,
}

/// `Δ = π₀ ∗ φ − π₁ ∗ φ` with `π₀ = c(1 + sin ω₀·)` on the whole line and
/// `π₁` its restriction to `[−a, a]`.
pub fn truncation_check(cons: &SinusoidConstruction, points: usize, slack: f64) -> Result<TruncationCheck> {
    if points < 2 {
        return invalid("need at least 2 grid points");
    }
    let (a, w, c) = (cons.a, cons.omega0, cons.c);
    let mut max_excess = f64::NEG_INFINITY;
    for g in 0..points {
        let x = -0.5 * a + a * g as f64 / (points - 1) as f64;
        let untruncated = c * (1.0 + (-0.5 * w * w).exp() * (w * x).sin());
        let delta = untruncated - cons.density(x);
        let bound = 2.0 * c * (norm_cdf(x - a) + norm_cdf(-x - a));
        max_excess = max_excess.max(delta - bound);
    }
    Ok(TruncationCheck { points, max_excess, holds: max_excess <= slack })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCrossingCheck {
    pub maxima_checked: usize,
    pub minima_checked: usize,
    /// `π ∗ φ > c` at every lattice maximum of `c(1 + e^{−ω₀²/2} sin ω₀x)`.
    pub maxima_above: bool,
    /// `π ∗ φ < c(1 − e^{−ω₀²/2})` at every lattice minimum, up to rounding.
    pub minima_below: bool,
}

/// Evaluates the construction at the extrema lattice `ω₀x = ±π/2 + 2πm`
/// inside `[−a/2, a/2]`.
pub fn level_crossing_check(cons: &SinusoidConstruction) -> LevelCrossingCheck {
    let (a, w, c) = (cons.a, cons.omega0, cons.c);
    let amp = (-0.5 * w * w).exp();
    let half = 0.5 * a;
    let period = 2.0 * PI / w;
    let mut out = LevelCrossingCheck { maxima_checked: 0, minima_checked: 0, maxima_above: true, minima_below: true };
    for (phase, is_max) in [(0.5 * PI / w, true), (-0.5 * PI / w, false)] {
        let m_lo = ((-half - phase) / period).ceil() as i64;
        let m_hi = ((half - phase) / period).floor() as i64;
        for m in m_lo..=m_hi {
            let x = phase + period * m as f64;
            let v = cons.density(x);
            if is_max {
                out.maxima_checked += 1;
                out.maxima_above &= v > c;
            } else {
                out.minima_checked += 1;
                out.minima_below &= v <= c * (1.0 - amp) * (1.0 + 1e-15);
            }
        }
    }
    out
}

/// Length of each piece's interval (`4a` of them tile `[−a, a]`).
pub const PIECE_WIDTH: f64 = 0.5;
/// Gauss–Legendre nodes per piece.
const PIECE_NODES: usize = 32;
/// Step of the central second difference.
const SECOND_DIFF_STEP: f64 = 1e-4;
/// Required `−(ln fᵢ)″` margin.
pub const LOG_CONCAVITY_MARGIN: f64 = 0.7;
/// Allowed pointwise recombination error.
pub const RECOMBINATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    /// `αᵢ = π(Iᵢ)`.
    pub weight: f64,
    /// `min −(ln fᵢ)″` over the verification grid.
    pub min_neg_second_derivative: f64,
    /// `|∫fᵢ − 1|`.
    pub normalization_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogConcaveDecomposition {
    pub a: f64,
    pub omega0: f64,
    pub pieces: Vec<Piece>,
    pub dropped: usize,
    pub min_margin: f64,
    pub max_recombination_error: f64,
    pub modes: usize,
    pub required_modes: u64,
    pub verified: bool,
}

struct PieceRule {
    mid: f64,
    /// `(yⱼ − mid, ln(wⱼ c(1 + sin ω₀yⱼ)/αᵢ))`
    nodes: Vec<(f64, f64)>,
}

impl PieceRule {
    /// `G(u)` with `ln fᵢ(mid + u) = −u²/2 + G(u)`.
    fn g(&self, u: f64) -> f64 {
        log_sum_exp(self.nodes.iter().map(|&(d, l)| l + u * d - 0.5 * d * d)) - LN_SQRT_2PI
    }

    fn ln_f(&self, x: f64) -> f64 {
        let u = x - self.mid;
        -0.5 * u * u + self.g(u)
    }
}

/// Splits the sinusoid construction with `ω₀ = a/4` into `k = 4a` pieces
/// `fᵢ = πᵢ ∗ φ` over consecutive intervals of length ½ and verifies their strong
/// log-concavity, their recombination into `π ∗ φ`, and the mode count of
/// the sum. `grid_size` sets both the per-piece verification grid (over
/// `[−a−3, a+3]`) and the mode-counting grid.
pub fn logconcave_decomposition(a: f64, grid_size: usize) -> Result<LogConcaveDecomposition> {
    let k = 4.0 * a;
    if !(k >= 1.0 && k.fract() == 0.0 && k.is_finite()) {
        return invalid(format!("4a must be a positive integer, got a={a}"));
    }
    if grid_size < 16 {
        return invalid("grid_size must be at least 16");
    }
    let k = k as usize;
    let omega = a / 4.0;
    let cons = build_sinusoid(a, omega)?;
    let c = 0.5 / a;
    let rule = GaussLegendre::new(PIECE_NODES);
    let mut rules = Vec::with_capacity(k);
    let mut pieces = Vec::with_capacity(k);
    let mut dropped = 0;
    for i in 0..k {
        let lo = -a + PIECE_WIDTH * i as f64;
        let hi = lo + PIECE_WIDTH;
        let alpha = c * ((hi - lo) - ((omega * hi).cos() - (omega * lo).cos()) / omega);
        if !(alpha > 0.0) {
            dropped += 1;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let mut mass = 0.0;
        let nodes: Vec<(f64, f64)> = rule
            .mapped(lo, hi)
            .map(|(y, w)| {
                let dens = w * c * (1.0 + (omega * y).sin());
                mass += dens;
                (y - mid, (dens / alpha).ln())
            })
            .collect();
        rules.push((alpha, PieceRule { mid, nodes }));
        pieces.push(Piece {
            lo,
            hi,
            weight: alpha,
            min_neg_second_derivative: f64::INFINITY,
            normalization_error: (mass / alpha - 1.0).abs(),
        });
    }

    let (glo, ghi) = (-a - 3.0, a + 3.0);
    let grid: Vec<f64> = (0..grid_size)
        .map(|g| glo + (ghi - glo) * g as f64 / (grid_size - 1) as f64)
        .collect();
    let h = SECOND_DIFF_STEP;
    for ((_, pr), piece) in rules.iter().zip(pieces.iter_mut()) {
        let mut m = f64::INFINITY;
        for &x in &grid {
            let u = x - pr.mid;
            let g2 = (pr.g(u + h) - 2.0 * pr.g(u) + pr.g(u - h)) / (h * h);
            m = m.min(1.0 - g2);
        }
        piece.min_neg_second_derivative = m;
    }

    let sum = |x: f64| -> f64 { rules.iter().map(|(alpha, pr)| alpha * pr.ln_f(x).exp()).sum() };
    let max_recombination_error = grid
        .iter()
        .map(|&x| (sum(x) - cons.density(x)).abs())
        .fold(0.0, f64::max);
    let half = 0.5 * a;
    let modes = count_density_modes(sum, (-half, half), grid_size)?.count;
    let required_modes = (a * a / (8.0 * PI)).floor() as u64;
    let min_margin = pieces.iter().map(|p| p.min_neg_second_derivative).fold(f64::INFINITY, f64::min);
    let verified = min_margin >= LOG_CONCAVITY_MARGIN
        && max_recombination_error <= RECOMBINATION_TOL
        && pieces.iter().all(|p| p.normalization_error <= 1e-8)
        && modes as u64 >= required_modes;
    Ok(LogConcaveDecomposition {
        a,
        omega0: omega,
        pieces,
        dropped,
        min_margin,
        max_recombination_error,
        modes,
        required_modes,
        verified,
    })
}

/// Density at `x` of the piece of [`logconcave_decomposition`] whose
/// interval starts at `lo`.
pub fn piece_density(a: f64, lo: f64, x: f64) -> f64 {
    let omega = a / 4.0;
    let c = 0.5 / a;
    let hi = lo + PIECE_WIDTH;
    let alpha = c * ((hi - lo) - ((omega * hi).cos() - (omega * lo).cos()) / omega);
    GaussLegendre::new(PIECE_NODES).integrate(|y| c * (1.0 + (omega * y).sin()) * norm_pdf(x - y), lo, hi) / alpha
}
