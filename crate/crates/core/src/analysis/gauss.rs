//! Gauss quadrature rules from power moments (Chebyshev algorithm followed
//! by the Golub–Welsch eigenproblem).

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::AtomicDistribution;

pub const MAX_NODES: usize = 20;
/// A recurrence coefficient `β_k` at or below this (after scaling to unit
/// mass on `[−1, 1]`) marks the moment sequence as not positive definite.
pub const PD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub distribution: AtomicDistribution,
    /// Moments `m₁ … m₂ₖ₋₁` matched by construction.
    pub matched_moments: usize,
    /// `max_j |Σ wᵢxᵢʲ − m_j| / Σ wᵢ|xᵢ|ʲ` over `j < 2k`.
    pub max_moment_error: f64,
}

/// Moments of `(x − c)/h` from moments of `x`.
pub(crate) fn shift_scale_moments(m: &[f64], c: f64, h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for j in 0..m.len() {
        // Σ_i C(j,i) m_i (−c)^{j−i}
        let mut binom = 1.0;
        let mut s = 0.0;
        for i in 0..=j {
            s += binom * m[i] * (-c).powi((j - i) as i32);
            binom = binom * (j - i) as f64 / (i + 1) as f64;
        }
        out.push(s / h.powi(j as i32));
    }
    out
}

/// Three-term recurrence coefficients `(α, β)` of the monic orthogonal
/// polynomials of a measure with moments `m₀ … m₂ₖ₋₁`.
fn chebyshev(m: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.len() / 2;
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    if !(m[0] > 0.0) {
        return Err(Error::InvalidMomentSequence { minor: 1, pivot: m[0] });
    }
    alpha[0] = m[1] / m[0];
    beta[0] = m[0];
    let mut prev = vec![0.0; 2 * n];
    let mut cur = m.to_vec();
    for k in 1..n {
        let mut next = vec![0.0; 2 * n];
        for l in k..(2 * n - k) {
            next[l] = cur[l + 1] - alpha[k - 1] * cur[l] - beta[k - 1] * prev[l];
        }
        let pivot = next[k] / cur[k - 1];
        if !(pivot > PD_TOL) {
            return Err(Error::InvalidMomentSequence { minor: k + 1, pivot });
        }
        alpha[k] = next[k + 1] / next[k] - cur[k] / cur[k - 1];
        beta[k] = pivot;
        prev = cur;
        cur = next;
    }
    Ok((alpha, beta))
}

/// k-point Gauss rule matching `moments = [m₀, …, m₂ₖ₋₁]`.
///
/// With a support hint `[lo, hi]` the moments are first transformed to the
/// interval `[−1, 1]`, which keeps the recurrence well scaled; the
/// positive-definiteness test is applied there, relative to unit mass.
pub fn gauss_quadrature_from_moments(moments: &[f64], support_hint: Option<(f64, f64)>) -> Result<QuadratureResult> {
    if moments.len() < 2 || !moments.len().is_multiple_of(2) {
        return invalid(format!("need an even number (>= 2) of moments, got {}", moments.len()));
    }
    let k = moments.len() / 2;
    if k > MAX_NODES {
        return invalid(format!("at most {MAX_NODES} nodes are supported, got {k}"));
    }
    if moments.iter().any(|m| !m.is_finite()) {
        return invalid("moments must be finite");
    }
    let (c, h) = match support_hint {
        Some((lo, hi)) if lo < hi && lo.is_finite() && hi.is_finite() => (0.5 * (lo + hi), 0.5 * (hi - lo)),
        Some((lo, hi)) if lo == hi => (lo, 1.0),
        Some((lo, hi)) => return invalid(format!("support hint [{lo}, {hi}] is not an interval")),
        None => (0.0, 1.0),
    };
    let m0 = moments[0];
    if !(m0 > 0.0) {
        return Err(Error::InvalidMomentSequence { minor: 1, pivot: m0 });
    }
    let scaled: Vec<f64> = shift_scale_moments(moments, c, h).iter().map(|v| v / m0).collect();
    let (nodes, weights) = gauss_rule(&scaled)?;
    let atoms: Vec<f64> = nodes.iter().map(|t| c + h * t).collect();
    let weights: Vec<f64> = weights.iter().map(|w| w * m0).collect();
    let max_moment_error = moment_error(&atoms, &weights, moments);
    let distribution = AtomicDistribution::from_parts(atoms, weights)?;
    Ok(QuadratureResult {
        distribution,
        matched_moments: 2 * k - 1,
        max_moment_error,
    })
}

/// Nodes and weights of the Gauss rule for unit-mass moments.
pub(crate) fn gauss_rule(m: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (alpha, beta) = chebyshev(m)?;
    let k = alpha.len();
    let mut jac = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        jac[(i, i)] = alpha[i];
        if i + 1 < k {
            let b = beta[i + 1].sqrt();
            jac[(i, i + 1)] = b;
            jac[(i + 1, i)] = b;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], beta[0] * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

pub(crate) fn moment_error(atoms: &[f64], weights: &[f64], moments: &[f64]) -> f64 {
    (0..moments.len())
        .map(|j| {
            let (mut s, mut scale) = (0.0, 0.0);
            for (x, w) in atoms.iter().zip(weights) {
                let p = x.powi(j as i32);
                s += w * p;
                scale += w * p.abs();
            }
            (s - moments[j]).abs() / scale.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}
