//! Small numeric helpers shared across modules.

use libm::erfc;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `Φ(hi) − Φ(lo)` evaluated on the side that avoids cancellation.
pub fn norm_interval(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        norm_cdf(-lo) - norm_cdf(-hi)
    } else {
        norm_cdf(hi) - norm_cdf(lo)
    }
}

/// Max-shifted `ln Σ exp(v)`. Returns `-inf` for an empty or all-`-inf` input.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.into_iter().map(|v| (v - m).exp()).sum();
    m + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_tails() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        // Φ(−10) ≈ 7.6198530241605e−24
        assert!((norm_cdf(-10.0) / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-10);
        assert!((norm_interval(1.0, 2.0) - (norm_cdf(2.0) - norm_cdf(1.0))).abs() < 1e-15);
    }

    #[test]
    fn lse_matches_direct() {
        let v = [-1.0, 0.5, 2.0];
        let direct = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(v) - direct).abs() < 1e-14);
        assert!(log_sum_exp([-1000.0, -1000.0]).is_finite());
    }
}
