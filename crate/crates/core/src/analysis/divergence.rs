//! Hellinger, total-variation and χ² divergences between densities on the
//! real line, by composite Gauss–Legendre quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::GaussLegendre;

const NODES_PER_PANEL: usize = 20;
pub const DEFAULT_QUAD_POINTS: usize = 8000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergences {
    /// `½∫(√p − √q)²`, in `[0, 1]`.
    pub h2: f64,
    /// `½∫|p − q|`, in `[0, 1]`.
    pub tv: f64,
    /// `∫(p − q)²/q`; `+∞` when `chi2_infinite`.
    pub chi2: f64,
    /// `q` vanishes somewhere `p` does not.
    pub chi2_infinite: bool,
}

impl Divergences {
    /// `H² ≤ TV ≤ √(χ²/2)`, up to `slack`.
    pub fn ordered(&self, slack: f64) -> bool {
        self.h2 <= self.tv + slack && (self.chi2_infinite || self.tv <= (self.chi2 / 2.0).sqrt() + slack)
    }
}

/// Divergences of `p` from `q` over `interval`, using about `quad_points`
/// nodes split into equal panels that are summed in a fixed order.
pub fn divergences<P, Q>(p: P, q: Q, interval: (f64, f64), quad_points: usize) -> Result<Divergences>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    let (lo, hi) = interval;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return invalid(format!("quadrature interval [{lo}, {hi}] is not finite and nondegenerate"));
    }
    let panels = (quad_points / NODES_PER_PANEL).max(1);
    let rule = GaussLegendre::new(NODES_PER_PANEL);
    let width = (hi - lo) / panels as f64;
    let (mut h2, mut tv, mut chi2) = (0.0, 0.0, 0.0);
    let mut infinite = false;
    for k in 0..panels {
        let a = lo + width * k as f64;
        let (mut ph, mut pt, mut pc) = (0.0, 0.0, 0.0);
        for (x, w) in rule.mapped(a, a + width) {
            let (pv, qv) = (p(x), q(x));
            if pv < 0.0 || qv < 0.0 || pv.is_nan() || qv.is_nan() {
                return invalid(format!("densities must be nonnegative, got p({x}) = {pv}, q({x}) = {qv}"));
            }
            let d = pv - qv;
            let s = pv.sqrt() + qv.sqrt();
            if s > 0.0 {
                ph += w * (d / s) * (d / s);
            }
            pt += w * d.abs();
            if qv > 0.0 {
                pc += w * d * d / qv;
            } else if pv > 0.0 {
                infinite = true;
            }
        }
        h2 += ph;
        tv += pt;
        chi2 += pc;
    }
    Ok(Divergences {
        h2: (0.5 * h2).clamp(0.0, 1.0),
        tv: (0.5 * tv).clamp(0.0, 1.0),
        chi2: if infinite { f64::INFINITY } else { chi2 },
        chi2_infinite: infinite,
    })
}
