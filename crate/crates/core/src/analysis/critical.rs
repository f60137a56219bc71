//! Critical points of `F(θ) = Σ wᵢ (p_θ/p₀)(xᵢ)` and modes of densities.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::Kernel;

/// Bisection tolerance for located critical points and modes.
pub const LOCATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Maximum,
    Minimum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub count: usize,
    pub locations: Vec<f64>,
    pub kinds: Vec<CriticalKind>,
    pub method: String,
    pub grid_size: usize,
    pub interval: (f64, f64),
    /// The count changed when the grid was doubled; the finer count is
    /// reported.
    pub grid_warning: bool,
}

impl CriticalPointReport {
    fn new(points: Vec<(f64, CriticalKind)>, grid_size: usize, interval: (f64, f64), grid_warning: bool) -> Self {
        let (locations, kinds): (Vec<f64>, Vec<CriticalKind>) = points.into_iter().unzip();
        CriticalPointReport {
            count: locations.len(),
            locations,
            kinds,
            method: "grid+bisection".into(),
            grid_size,
            interval,
            grid_warning,
        }
    }

    pub fn maxima(&self) -> usize {
        self.kinds.iter().filter(|k| **k == CriticalKind::Maximum).count()
    }
}

fn check_interval((lo, hi): (f64, f64), grid_size: usize) -> Result<()> {
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return invalid(format!("interval [{lo}, {hi}] is not a finite nondegenerate interval"));
    }
    if grid_size < 3 {
        return invalid("grid_size must be at least 3");
    }
    Ok(())
}

fn grid_point(lo: f64, hi: f64, n: usize, g: usize) -> f64 {
    if g + 1 == n {
        hi
    } else {
        lo + (hi - lo) * g as f64 / (n - 1) as f64
    }
}

/// Sign changes of `f` on an `n`-point grid, each refined by bisection.
fn sign_changes<F: Fn(f64) -> f64>(f: &F, (lo, hi): (f64, f64), n: usize) -> Vec<(f64, CriticalKind)> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for g in 0..n {
        let t = grid_point(lo, hi, n, g);
        let v = f(t);
        if v == 0.0 || v.is_nan() {
            continue;
        }
        if let Some((pt, pv)) = prev {
            if (pv > 0.0) != (v > 0.0) {
                let (mut a, mut b) = (pt, t);
                while b - a > LOCATE_TOL {
                    let m = 0.5 * (a + b);
                    let fm = f(m);
                    if fm == 0.0 {
                        a = m;
                        b = m;
                    } else if (fm > 0.0) == (pv > 0.0) {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                let kind = if pv > 0.0 { CriticalKind::Maximum } else { CriticalKind::Minimum };
                out.push((0.5 * (a + b), kind));
            }
        }
        prev = Some((t, v));
    }
    out
}

/// Counts critical points of `F(θ) = Σ wᵢ exp(log p_θ(xᵢ) − log p₀(xᵢ))` on
/// `interval` from sign changes of `F′`, which is evaluated after dividing
/// by the largest term so it neither overflows nor underflows. The count is
/// repeated on a doubled grid; a disagreement sets `grid_warning`.
pub fn count_critical_points(
    kernel: Kernel,
    weights: &[f64],
    data: &[f64],
    interval: (f64, f64),
    grid_size: usize,
) -> Result<CriticalPointReport> {
    check_interval(interval, grid_size)?;
    if weights.is_empty() || weights.len() != data.len() {
        return invalid("weights and data must be nonempty and of equal length");
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return invalid("weights must be a point of the simplex");
    }
    kernel.check_theta(interval.0)?;
    kernel.check_theta(interval.1)?;
    data.iter().try_for_each(|&x| kernel.check_observation(x))?;
    let lw: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let slope = |t: f64| -> f64 {
        let logs: Vec<f64> = data
            .iter()
            .zip(&lw)
            .map(|(&x, &l)| l + kernel.log_density(t, x).unwrap_or(f64::NEG_INFINITY) - kernel.log_base(x))
            .collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        data.iter()
            .zip(&logs)
            .map(|(&x, &l)| (l - m).exp() * kernel.score(t, x))
            .sum()
    };
    let coarse = sign_changes(&slope, interval, grid_size);
    let fine = sign_changes(&slope, interval, 2 * grid_size);
    let warn = coarse.len() != fine.len();
    Ok(if warn {
        CriticalPointReport::new(fine, 2 * grid_size, interval, true)
    } else {
        CriticalPointReport::new(coarse, grid_size, interval, false)
    })
}

/// Strict interior local maxima of `values` taken on a grid. Runs of equal
/// values count as one point; returns index ranges `(left, right)` of the
/// neighbouring grid points that bracket each maximum.
fn discrete_maxima(values: &[f64]) -> Vec<(usize, usize)> {
    // compress plateaus into runs (start, end, value)
    let mut runs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.2 == v => r.1 = i,
            _ => runs.push((i, i, v)),
        }
    }
    let mut out = Vec::new();
    for w in runs.windows(3) {
        let (l, m, r) = (w[0], w[1], w[2]);
        if m.2 > l.2 && m.2 > r.2 {
            out.push((l.1, r.0));
        }
    }
    out
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > LOCATE_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn density_maxima<F: Fn(f64) -> f64>(density: &F, (lo, hi): (f64, f64), n: usize) -> Vec<(f64, CriticalKind)> {
    let values: Vec<f64> = (0..n).map(|g| density(grid_point(lo, hi, n, g))).collect();
    discrete_maxima(&values)
        .into_iter()
        .map(|(l, r)| {
            let t = golden_max(density, grid_point(lo, hi, n, l), grid_point(lo, hi, n, r));
            (t, CriticalKind::Maximum)
        })
        .collect()
}

/// Counts strict interior local maxima of `density` on `interval`; maxima
/// at the interval ends are not counted. Repeated on a doubled grid as in
/// [`count_critical_points`].
pub fn count_density_modes<F: Fn(f64) -> f64>(
    density: F,
    interval: (f64, f64),
    grid_size: usize,
) -> Result<CriticalPointReport> {
    check_interval(interval, grid_size)?;
    let coarse = density_maxima(&density, interval, grid_size);
    let fine = density_maxima(&density, interval, 2 * grid_size);
    let warn = coarse.len() != fine.len();
    Ok(if warn {
        CriticalPointReport::new(fine, 2 * grid_size, interval, true)
    } else {
        CriticalPointReport::new(coarse, grid_size, interval, false)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_pdf;

    #[test]
    fn single_bump() {
        let rep = count_critical_points(Kernel::Gaussian, &[1.0], &[0.0], (-5.0, 5.0), 1000).unwrap();
        assert_eq!(rep.count, 1);
        assert!(rep.locations[0].abs() < 1e-9);
        assert_eq!(rep.kinds, vec![CriticalKind::Maximum]);
    }

    #[test]
    fn separated_and_merged_pairs() {
        let rep = count_critical_points(Kernel::Gaussian, &[0.5, 0.5], &[-3.0, 3.0], (-5.0, 5.0), 1000).unwrap();
        assert_eq!(rep.count, 3);
        assert_eq!(rep.maxima(), 2);
        let rep = count_critical_points(Kernel::Gaussian, &[0.5, 0.5], &[-0.5, 0.5], (-5.0, 5.0), 1000).unwrap();
        assert_eq!(rep.count, 1);
        assert!(!rep.grid_warning);
    }

    #[test]
    fn density_modes() {
        assert_eq!(count_density_modes(norm_pdf, (-5.0, 5.0), 1000).unwrap().count, 1);
        let pair = |t: f64| move |x: f64| 0.5 * norm_pdf(x + t) + 0.5 * norm_pdf(x - t);
        assert_eq!(count_density_modes(pair(2.0), (-6.0, 6.0), 1000).unwrap().count, 2);
        assert_eq!(count_density_modes(pair(0.5), (-6.0, 6.0), 1000).unwrap().count, 1);
        // monotone on the interval: the end is not an interior maximum
        assert_eq!(count_density_modes(norm_pdf, (-5.0, -1.0), 100).unwrap().count, 0);
    }

    #[test]
    fn plateaus_count_once() {
        let v = [0.0, 1.0, 1.0, 1.0, 0.0, 2.0, 2.0, 3.0, 0.0];
        assert_eq!(discrete_maxima(&v), vec![(0, 4), (6, 8)]);
    }

    #[test]
    fn bad_inputs() {
        assert!(count_critical_points(Kernel::Gaussian, &[0.5], &[0.0], (-1.0, 1.0), 100).is_err());
        assert!(count_density_modes(norm_pdf, (1.0, 1.0), 100).is_err());
    }
}
