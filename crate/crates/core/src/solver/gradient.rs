//! Evaluation of the gradient function `D_π(θ) = (1/n) Σ p_θ(x_i)/p_π(x_i)`
//! on single points and on uniform grids, plus local-maximum refinement.

use crate::error::Result;
use crate::kernels::Kernel;
use crate::measures::{base_with, log_factorial_for, Sample};
use crate::special::log_sum_exp;

/// Distinct observations with precomputed per-observation constants.
#[derive(Debug, Clone)]
pub(crate) struct Data {
    pub kernel: Kernel,
    pub xs: Vec<f64>,
    pub stat: Vec<f64>,
    pub base: Vec<f64>,
    /// multiplicity / n
    pub q: Vec<f64>,
}

impl Data {
    pub fn new(kernel: Kernel, sample: &Sample) -> Result<Self> {
        sample.validate_for(kernel)?;
        let (xs, counts) = sample.distinct();
        let lf = log_factorial_for(kernel, sample);
        let n = sample.n() as f64;
        Ok(Data {
            kernel,
            stat: xs.iter().map(|&x| kernel.statistic(x)).collect(),
            base: xs.iter().map(|&x| base_with(kernel, x, lf.as_ref())).collect(),
            q: counts.iter().map(|&c| c as f64 / n).collect(),
            xs,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    #[inline]
    pub fn log_comp(&self, theta: f64, u: usize) -> f64 {
        self.kernel.log_density_with_base(theta, self.xs[u], self.base[u])
    }

    /// `log p_π(x_u)` for every distinct observation.
    pub fn log_mix(&self, atoms: &[f64], weights: &[f64]) -> Vec<f64> {
        let lw: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        (0..self.len())
            .map(|u| {
                log_sum_exp(
                    atoms
                        .iter()
                        .zip(&lw)
                        .map(|(&a, &l)| l + self.log_comp(a, u)),
                )
            })
            .collect()
    }

    pub fn mean_log_lik(&self, log_mix: &[f64]) -> f64 {
        self.q.iter().zip(log_mix).map(|(q, l)| q * l).sum()
    }

    pub fn d_at(&self, log_mix: &[f64], theta: f64) -> f64 {
        (0..self.len())
            .map(|u| self.q[u] * (self.log_comp(theta, u) - log_mix[u]).exp())
            .sum()
    }

    /// `(D(θ), D′(θ))`.
    pub fn d_and_slope(&self, log_mix: &[f64], theta: f64) -> (f64, f64) {
        let mut d = 0.0;
        let mut s = 0.0;
        for u in 0..self.len() {
            let t = self.q[u] * (self.log_comp(theta, u) - log_mix[u]).exp();
            d += t;
            s += t * self.kernel.score(theta, self.xs[u]);
        }
        (d, s)
    }

    /// `D` on the uniform grid `lo + g·h`, `g = 0..len`.
    ///
    /// Each block of grid points is anchored by an exact evaluation; inside the
    /// block the per-observation factor is advanced by the constant ratio
    /// `exp(h·T(x))`, while the `θ`-only factor `exp(−ΔA)` is applied to the
    /// block sum.
    pub fn d_grid(&self, log_mix: &[f64], lo: f64, h: f64, len: usize) -> Vec<f64> {
        let kernel = self.kernel;
        let max_stat = self.stat.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let step = h * max_stat;
        let block = if step > 0.0 {
            ((16.0 / step) as usize).clamp(1, 64)
        } else {
            64
        };
        let ratio: Vec<f64> = self.stat.iter().map(|t| (h * t).exp()).collect();
        let mut term = vec![0.0; self.len()];
        let mut out = Vec::with_capacity(len);
        let mut g = 0;
        while g < len {
            let theta0 = lo + h * g as f64;
            let a0 = kernel.log_partition(theta0);
            for u in 0..self.len() {
                term[u] = self.q[u] * (self.log_comp(theta0, u) - log_mix[u]).exp();
            }
            let end = (g + block).min(len);
            for m in g..end {
                if m > g {
                    for (t, r) in term.iter_mut().zip(&ratio) {
                        *t *= r;
                    }
                }
                let theta = lo + h * m as f64;
                let common = (a0 - kernel.log_partition(theta)).exp();
                out.push(sum4(&term) * common);
            }
            g = end;
        }
        out
    }

    /// Local maxima of `D` over `[lo, hi]`: grid scan, then bisection on `D′`
    /// inside each bracketing cell. Returned as `(θ, D(θ))`, in grid order.
    pub fn local_maxima(
        &self,
        log_mix: &[f64],
        lo: f64,
        hi: f64,
        grid_size: usize,
        tol: f64,
        keep_above: f64,
    ) -> Vec<(f64, f64)> {
        let h = (hi - lo) / (grid_size - 1) as f64;
        let vals = self.d_grid(log_mix, lo, h, grid_size);
        let at = |g: usize| if g + 1 == grid_size { hi } else { lo + h * g as f64 };
        let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out = Vec::new();
        for g in 0..grid_size {
            let left_ok = g == 0 || vals[g] > vals[g - 1];
            let right_ok = g + 1 == grid_size || vals[g] >= vals[g + 1];
            if !(left_ok && right_ok) {
                continue;
            }
            if vals[g] < keep_above && vals[g] < best {
                continue;
            }
            let a = at(g.saturating_sub(1));
            let b = at((g + 1).min(grid_size - 1));
            out.push(self.refine(log_mix, a, b, at(g), tol));
        }
        out
    }

    /// Maximizes `D` on `[a, b]` given a grid maximum at `mid`.
    fn refine(&self, log_mix: &[f64], a: f64, b: f64, mid: f64, tol: f64) -> (f64, f64) {
        let (da, sa) = self.d_and_slope(log_mix, a);
        let (db, sb) = self.d_and_slope(log_mix, b);
        let dm = self.d_at(log_mix, mid);
        let mut best = (mid, dm);
        if da > best.1 {
            best = (a, da);
        }
        if db > best.1 {
            best = (b, db);
        }
        if sa > 0.0 && sb < 0.0 {
            let (mut l, mut r) = (a, b);
            while r - l > tol {
                let c = 0.5 * (l + r);
                let (_, s) = self.d_and_slope(log_mix, c);
                if s > 0.0 {
                    l = c;
                } else {
                    r = c;
                }
            }
            let c = 0.5 * (l + r);
            let dc = self.d_at(log_mix, c);
            if dc >= best.1 {
                best = (c, dc);
            }
        }
        best
    }
}

/// Sum with four independent accumulators (fixed order, so deterministic).
#[inline]
fn sum4(v: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = v.chunks_exact(4);
    let rem = chunks.remainder();
    for c in chunks {
        acc[0] += c[0];
        acc[1] += c[1];
        acc[2] += c[2];
        acc[3] += c[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for r in rem {
        s += r;
    }
    s
}
