//! Weight optimization for a fixed set of atoms.
//!
//! The objective is the concave per-observation log-likelihood
//! `ℓ(w) = Σ_u q_u log Σ_j w_j p_{θ_j}(x_u)` over the simplex. Three moves are
//! provided: the multiplicative EM fixed point, the exact line search along a
//! vertex direction, and a projected Newton step on the nonnegative orthant
//! for `−ℓ(w) + Σ_j w_j`, whose minimizer lies on the simplex.

use nalgebra::{DMatrix, DVector};

use super::gradient::Data;

/// Row-shifted component matrix for a fixed atom set.
pub(crate) struct Components {
    /// `exp(log p_{θ_j}(x_u) − shift_u)`, row-major `len × k`.
    a: Vec<f64>,
    shift: Vec<f64>,
    q: Vec<f64>,
    k: usize,
}

impl Components {
    pub fn new(data: &Data, atoms: &[f64]) -> Self {
        let k = atoms.len();
        let mut a = vec![0.0; data.len() * k];
        let mut shift = vec![0.0; data.len()];
        let mut row = vec![0.0; k];
        for u in 0..data.len() {
            for (j, &t) in atoms.iter().enumerate() {
                row[j] = data.log_comp(t, u);
            }
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            shift[u] = m;
            for j in 0..k {
                a[u * k + j] = (row[j] - m).exp();
            }
        }
        Components {
            a,
            shift,
            q: data.q.clone(),
            k,
        }
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.a.chunks_exact(self.k)
    }

    fn mix(&self, w: &[f64]) -> Vec<f64> {
        self.rows()
            .map(|r| r.iter().zip(w).map(|(a, w)| a * w).sum())
            .collect()
    }

    /// Mean log-likelihood of the (not necessarily normalised) weights.
    pub fn log_lik(&self, w: &[f64]) -> f64 {
        self.mix(w)
            .iter()
            .zip(&self.shift)
            .zip(&self.q)
            .map(|((s, m), q)| q * (m + s.ln()))
            .sum()
    }

    /// `D(θ_j)` for every atom.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let s = self.mix(w);
        let mut d = vec![0.0; self.k];
        for ((r, s), q) in self.rows().zip(&s).zip(&self.q) {
            let f = q / s;
            for j in 0..self.k {
                d[j] += f * r[j];
            }
        }
        d
    }

    /// One multiplicative EM sweep `w_j ← w_j D(θ_j)`.
    pub fn em_step(&self, w: &[f64]) -> Vec<f64> {
        let d = self.gradient(w);
        let mut out: Vec<f64> = w.iter().zip(&d).map(|(w, d)| w * d).collect();
        let total: f64 = out.iter().sum();
        for x in &mut out {
            *x /= total;
        }
        out
    }

    /// Best mixing step `(1 − ε)w + ε e_j` towards vertex `j`; returns `ε`.
    pub fn vertex_step(&self, w: &[f64], j: usize) -> f64 {
        let s = self.mix(w);
        let slope = |eps: f64| -> f64 {
            self.rows()
                .zip(&s)
                .zip(&self.q)
                .map(|((r, s), q)| {
                    let diff = r[j] - s;
                    q * diff / (s + eps * diff)
                })
                .sum()
        };
        if slope(0.0) <= 0.0 {
            return 0.0;
        }
        if slope(1.0) >= 0.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Projected Newton step with backtracking. Returns the new weights when
    /// the normalised log-likelihood strictly improves.
    pub fn newton_step(&self, w: &[f64]) -> Option<Vec<f64>> {
        let k = self.k;
        let s = self.mix(w);
        let mut hess = DMatrix::<f64>::zeros(k, k);
        let mut d = vec![0.0; k];
        for ((r, s), q) in self.rows().zip(&s).zip(&self.q) {
            let f = q / s;
            let f2 = f / s;
            for i in 0..k {
                d[i] += f * r[i];
                let ri = f2 * r[i];
                if ri == 0.0 {
                    continue;
                }
                for jj in i..k {
                    hess[(i, jj)] += ri * r[jj];
                }
            }
        }
        for i in 0..k {
            for jj in 0..i {
                hess[(i, jj)] = hess[(jj, i)];
            }
        }
        let b = DVector::from_iterator(k, d.iter().map(|d| 2.0 * d - 1.0));
        let target = nonneg_qp(&hess, &b)?;
        let base = self.log_lik(w);
        let objective = |v: &[f64]| -self.log_lik(v) + v.iter().sum::<f64>();
        let f0 = objective(w);
        let dir: Vec<f64> = target.iter().zip(w).map(|(t, w)| t - w).collect();
        // gradient of the objective is 1 − D
        let slope: f64 = dir.iter().zip(&d).map(|(v, d)| v * (1.0 - d)).sum();
        if !(slope < 0.0) {
            return None;
        }
        let mut t = 1.0;
        for _ in 0..40 {
            let cand: Vec<f64> = w
                .iter()
                .zip(&dir)
                .map(|(w, v)| (w + t * v).max(0.0))
                .collect();
            let total: f64 = cand.iter().sum();
            if total > 0.0 && objective(&cand) <= f0 + 1e-4 * t * slope {
                let norm: Vec<f64> = cand.iter().map(|c| c / total).collect();
                let ll = self.log_lik(&norm);
                if ll > base {
                    return Some(norm);
                }
                return None;
            }
            t *= 0.5;
        }
        None
    }
}

/// Minimizes `½ vᵀHv − bᵀv` over `v ≥ 0` by the Lawson–Hanson active-set
/// scheme applied to the normal equations.
fn nonneg_qp(hess: &DMatrix<f64>, b: &DVector<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    let scale = (0..k).map(|i| hess[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
    let ridge = 1e-13 * scale;
    let mut passive = vec![false; k];
    let mut v = vec![0.0; k];
    let residual = |v: &[f64]| -> Vec<f64> {
        (0..k)
            .map(|i| b[i] - (0..k).map(|j| hess[(i, j)] * v[j]).sum::<f64>())
            .collect()
    };
    let solve = |passive: &[bool]| -> Option<Vec<f64>> {
        let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
        let m = idx.len();
        let mut sub = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for (p, &i) in idx.iter().enumerate() {
            rhs[p] = b[i];
            for (q, &j) in idx.iter().enumerate() {
                sub[(p, q)] = hess[(i, j)];
            }
            sub[(p, p)] += ridge;
        }
        let sol = sub.cholesky()?.solve(&rhs);
        let mut out = vec![0.0; k];
        for (p, &i) in idx.iter().enumerate() {
            out[i] = sol[p];
        }
        Some(out)
    };
    let tol = 1e-14 * b.amax().max(1.0);
    for _ in 0..(3 * k + 10) {
        let r = residual(&v);
        let pick = (0..k)
            .filter(|&i| !passive[i] && r[i] > tol)
            .max_by(|&i, &j| r[i].total_cmp(&r[j]));
        let Some(j) = pick else { break };
        passive[j] = true;
        loop {
            let s = solve(&passive)?;
            if (0..k).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                v = s;
                break;
            }
            let mut alpha = 1.0f64;
            for i in 0..k {
                if passive[i] && s[i] <= 0.0 {
                    alpha = alpha.min(v[i] / (v[i] - s[i]));
                }
            }
            for i in 0..k {
                if passive[i] {
                    v[i] += alpha * (s[i] - v[i]);
                    if v[i] <= 1e-300 {
                        v[i] = 0.0;
                        passive[i] = false;
                    }
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    Some(v)
}
