//! Oracles shared by the integration tests. They use only plain density
//! evaluations, never the solver's internals.
#![allow(dead_code)]

use npmle::solver::default_window;
use npmle::{Kernel, Sample};

/// Component densities `p(x_i | θ_g)` for every observation and grid point.
pub fn density_table(kernel: Kernel, xs: &[f64], grid: &[f64]) -> Vec<Vec<f64>> {
    xs.iter()
        .map(|&x| grid.iter().map(|&t| kernel.component_density(t, x).unwrap()).collect())
        .collect()
}

fn mean_log_lik(table: &[Vec<f64>], support: &[usize], w: &[f64]) -> f64 {
    table
        .iter()
        .map(|row| support.iter().zip(w).map(|(&g, &wj)| wj * row[g]).sum::<f64>().ln())
        .sum::<f64>()
        / table.len() as f64
}

/// Best mean log-likelihood over weights on a fixed support: golden section
/// for two atoms (the objective is concave in the weight), EM otherwise.
fn best_weights(table: &[Vec<f64>], support: &[usize]) -> f64 {
    match support.len() {
        1 => mean_log_lik(table, support, &[1.0]),
        2 => {
            let f = |w: f64| mean_log_lik(table, support, &[w, 1.0 - w]);
            let (mut a, mut b) = (0.0f64, 1.0f64);
            let g = 0.618_033_988_749_894_8;
            while b - a > 1e-12 {
                let (c, d) = (b - g * (b - a), a + g * (b - a));
                if f(c) >= f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            f(0.5 * (a + b)).max(f(0.0)).max(f(1.0))
        }
        k => {
            let mut w = vec![1.0 / k as f64; k];
            for _ in 0..2000 {
                let mut next = vec![0.0; k];
                for row in table {
                    let p: f64 = support.iter().zip(&w).map(|(&g, &wj)| wj * row[g]).sum();
                    for j in 0..k {
                        next[j] += w[j] * row[support[j]] / p;
                    }
                }
                w = next.iter().map(|v| v / table.len() as f64).collect();
            }
            mean_log_lik(table, support, &w)
        }
    }
}

fn subsets(m: usize, k: usize, start: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if !cur.is_empty() {
        visit(cur);
    }
    if cur.len() == k {
        return;
    }
    for g in start..m {
        cur.push(g);
        subsets(m, k, g + 1, cur, visit);
        cur.pop();
    }
}

/// Largest mean log-likelihood over mixing distributions with at most
/// `max_atoms` atoms drawn from `grid`.
pub fn brute_force(kernel: Kernel, xs: &[f64], grid: &[f64], max_atoms: usize) -> f64 {
    let table = density_table(kernel, xs, grid);
    let mut best = f64::NEG_INFINITY;
    subsets(grid.len(), max_atoms, 0, &mut Vec::new(), &mut |s| {
        best = best.max(best_weights(&table, s));
    });
    best
}

/// `m` equally spaced candidate atoms over the solver's default window.
pub fn theta_grid(kernel: Kernel, sample: &Sample, m: usize) -> Vec<f64> {
    let (lo, hi) = default_window(kernel, sample);
    if m == 1 || lo == hi {
        return vec![lo];
    }
    (0..m).map(|g| lo + (hi - lo) * g as f64 / (m - 1) as f64).collect()
}

/// `D(θ) = (1/n) Σ p_θ(x_i) / p_π(x_i)` by direct summation.
pub fn gradient_direct(kernel: Kernel, atoms: &[f64], weights: &[f64], xs: &[f64], theta: f64) -> f64 {
    xs.iter()
        .map(|&x| {
            let mix: f64 = atoms.iter().zip(weights).map(|(&a, &w)| w * kernel.component_density(a, x).unwrap()).sum();
            kernel.component_density(theta, x).unwrap() / mix
        })
        .sum::<f64>()
        / xs.len() as f64
}
