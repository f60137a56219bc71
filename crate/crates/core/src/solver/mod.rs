//! NPMLE computation by support refinement.
//!
//! The outer loop maximizes the gradient function `D` over the parameter
//! window, inserts the global maximizer as a new atom, and re-optimizes the
//! weights (EM sweeps followed by projected Newton polishing). It stops once
//! `sup D ≤ 1 + kkt_tol`, which bounds the per-observation log-likelihood
//! gap to the global optimum by `sup D − 1`.

mod gradient;
mod weights;

use serde::{Deserialize, Serialize};

pub(crate) use gradient::Data;
use weights::Components;

use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;
use crate::measures::{AtomicDistribution, Sample};

/// Lower clamp for Poisson means when the window is derived from data that
/// contain zeros (the mean map inverse is `−∞` there).
pub const POISSON_MEAN_FLOOR: f64 = 1e-6;

/// Gain below which the inner weight iterations stop.
const INNER_GAIN_TOL: f64 = 1e-13;
const NEWTON_ITERS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Candidate-atom window; `None` derives it from the data.
    pub theta_window: Option<(f64, f64)>,
    pub grid_size: usize,
    pub refine_tol: f64,
    pub kkt_tol: f64,
    pub max_outer_iters: usize,
    pub em_inner_iters: usize,
    /// Absolute merge radius; `None` means `1e−6 ×` window width.
    pub merge_radius: Option<f64>,
    pub prune_threshold: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            theta_window: None,
            grid_size: 4096,
            refine_tol: 1e-9,
            kkt_tol: 1e-6,
            max_outer_iters: 500,
            em_inner_iters: 100,
            merge_radius: None,
            prune_threshold: 1e-10,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 16 {
            return invalid(format!("grid_size must be at least 16, got {}", self.grid_size));
        }
        for (name, v) in [
            ("refine_tol", self.refine_tol),
            ("kkt_tol", self.kkt_tol),
            ("prune_threshold", self.prune_threshold),
        ] {
            if !(v > 0.0) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(r) = self.merge_radius {
            if !(r > 0.0) {
                return invalid(format!("merge_radius must be positive, got {r}"));
            }
        }
        if let Some((lo, hi)) = self.theta_window {
            if !(lo < hi) {
                return invalid(format!("theta window [{lo}, {hi}] is degenerate"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCertificate {
    /// Maximum of `D` found over the refined grid (and the atoms).
    pub sup_d: f64,
    /// `sup_d − 1`: bound on the per-observation log-likelihood gap (nats).
    pub gap_bound: f64,
    pub argmax_theta: f64,
    pub grid_size_used: usize,
    pub window: (f64, f64),
    /// `∫ D dπ`, identically 1.
    pub mean_d: f64,
    /// Smallest `D` over the atoms of `π`.
    pub min_atom_d: f64,
    /// Some atom has `D(atom) < 1 − 10·kkt_tol`.
    pub support_violation: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NpmleSolution {
    pub pi_hat: AtomicDistribution,
    /// Per-observation log-likelihood (nats).
    pub log_likelihood: f64,
    pub certificate: OptimalityCertificate,
    pub outer_iters: usize,
    pub converged: bool,
    /// An atom sits on an edge of a window derived by clamping (Poisson zeros).
    pub boundary_clamped: bool,
    /// Log-likelihood after every accepted step, in order.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// Data-driven parameter window `[μ⁻¹(x_min), μ⁻¹(x_max)]`, oriented
/// increasingly (the exponential mean map is decreasing).
pub fn default_window(kernel: Kernel, sample: &Sample) -> (f64, f64) {
    match kernel {
        Kernel::Gaussian => (sample.x_min(), sample.x_max()),
        Kernel::Poisson => (
            sample.x_min().max(POISSON_MEAN_FLOOR).ln(),
            sample.x_max().max(POISSON_MEAN_FLOOR).ln(),
        ),
        Kernel::Exponential => (1.0 / sample.x_max(), 1.0 / sample.x_min()),
    }
}

fn check_window(kernel: Kernel, (lo, hi): (f64, f64)) -> Result<()> {
    let (dlo, dhi) = kernel.theta_domain();
    if !(lo > dlo && hi < dhi && lo.is_finite() && hi.is_finite()) {
        return invalid(format!(
            "theta window [{lo}, {hi}] is not inside the {kernel} domain ({dlo}, {dhi})"
        ));
    }
    Ok(())
}

/// `D_π(θ) = (1/n) Σ p_θ(x_i) / p_π(x_i)`.
pub fn gradient_d(kernel: Kernel, pi: &AtomicDistribution, sample: &Sample, theta: f64) -> Result<f64> {
    kernel.check_theta(theta)?;
    check_atoms(kernel, pi)?;
    let data = Data::new(kernel, sample)?;
    let lm = data.log_mix(pi.atoms(), pi.weights());
    Ok(data.d_at(&lm, theta))
}

/// `∂ℓ/∂w_j = D(θ_j)` for each atom, with `ℓ` the per-observation
/// log-likelihood viewed as a function of unnormalised weights.
pub fn weight_gradient(kernel: Kernel, pi: &AtomicDistribution, sample: &Sample) -> Result<Vec<f64>> {
    check_atoms(kernel, pi)?;
    let data = Data::new(kernel, sample)?;
    Ok(Components::new(&data, pi.atoms()).gradient(pi.weights()))
}

fn check_atoms(kernel: Kernel, pi: &AtomicDistribution) -> Result<()> {
    if pi.is_empty() {
        return invalid("mixing distribution has no atoms");
    }
    pi.atoms().iter().try_for_each(|&a| kernel.check_theta(a))
}

/// One EM sweep `w_j ← w_j · (1/n) Σ_i p_{θ_j}(x_i)/p_π(x_i)` for fixed atoms.
pub fn em_weight_update(kernel: Kernel, atoms: &[f64], weights: &[f64], sample: &Sample) -> Result<Vec<f64>> {
    if atoms.is_empty() || atoms.len() != weights.len() {
        return invalid("atoms and weights must be nonempty and of equal length");
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return invalid("weights must be a point of the simplex");
    }
    atoms.iter().try_for_each(|&a| kernel.check_theta(a))?;
    let data = Data::new(kernel, sample)?;
    Ok(Components::new(&data, atoms).em_step(weights))
}

/// Certifies a candidate `π` against the first-order optimality condition
/// over `window` (default: the data window widened to contain the atoms).
pub fn certify(
    kernel: Kernel,
    pi: &AtomicDistribution,
    sample: &Sample,
    window: Option<(f64, f64)>,
    grid_size: usize,
    kkt_tol: f64,
) -> Result<OptimalityCertificate> {
    check_atoms(kernel, pi)?;
    let data = Data::new(kernel, sample)?;
    let window = match window {
        Some(w) => w,
        None => {
            let (lo, hi) = default_window(kernel, sample);
            let amin = pi.atoms()[0];
            let amax = pi.atoms()[pi.len() - 1];
            (lo.min(amin), hi.max(amax))
        }
    };
    check_window(kernel, window)?;
    if grid_size < 16 {
        return invalid("grid_size must be at least 16");
    }
    Ok(certificate(&data, pi, window, grid_size, 1e-9, kkt_tol))
}

fn certificate(
    data: &Data,
    pi: &AtomicDistribution,
    window: (f64, f64),
    grid_size: usize,
    refine_tol: f64,
    kkt_tol: f64,
) -> OptimalityCertificate {
    let lm = data.log_mix(pi.atoms(), pi.weights());
    let (lo, hi) = window;
    let mut sup = (f64::NEG_INFINITY, lo);
    if hi > lo {
        for (t, d) in data.local_maxima(&lm, lo, hi, grid_size, refine_tol, 1.0) {
            if d > sup.0 {
                sup = (d, t);
            }
        }
    }
    let atom_d: Vec<f64> = pi.atoms().iter().map(|&a| data.d_at(&lm, a)).collect();
    for (&a, &d) in pi.atoms().iter().zip(&atom_d) {
        if d > sup.0 {
            sup = (d, a);
        }
    }
    let mean_d = pi.weights().iter().zip(&atom_d).map(|(w, d)| w * d).sum();
    let min_atom_d = atom_d.iter().copied().fold(f64::INFINITY, f64::min);
    OptimalityCertificate {
        sup_d: sup.0,
        gap_bound: sup.0 - 1.0,
        argmax_theta: sup.1,
        grid_size_used: grid_size,
        window,
        mean_d,
        min_atom_d,
        support_violation: min_atom_d < 1.0 - 10.0 * kkt_tol,
    }
}

struct State {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    log_lik: f64,
    trace: Vec<f64>,
}

impl State {
    fn record(&mut self, ll: f64, iter: usize) -> Result<()> {
        if ll.is_nan() {
            return Err(Error::Internal(format!(
                "log-likelihood became NaN at outer iteration {iter}; atoms {:?}, weights {:?}, trace tail {:?}",
                self.atoms,
                self.weights,
                &self.trace[self.trace.len().saturating_sub(5)..]
            )));
        }
        self.log_lik = ll;
        self.trace.push(ll);
        Ok(())
    }

    /// EM sweeps, then Newton polish; drops atoms whose weight reaches zero.
    fn optimize_weights(&mut self, data: &Data, config: &SolveConfig, iter: usize) -> Result<()> {
        let comps = Components::new(data, &self.atoms);
        let mut w = self.weights.clone();
        let mut ll = comps.log_lik(&w);
        for _ in 0..config.em_inner_iters {
            let next = comps.em_step(&w);
            let next_ll = comps.log_lik(&next);
            if !(next_ll >= ll) {
                break;
            }
            let gain = next_ll - ll;
            w = next;
            ll = next_ll;
            self.weights.clone_from(&w);
            self.record(ll, iter)?;
            if gain < INNER_GAIN_TOL {
                break;
            }
        }
        for _ in 0..NEWTON_ITERS {
            let Some(next) = comps.newton_step(&w) else { break };
            let next_ll = comps.log_lik(&next);
            let gain = next_ll - ll;
            w = next;
            ll = next_ll;
            self.weights.clone_from(&w);
            self.record(ll, iter)?;
            if gain < 1e-16 {
                break;
            }
        }
        let (atoms, weights): (Vec<f64>, Vec<f64>) = self
            .atoms
            .iter()
            .zip(&w)
            .filter(|(_, &w)| w > 0.0)
            .map(|(a, w)| (*a, *w))
            .unzip();
        self.atoms = atoms;
        self.weights = weights;
        Ok(())
    }

    fn canonicalize(&mut self, data: &Data, merge_radius: f64, prune: f64, iter: usize) -> Result<()> {
        let pi = AtomicDistribution::from_parts(self.atoms.clone(), self.weights.clone())?;
        let Ok(c) = pi.canonicalize(merge_radius, prune) else {
            return Ok(());
        };
        if c.atoms() == self.atoms.as_slice() && c.weights() == self.weights.as_slice() {
            return Ok(());
        }
        let ll = data.mean_log_lik(&data.log_mix(c.atoms(), c.weights()));
        if ll >= self.log_lik - 1e-14 {
            self.atoms = c.atoms().to_vec();
            self.weights = c.weights().to_vec();
            self.record(ll.max(self.log_lik), iter)?;
        }
        Ok(())
    }

    fn insert(&mut self, data: &Data, theta: f64, iter: usize) -> Result<()> {
        let pos = self.atoms.partition_point(|&a| a < theta);
        self.atoms.insert(pos, theta);
        self.weights.insert(pos, 0.0);
        let comps = Components::new(data, &self.atoms);
        let eps = comps.vertex_step(&self.weights, pos);
        if eps > 0.0 {
            let mut w: Vec<f64> = self.weights.iter().map(|w| w * (1.0 - eps)).collect();
            w[pos] += eps;
            let ll = comps.log_lik(&w);
            if ll >= self.log_lik {
                self.weights = w;
                self.record(ll, iter)?;
            }
        }
        Ok(())
    }
}

fn initial_atoms(kernel: Kernel, sample: &Sample, (lo, hi): (f64, f64)) -> Vec<f64> {
    let v = sample.values();
    let m = v.len().min(32);
    let mut atoms: Vec<f64> = (0..m)
        .map(|i| {
            let idx = ((i as f64 + 0.5) / m as f64 * v.len() as f64) as usize;
            let t = kernel.mean_inverse(v[idx.min(v.len() - 1)]);
            if t.is_nan() {
                lo
            } else {
                t.clamp(lo, hi)
            }
        })
        .collect();
    atoms.sort_by(f64::total_cmp);
    atoms.dedup();
    atoms
}

/// Computes the NPMLE of the mixing distribution.
pub fn solve_npmle(kernel: Kernel, sample: &Sample, config: &SolveConfig) -> Result<NpmleSolution> {
    config.validate()?;
    let data = Data::new(kernel, sample)?;
    let derived = config.theta_window.is_none();
    let window = config.theta_window.unwrap_or_else(|| default_window(kernel, sample));
    let (lo, hi) = window;

    if sample.x_min() == sample.x_max() || !(hi > lo) {
        return degenerate(kernel, sample, &data, window, derived, config);
    }
    check_window(kernel, window)?;

    let merge_radius = config.merge_radius.unwrap_or(1e-6 * (hi - lo));
    let atoms = initial_atoms(kernel, sample, window);
    let weights = vec![1.0 / atoms.len() as f64; atoms.len()];
    let mut state = State {
        log_lik: data.mean_log_lik(&data.log_mix(&atoms, &weights)),
        atoms,
        weights,
        trace: Vec::new(),
    };
    let ll0 = state.log_lik;
    state.record(ll0, 0)?;
    state.optimize_weights(&data, config, 0)?;
    state.canonicalize(&data, merge_radius, config.prune_threshold, 0)?;

    let mut converged = false;
    let mut outer = 0;
    while outer < config.max_outer_iters {
        let lm = data.log_mix(&state.atoms, &state.weights);
        let maxima = data.local_maxima(&lm, lo, hi, config.grid_size, config.refine_tol, 1.0);
        let (theta, d) = maxima
            .iter()
            .copied()
            .fold((lo, f64::NEG_INFINITY), |best, m| if m.1 > best.1 { m } else { best });
        if d <= 1.0 + config.kkt_tol {
            converged = true;
            break;
        }
        outer += 1;
        let before = state.log_lik;
        let near = state.atoms.iter().any(|a| (a - theta).abs() < merge_radius);
        if !near {
            state.insert(&data, theta, outer)?;
        }
        state.optimize_weights(&data, config, outer)?;
        state.canonicalize(&data, merge_radius, config.prune_threshold, outer)?;
        if near && state.log_lik <= before {
            // no atom to add and the weights cannot improve
            break;
        }
    }

    let pi_hat = AtomicDistribution::from_parts(state.atoms.clone(), state.weights.clone())?;
    let cert = certificate(&data, &pi_hat, window, config.grid_size, config.refine_tol, config.kkt_tol);
    let converged = converged || cert.sup_d <= 1.0 + config.kkt_tol;
    let boundary_clamped = derived
        && kernel == Kernel::Poisson
        && sample.x_min() == 0.0
        && pi_hat.atoms()[0] <= lo + merge_radius;
    Ok(NpmleSolution {
        log_likelihood: state.log_lik,
        pi_hat,
        certificate: cert,
        outer_iters: outer,
        converged,
        boundary_clamped,
        trace: state.trace,
    })
}

/// All observations equal: the NPMLE is a point mass at `μ⁻¹(x₁)`, clamped
/// into the window.
fn degenerate(
    kernel: Kernel,
    sample: &Sample,
    data: &Data,
    window: (f64, f64),
    derived: bool,
    config: &SolveConfig,
) -> Result<NpmleSolution> {
    let x = sample.x_min();
    let raw = if kernel == Kernel::Poisson && x == 0.0 {
        POISSON_MEAN_FLOOR.ln()
    } else {
        kernel.mean_inverse(x)
    };
    let theta = if derived { raw } else { raw.clamp(window.0, window.1) };
    kernel.check_theta(theta)?;
    let pi_hat = AtomicDistribution::point_mass(theta);
    let cert_window = if derived {
        let (dlo, dhi) = kernel.theta_domain();
        let span = theta.abs().max(1.0);
        ((theta - span).max(if dlo.is_finite() { theta * 0.5 } else { f64::NEG_INFINITY }), (theta + span).min(dhi))
    } else {
        window
    };
    let cert = certificate(data, &pi_hat, cert_window, config.grid_size, config.refine_tol, config.kkt_tol);
    let ll = data.mean_log_lik(&data.log_mix(pi_hat.atoms(), pi_hat.weights()));
    Ok(NpmleSolution {
        pi_hat,
        log_likelihood: ll,
        converged: cert.sup_d <= 1.0 + config.kkt_tol,
        certificate: cert,
        outer_iters: 0,
        boundary_clamped: kernel == Kernel::Poisson && x == 0.0,
        trace: vec![ll],
    })
}
