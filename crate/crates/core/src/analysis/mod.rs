//! Critical-point and mode counting, moment-matching quadrature,
//! divergences and the statistical-degree probe.

mod approx;
mod critical;
mod divergence;
mod gauss;

pub use approx::{
    chi2_bound, default_interval, k_atomic_approximation, statistical_degree, tv_bound, Conditioned,
    KAtomicApproximation, StatisticalDegree, DEGREE_NOTE,
};
pub use critical::{count_critical_points, count_density_modes, CriticalKind, CriticalPointReport, LOCATE_TOL};
pub use divergence::{divergences, Divergences, DEFAULT_QUAD_POINTS};
pub use gauss::{gauss_quadrature_from_moments, QuadratureResult, MAX_NODES, PD_TOL};
