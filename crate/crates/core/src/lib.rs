//! Nonparametric maximum-likelihood estimation of mixing distributions for
//! one-dimensional exponential-family kernels, with atom-count bounds,
//! mode counting and the accompanying constructions.

// Validation is written as `!(x > 0.0)` so that NaN fails it too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bounds;
pub mod constructions;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod measures;
pub mod quadrature;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use kernels::Kernel;
pub use measures::{AtomicDistribution, MixingSpec, Sample};
pub use solver::{solve_npmle, NpmleSolution, OptimalityCertificate, SolveConfig};
