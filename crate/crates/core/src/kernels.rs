//! One-dimensional exponential-family component models.
//!
//! Every kernel is written as `log p_θ(x) = θ·T(x) − A(θ) + B(x)`. For the
//! Gaussian and Poisson kernels this is the natural-parameter form with
//! `T(x) = x`, `A = κ` and `B = log p₀`. The exponential kernel keeps the
//! rate as its parameter, `p_θ(x) = θ e^{−θx}`, which fits the same shape
//! with `T(x) = −x`, `A(θ) = −ln θ` and `B = 0`; it is not in the natural
//! chart and its mean map is decreasing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::LN_SQRT_2PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `N(θ, 1)`.
    Gaussian,
    /// Poisson with mean `e^θ`.
    Poisson,
    /// Exponential with rate `θ > 0`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationSpace {
    Real,
    PositiveReal,
    NonNegativeInteger,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Gaussian, Kernel::Poisson, Kernel::Exponential];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Poisson => "poisson",
            Kernel::Exponential => "exponential",
        }
    }

    /// Open parameter interval `(θ̲, θ̄)`.
    pub fn theta_domain(self) -> (f64, f64) {
        match self {
            Kernel::Gaussian | Kernel::Poisson => (f64::NEG_INFINITY, f64::INFINITY),
            Kernel::Exponential => (0.0, f64::INFINITY),
        }
    }

    pub fn observation_space(self) -> ObservationSpace {
        match self {
            Kernel::Gaussian => ObservationSpace::Real,
            Kernel::Poisson => ObservationSpace::NonNegativeInteger,
            Kernel::Exponential => ObservationSpace::PositiveReal,
        }
    }

    /// Whether the parameter is the natural parameter of the family.
    pub fn is_natural(self) -> bool {
        !matches!(self, Kernel::Exponential)
    }

    pub fn check_theta(self, theta: f64) -> Result<()> {
        let (lo, hi) = self.theta_domain();
        if theta.is_nan() || theta <= lo {
            return Err(Error::Domain {
                value: theta,
                lower: lo,
                upper: hi,
                bound: "lower",
            });
        }
        if theta >= hi {
            return Err(Error::Domain {
                value: theta,
                lower: lo,
                upper: hi,
                bound: "upper",
            });
        }
        Ok(())
    }

    pub fn check_observation(self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return invalid(format!("observation {x} is not finite"));
        }
        match self.observation_space() {
            ObservationSpace::Real => Ok(()),
            ObservationSpace::PositiveReal if x > 0.0 => Ok(()),
            ObservationSpace::PositiveReal => {
                invalid(format!("{} kernel needs positive observations, got {x}", self))
            }
            ObservationSpace::NonNegativeInteger if x >= 0.0 && x.fract() == 0.0 => Ok(()),
            ObservationSpace::NonNegativeInteger => invalid(format!(
                "{} kernel needs nonnegative integer observations, got {x}",
                self
            )),
        }
    }

    /// Sufficient statistic `T(x)` multiplying θ in the exponent.
    #[inline]
    pub fn statistic(self, x: f64) -> f64 {
        match self {
            Kernel::Exponential => -x,
            _ => x,
        }
    }

    /// Log-normaliser `A(θ)`.
    #[inline]
    pub fn log_partition(self, theta: f64) -> f64 {
        match self {
            Kernel::Gaussian => 0.5 * theta * theta,
            Kernel::Poisson => theta.exp_m1(),
            Kernel::Exponential => -theta.ln(),
        }
    }

    /// `A′(θ)`.
    #[inline]
    pub fn log_partition_deriv(self, theta: f64) -> f64 {
        match self {
            Kernel::Gaussian => theta,
            Kernel::Poisson => theta.exp(),
            Kernel::Exponential => -1.0 / theta,
        }
    }

    /// `B(x)`, the log base measure. Poisson sums `ln k` directly; use
    /// [`LogFactorial`] when evaluating many observations.
    pub fn log_base(self, x: f64) -> f64 {
        match self {
            Kernel::Gaussian => -0.5 * x * x - LN_SQRT_2PI,
            Kernel::Poisson => -1.0 - LogFactorial::direct(x as u64),
            Kernel::Exponential => 0.0,
        }
    }

    /// `log p_θ(x)` without domain checks. `log_base` is the precomputed `B(x)`.
    #[inline]
    pub fn log_density_with_base(self, theta: f64, x: f64, log_base: f64) -> f64 {
        match self {
            Kernel::Gaussian => {
                let d = x - theta;
                -0.5 * d * d - LN_SQRT_2PI
            }
            _ => theta * self.statistic(x) - self.log_partition(theta) + log_base,
        }
    }

    /// `∂/∂θ log p_θ(x)`.
    #[inline]
    pub fn score(self, theta: f64, x: f64) -> f64 {
        self.statistic(x) - self.log_partition_deriv(theta)
    }

    pub fn log_density(self, theta: f64, x: f64) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_observation(x)?;
        Ok(self.log_density_with_base(theta, x, self.log_base(x)))
    }

    pub fn component_density(self, theta: f64, x: f64) -> Result<f64> {
        Ok(self.log_density(theta, x)?.exp())
    }

    /// Cumulant `κ(θ)`. For the exponential kernel this is the rate-chart
    /// log-normaliser `−ln θ`.
    pub fn cumulant(self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.log_partition(theta))
    }

    /// Mean map `μ(θ) = E_θ[X]`.
    pub fn mean(self, theta: f64) -> f64 {
        match self {
            Kernel::Gaussian => theta,
            Kernel::Poisson => theta.exp(),
            Kernel::Exponential => 1.0 / theta,
        }
    }

    /// Inverse of the mean map.
    pub fn mean_inverse(self, x: f64) -> f64 {
        match self {
            Kernel::Gaussian => x,
            Kernel::Poisson => x.ln(),
            Kernel::Exponential => 1.0 / x,
        }
    }

    /// `(κ(θ), μ(θ))`.
    pub fn cumulant_quantities(self, theta: f64) -> Result<(f64, f64)> {
        let k = self.cumulant(theta)?;
        Ok((k, self.mean(theta)))
    }

    pub fn support_text(self) -> &'static str {
        match self.observation_space() {
            ObservationSpace::Real => "real line",
            ObservationSpace::PositiveReal => "positive reals",
            ObservationSpace::NonNegativeInteger => "nonnegative integers",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Kernel::Gaussian),
            "poisson" => Ok(Kernel::Poisson),
            "exponential" | "exp" => Ok(Kernel::Exponential),
            other => invalid(format!(
                "unknown kernel '{other}' (expected gaussian | poisson | exponential)"
            )),
        }
    }
}

/// Cumulative `ln k!` table, exact for integers.
#[derive(Debug, Clone)]
pub struct LogFactorial {
    table: Vec<f64>,
}

impl LogFactorial {
    pub fn up_to(max: u64) -> Self {
        let mut table = Vec::with_capacity(max as usize + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for k in 1..=max {
            acc += (k as f64).ln();
            table.push(acc);
        }
        LogFactorial { table }
    }

    /// # Panics
    /// If `k` exceeds the table size.
    pub fn get(&self, k: u64) -> f64 {
        self.table[k as usize]
    }

    pub fn direct(k: u64) -> f64 {
        (2..=k).map(|j| (j as f64).ln()).sum()
    }
}
