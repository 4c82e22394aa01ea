use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{h_of_t, DelayFunction, DelayKernel, InfluenceFunction};

/// Everything the delayed alignment system needs besides initial data:
/// the triple (ψ, α, τ), the number of agents and the spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct ModelSpec {
    pub psi: InfluenceFunction,
    pub kernel: DelayKernel,
    pub delay: DelayFunction,
    n: usize,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    n: usize,
    dim: usize,
    psi: InfluenceFunction,
    alpha: DelayKernel,
    tau: DelayFunction,
}

impl ModelSpec {
    pub fn new(
        psi: InfluenceFunction,
        kernel: DelayKernel,
        delay: DelayFunction,
        n: usize,
        dim: usize,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one agent"));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "spatial dimension must be >= 1"));
        }
        if let Some(tau_bar) = kernel.dirac_lag() {
            if tau_bar > delay.tau_star() * (1.0 + 1e-12) {
                return Err(Error::invalid(
                    "alpha.params.tau_bar",
                    format!(
                        "point delay {tau_bar} must not exceed the minimal delay tau_star = {}",
                        delay.tau_star()
                    ),
                ));
            }
        } else if kernel.mass(delay.tau_star()) <= 0.0 {
            return Err(Error::invalid(
                "alpha",
                "kernel has no mass on [0, tau_star]",
            ));
        }
        Ok(ModelSpec {
            psi,
            kernel,
            delay,
            n,
            dim,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Same model with a different number of agents.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        ModelSpec::new(self.psi, self.kernel, self.delay, n, self.dim)
    }

    pub fn tau0(&self) -> f64 {
        self.delay.tau0()
    }

    pub fn tau_star(&self) -> f64 {
        self.delay.tau_star()
    }

    /// Shortest lag at which the force can read the past: τ* for distributed
    /// kernels, τ̄ for the point delay.
    pub fn min_lag(&self) -> f64 {
        self.kernel.dirac_lag().unwrap_or_else(|| self.tau_star())
    }

    pub fn h(&self, t: f64) -> f64 {
        h_of_t(&self.kernel, &self.delay, t.max(0.0)).expect("t clamped to >= 0")
    }

    /// β_N = (N − 2)/(N − 1), taken as 0 for N ≤ 2.
    pub fn beta_n(&self) -> f64 {
        beta_n(self.n)
    }
}

pub fn beta_n(n: usize) -> f64 {
    if n <= 2 {
        0.0
    } else {
        (n - 2) as f64 / (n - 1) as f64
    }
}

impl TryFrom<RawModel> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        ModelSpec::new(raw.psi, raw.alpha, raw.tau, raw.n, raw.dim)
    }
}

impl From<ModelSpec> for RawModel {
    fn from(m: ModelSpec) -> Self {
        RawModel {
            n: m.n,
            dim: m.dim,
            psi: m.psi,
            alpha: m.kernel,
            tau: m.delay,
        }
    }
}
