//! The N-particle delayed alignment system, integrated by the method of steps.
//!
//! Positions and velocities are stored as flat row-major `N × d` arrays.

mod history;
mod init;
mod integrator;
mod record;
mod weights;

pub use history::{HistoryBuffer, HistoryKind, InitialHistory, Interpolation};
pub use init::{random_initial_state, InitialShape};
pub use integrator::{rhs_velocity, simulate, step, SimConfig, Simulation};
pub use record::TrajectoryRecord;
pub use weights::{normalized_weights, Weights};

use crate::error::{Error, Result};

/// Positions and velocities of all agents at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub t: f64,
    n: usize,
    dim: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl ParticleState {
    pub fn new(t: f64, n: usize, dim: usize, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::invalid("state", "need N >= 1 and d >= 1"));
        }
        if x.len() != n * dim || v.len() != n * dim {
            return Err(Error::invalid(
                "state",
                format!(
                    "expected {} coordinates per array, got x: {}, v: {}",
                    n * dim,
                    x.len(),
                    v.len()
                ),
            ));
        }
        let state = ParticleState { t, n, dim, x, v };
        if !state.is_finite() {
            return Err(Error::NonFinite { t });
        }
        Ok(state)
    }

    pub(crate) fn from_parts(t: f64, n: usize, dim: usize, x: Vec<f64>, v: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), n * dim);
        debug_assert_eq!(v.len(), n * dim);
        ParticleState { t, n, dim, x, v }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.v.iter()).all(|c| c.is_finite())
    }

    /// max_i |v_i|
    pub fn max_speed(&self) -> f64 {
        (0..self.n)
            .map(|i| norm(self.velocity(i)))
            .fold(0.0, f64::max)
    }
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}
