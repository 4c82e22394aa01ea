use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particle::{InitialHistory, InitialShape};

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Van der Corput radical inverse of `index` in base `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

/// Quasi-random draws from a fixed g: positions uniform in [−L/2, L/2]^d and
/// velocities uniform in the ball of radius R (d ≤ 3; the inscribed cube
/// [−R/√d, R/√d]^d otherwise). Points come from a randomly shifted Halton
/// sequence, so the first N atoms are always a subset of the first 2N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedSampler {
    pub box_side: f64,
    pub speed_radius: f64,
    pub seed: u64,
    #[serde(default)]
    pub shape: InitialShape,
}

impl NestedSampler {
    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.box_side >= 0.0 && self.box_side.is_finite()) {
            return Err(Error::invalid("box_side", "must be finite and >= 0"));
        }
        if !(self.speed_radius >= 0.0 && self.speed_radius.is_finite()) {
            return Err(Error::invalid("speed_radius", "must be finite and >= 0"));
        }
        if dim == 0 || 2 * dim > PRIMES.len() {
            return Err(Error::invalid(
                "dim",
                format!("nested sampling supports 1 <= d <= {}", PRIMES.len() / 2),
            ));
        }
        Ok(())
    }

    /// First `n` atoms (x, v) at time 0.
    pub fn sample(&self, n: usize, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let shift: Vec<f64> = (0..2 * dim).map(|_| rng.gen::<f64>()).collect();
        let mut x = Vec::with_capacity(n * dim);
        let mut v = Vec::with_capacity(n * dim);
        let mut u = vec![0.0; 2 * dim];
        for i in 0..n {
            for (k, uk) in u.iter_mut().enumerate() {
                *uk = (radical_inverse(i as u64 + 1, PRIMES[k]) + shift[k]).fract();
            }
            x.extend(u[..dim].iter().map(|c| self.box_side * (c - 0.5)));
            v.extend(
                cube_to_ball(&u[dim..])
                    .into_iter()
                    .map(|c| self.speed_radius * c),
            );
        }
        Ok((x, v))
    }

    pub fn initial_history(&self, n: usize, dim: usize) -> Result<InitialHistory> {
        let (x, v) = self.sample(n, dim)?;
        self.shape.build(n, dim, x, v)
    }
}

/// Measure-preserving map from the unit cube onto the unit ball for d ≤ 3;
/// the inscribed cube for larger d.
fn cube_to_ball(u: &[f64]) -> Vec<f64> {
    match u.len() {
        1 => vec![2.0 * u[0] - 1.0],
        2 => {
            let r = u[0].sqrt();
            let th = 2.0 * PI * u[1];
            vec![r * th.cos(), r * th.sin()]
        }
        3 => {
            let r = u[0].cbrt();
            let z = 2.0 * u[1] - 1.0;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let ph = 2.0 * PI * u[2];
            vec![r * rho * ph.cos(), r * rho * ph.sin(), r * z]
        }
        d => {
            let half = 1.0 / (d as f64).sqrt();
            u.iter().map(|c| half * (2.0 * c - 1.0)).collect()
        }
    }
}

/// Convenience wrapper: nested initial history for N agents.
pub fn nested_initial_state(
    sampler: &NestedSampler,
    n: usize,
    dim: usize,
) -> Result<InitialHistory> {
    sampler.initial_history(n, dim)
}
