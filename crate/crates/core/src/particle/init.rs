use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::history::InitialHistory;
use crate::error::{Error, Result};

/// Continuation of a time-zero state backwards over [−τ₀, 0].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialShape {
    Constant,
    #[default]
    StraightLine,
}

impl InitialShape {
    pub fn build(self, n: usize, dim: usize, x0: Vec<f64>, v0: Vec<f64>) -> Result<InitialHistory> {
        match self {
            InitialShape::Constant => InitialHistory::constant(n, dim, x0, v0),
            InitialShape::StraightLine => InitialHistory::straight_line(n, dim, x0, v0),
        }
    }
}

/// Positions uniform in the box [−L/2, L/2]^d, velocities uniform in the
/// ball of radius `speed_radius` (rejection sampling), from a ChaCha8 stream.
pub fn random_initial_state(
    n: usize,
    dim: usize,
    box_side: f64,
    speed_radius: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(box_side >= 0.0 && box_side.is_finite()) {
        return Err(Error::invalid(
            "box_side",
            format!("must be finite and >= 0, got {box_side}"),
        ));
    }
    if !(speed_radius >= 0.0 && speed_radius.is_finite()) {
        return Err(Error::invalid(
            "speed_radius",
            format!("must be finite and >= 0, got {speed_radius}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n * dim)
        .map(|_| box_side * (rng.gen::<f64>() - 0.5))
        .collect();
    let mut v = Vec::with_capacity(n * dim);
    let mut sample = vec![0.0; dim];
    for _ in 0..n {
        loop {
            for c in sample.iter_mut() {
                *c = rng.gen_range(-1.0..1.0);
            }
            if sample.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
                break;
            }
        }
        v.extend(sample.iter().map(|c| c * speed_radius));
    }
    Ok((x, v))
}
