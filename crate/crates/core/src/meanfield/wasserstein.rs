use super::assignment::solve_assignment;
use super::EmpiricalMeasure;
use crate::error::{Error, Result};

/// Largest replicated atom count accepted for measures of unequal size.
pub const LCM_LIMIT: usize = 100_000;

/// Cost matrices up to this many entries are tabulated before solving.
const TABULATE_LIMIT: usize = 1 << 22;

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact W1 with ground cost √(|x − y|² + |v − w|²).
pub fn wasserstein1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    wasserstein1_weighted(mu, nu, 1.0)
}

/// Exact W1 with ground cost √(|x − y|² + λ²|v − w|²), λ = `velocity_weight`.
///
/// Equal atom counts are solved as one assignment problem; counts n ≠ m are
/// refined to lcm(n, m) equal-mass atoms first (guarded by [`LCM_LIMIT`]).
pub fn wasserstein1_weighted(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    velocity_weight: f64,
) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::invalid(
            "measures",
            format!("dimension mismatch: {} vs {}", mu.dim(), nu.dim()),
        ));
    }
    if !(velocity_weight >= 0.0 && velocity_weight.is_finite()) {
        return Err(Error::invalid(
            "w1_velocity_weight",
            "must be finite and >= 0",
        ));
    }
    let (n, m) = (mu.len(), nu.len());
    let lcm = (n as u128) / gcd(n as u128, m as u128) * (m as u128);
    if lcm > LCM_LIMIT as u128 {
        return Err(Error::AssignmentTooLarge {
            n,
            m,
            lcm,
            limit: LCM_LIMIT,
        });
    }
    let size = lcm as usize;
    let w2 = velocity_weight * velocity_weight;
    let ground = |i: usize, j: usize| -> f64 {
        let dx: f64 = mu
            .position(i)
            .iter()
            .zip(nu.position(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let dv: f64 = mu
            .velocity(i)
            .iter()
            .zip(nu.velocity(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (dx + w2 * dv).sqrt()
    };
    let (rep_mu, rep_nu) = (size / n, size / m);
    let total = if n * m <= TABULATE_LIMIT {
        let table: Vec<f64> = (0..n * m).map(|k| ground(k / m, k % m)).collect();
        solve_assignment(size, |a, b| table[(a / rep_mu) * m + b / rep_nu]).1
    } else {
        solve_assignment(size, |a, b| ground(a / rep_mu, b / rep_nu)).1
    };
    Ok((total / size as f64).max(0.0))
}
