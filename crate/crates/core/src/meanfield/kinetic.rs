use serde::{Deserialize, Serialize};

use super::KineticRun;
use crate::diagnostics::flocking::{evaluate_condition, HistoryProfile};
use crate::diagnostics::{fit_decay_rate_all, Series};
use crate::error::Result;
use crate::kernels::Tail;
use crate::model::ModelSpec;

/// Fraction of the initial velocity diameter treated as machine zero.
const ZERO_FRACTION: f64 = 1e-10;

/// Kinetic flocking condition (no β_N factor) and the observed decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticReport {
    pub lhs: f64,
    pub rhs: Tail,
    pub holds: bool,
    pub d_star: Option<f64>,
    /// Halanay rate with β = 1 (the N → ∞ limit of β_N).
    pub gamma_beta_one: Option<f64>,
    /// Halanay rate with the N-uniform β = 1/2.
    pub gamma_beta_half: Option<f64>,
    /// max_{s ∈ [−τ₀, 0]} d_V[g_s]
    pub d_v_initial_max: f64,
    /// Largest Ĉ with d_V[f_t] ≤ d_V⁰ e^{−Ĉt} at every recorded t > 0.
    pub decay_rate_envelope: Option<f64>,
    /// Least-squares slope of −ln d_V[f_t].
    pub decay_rate_fitted: Option<f64>,
    /// Ĉ > 0, or d_V⁰ = 0.
    pub decay_holds: bool,
}

/// Evaluates the kinetic flocking condition on the history snapshots of `run`
/// and checks exponential decay of the velocity support diameter.
pub fn kinetic_flocking_check(run: &KineticRun, model: &ModelSpec) -> Result<KineticReport> {
    let zero = run.zero_position();
    let (d_x, d_v): (Vec<f64>, Vec<f64>) = run.snapshots().iter().map(|f| f.diameters()).unzip();
    let r_v = run.snapshots()[..=zero]
        .iter()
        .map(|f| f.velocity_radius())
        .fold(0.0, f64::max);
    let profile = HistoryProfile {
        d_x: Series::new(run.first_index(), run.delta(), d_x[..=zero].to_vec())?,
        d_v: Series::new(run.first_index(), run.delta(), d_v[..=zero].to_vec())?,
        r_v,
    };
    let one = evaluate_condition(&profile, model, 1.0, run.delta())?;
    let half = evaluate_condition(&profile, model, 0.5, run.delta())?;

    let d_v0 = d_v[..=zero].iter().copied().fold(0.0, f64::max);
    let forward: Vec<(f64, f64)> = run.times()[zero..]
        .iter()
        .copied()
        .zip(d_v[zero..].iter().copied())
        .collect();
    let envelope = if d_v0 > 0.0 {
        forward
            .iter()
            .filter(|&&(t, d)| t > 0.0 && d > ZERO_FRACTION * d_v0)
            .map(|&(t, d)| (d_v0 / d).ln() / t)
            .reduce(f64::min)
    } else {
        None
    };
    let decay_holds = d_v0 == 0.0 || envelope.is_some_and(|c| c > 0.0);
    Ok(KineticReport {
        lhs: one.lhs,
        rhs: one.rhs,
        holds: one.holds(),
        d_star: one.d_star,
        gamma_beta_one: one.gamma,
        gamma_beta_half: half.gamma,
        d_v_initial_max: d_v0,
        decay_rate_envelope: envelope,
        decay_rate_fitted: fit_decay_rate_all(&forward),
        decay_holds,
    })
}
