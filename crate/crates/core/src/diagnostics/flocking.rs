use serde::{Deserialize, Serialize};

use super::series::Series;
use super::{diameters, max_speed};
use crate::error::{Error, Result};
use crate::kernels::{halanay_rate, DelayKernel, Tail};
use crate::model::ModelSpec;
use crate::particle::HistoryBuffer;

/// Upper end of the bracket searched for d*.
const D_STAR_CEILING: f64 = 1e6;

/// Verdict on the sufficient flocking condition for one initial history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlockingReport {
    pub lhs: f64,
    pub rhs: Tail,
    #[serde(rename = "beta_N")]
    pub beta_n: f64,
    pub holds: bool,
    /// Halanay rate with a = 1 − β_N ψ(d* + 4R_vτ₀).
    pub gamma_predicted: Option<f64>,
    pub gamma_fitted: Option<f64>,
    /// Same rate with β_N replaced by its N-uniform lower bound 1/2.
    pub gamma_predicted_uniform: Option<f64>,
    pub d_star: Option<f64>,
    pub r_v: f64,
}

/// Diameter profiles of an initial history plus its speed bound R_v.
pub(crate) struct HistoryProfile {
    pub d_x: Series,
    pub d_v: Series,
    pub r_v: f64,
}

impl HistoryProfile {
    pub(crate) fn from_buffer(history: &HistoryBuffer) -> Result<Self> {
        let dt = history.dt();
        if (history.latest_time()).abs() > 1e-9 * dt {
            return Err(Error::invalid("history", "buffer must end at t = 0"));
        }
        let (d_x, d_v): (Vec<f64>, Vec<f64>) = history.nodes().map(diameters).unzip();
        Ok(HistoryProfile {
            d_x: Series::new(history.earliest_index(), dt, d_x)?,
            d_v: Series::new(history.earliest_index(), dt, d_v)?,
            r_v: max_speed(history),
        })
    }
}

/// ∫₀^upper α(s) g(s) ds on the grid `step` (point evaluation for Dirac).
pub(crate) fn kernel_integral<G: FnMut(f64) -> Result<f64>>(
    kernel: &DelayKernel,
    upper: f64,
    step: f64,
    mut g: G,
) -> Result<f64> {
    let mut err = None;
    let value = kernel.weighted_integral(upper, step, |s| match g(s) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Both sides of the condition for a given β, plus d* and the Halanay rate.
pub(crate) struct Condition {
    pub lhs: f64,
    pub rhs: Tail,
    pub d_star: Option<f64>,
    pub gamma: Option<f64>,
}

impl Condition {
    pub fn holds(&self) -> bool {
        match self.rhs {
            Tail::Infinite => true,
            Tail::Finite(r) => self.lhs < r,
        }
    }
}

pub(crate) fn evaluate_condition(
    profile: &HistoryProfile,
    model: &ModelSpec,
    beta: f64,
    step: f64,
) -> Result<Condition> {
    let psi = &model.psi;
    let kernel = &model.kernel;
    let tau0 = model.tau0();
    let tau_star = model.tau_star();
    let shift = profile.r_v * tau0;
    let (d_x, d_v) = (&profile.d_x, &profile.d_v);

    let lhs = model.h(0.0) * d_v.value_at(0.0)?
        + kernel_integral(kernel, tau0, step, |s| d_v.integral(-s, 0.0))?;
    let rhs = if psi.is_integrable() {
        let tail = kernel_integral(kernel, tau_star, step, |s| {
            Ok(psi.tail_integral(d_x.value_at(-s)? + shift)?.as_f64())
        })?;
        Tail::Finite(beta * tail)
    } else {
        Tail::Infinite
    };
    let mut cond = Condition {
        lhs,
        rhs,
        d_star: None,
        gamma: None,
    };
    if !cond.holds() || beta <= 0.0 {
        return Ok(cond);
    }

    // G(d) = β ∫₀^{τ*} α(s) ∫_{a(s)}^{d} ψ, a(s) = d_X(−s) + R_vτ₀; for d ≥ A = max a(s)
    // this is G(A) + β·m·∫_A^d ψ with m the kernel mass on [0, τ*].
    let a_max = match kernel.dirac_lag() {
        Some(lag) => d_x.value_at(-lag)?,
        None => d_x.max_on(-tau_star, 0.0).max(d_x.value_at(-tau_star)?),
    } + shift;
    let g_a = beta
        * kernel_integral(kernel, tau_star, step, |s| {
            psi.integral(d_x.value_at(-s)? + shift, a_max)
        })?;
    let mass = kernel_integral(kernel, tau_star, step, |_| Ok(1.0))?;
    let excess = |d: f64| -> Result<f64> { Ok(g_a + beta * mass * psi.integral(a_max, d)? - lhs) };
    let d_star = if excess(a_max)? >= 0.0 {
        Some(a_max)
    } else if excess(D_STAR_CEILING)? < 0.0 {
        None
    } else {
        let (mut lo, mut hi) = (a_max, D_STAR_CEILING);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid)? >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-12 * hi.max(1.0) {
                break;
            }
        }
        Some(hi)
    };
    cond.d_star = d_star;
    cond.gamma = d_star.and_then(|d| {
        let a = 1.0 - beta * psi.eval_unchecked(d + 4.0 * shift);
        halanay_rate(a, tau0).ok()
    });
    Ok(cond)
}

/// Evaluates the sufficient flocking condition on an initial history over
/// [−τ₀, 0]: LHS = h(0)d_V(0) + ∫₀^{τ₀} α(s) ∫_{−s}^0 d_V, RHS = β_N ∫₀^{τ*}
/// α(s) ∫_{d_X(−s)+R_vτ₀}^∞ ψ, both by trapezoid on the history grid.
pub fn flocking_condition(history: &HistoryBuffer, model: &ModelSpec) -> Result<FlockingReport> {
    if model.n() <= 2 {
        return Err(Error::TooFewAgents { n: model.n() });
    }
    let tau0 = model.tau0();
    if history.earliest_time() > -tau0 + 1e-9 * history.dt() {
        return Err(Error::HistoryUnderflow {
            required: -tau0,
            earliest: history.earliest_time(),
        });
    }
    let profile = HistoryProfile::from_buffer(history)?;
    let beta = model.beta_n();
    let cond = evaluate_condition(&profile, model, beta, history.dt())?;
    let uniform = evaluate_condition(&profile, model, 0.5, history.dt())?;
    Ok(FlockingReport {
        lhs: cond.lhs,
        rhs: cond.rhs,
        beta_n: beta,
        holds: cond.holds(),
        gamma_predicted: cond.gamma,
        gamma_fitted: None,
        gamma_predicted_uniform: uniform.gamma,
        d_star: cond.d_star,
        r_v: profile.r_v,
    })
}
