use super::dist;
use crate::error::{Error, Result};
use crate::kernels::InfluenceFunction;

/// Denominators below this are treated as underflow.
pub(crate) const MIN_DENOMINATOR: f64 = 1e-300;

/// Normalized communication weights seen by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub phi: Vec<f64>,
    /// Set when the agent has no neighbours (N = 1); `phi` is then all zero.
    pub isolated: bool,
}

/// φ_k = ψ(|x_k(s) − x_i(t)|) / Σ_{j≠i} ψ(|x_j(s) − x_i(t)|) for k ≠ i, φ_i = 0.
///
/// `x_past` holds the N positions at the delayed time s (flat, row-major),
/// `x_now_i` the position of agent `i` at the current time t.
pub fn normalized_weights(
    x_past: &[f64],
    x_now_i: &[f64],
    i: usize,
    psi: &InfluenceFunction,
) -> Result<Weights> {
    let dim = x_now_i.len();
    if dim == 0 || x_past.len() % dim != 0 {
        return Err(Error::invalid(
            "x_past",
            "length must be a multiple of the dimension",
        ));
    }
    let n = x_past.len() / dim;
    if i >= n {
        return Err(Error::invalid(
            "i",
            format!("agent index {i} out of range for N = {n}"),
        ));
    }
    if x_past.iter().chain(x_now_i).any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { t: f64::NAN });
    }
    let mut phi = vec![0.0; n];
    if n == 1 {
        return Ok(Weights {
            phi,
            isolated: true,
        });
    }
    let mut total = 0.0;
    for (k, w) in phi.iter_mut().enumerate() {
        if k != i {
            *w = psi.eval_unchecked(dist(&x_past[k * dim..(k + 1) * dim], x_now_i));
            total += *w;
        }
    }
    if total < MIN_DENOMINATOR {
        return Err(Error::WeightUnderflow {
            agent: i,
            s: f64::NAN,
        });
    }
    for w in &mut phi {
        *w /= total;
    }
    Ok(Weights {
        phi,
        isolated: false,
    })
}
