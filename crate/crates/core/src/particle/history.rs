use std::borrow::Cow;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::ParticleState;
use crate::error::{Error, Result};

/// Interpolation order used to read the history between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    Cubic,
}

/// How the prescribed trajectories on [−τ₀, 0] are represented.
#[derive(Debug, Clone, PartialEq)]
pub enum HistoryKind {
    /// x(s) = x(0), v(s) = v(0)
    Constant { x0: Vec<f64>, v0: Vec<f64> },
    /// x(s) = x(0) + s v(0), v(s) = v(0)
    StraightLine { x0: Vec<f64>, v0: Vec<f64> },
    /// Explicit samples, linearly interpolated and clamped outside their range.
    Sampled {
        times: Vec<f64>,
        x: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
}

/// Initial datum x_i⁰(s), v_i⁰(s) for s ∈ [−τ₀, 0].
#[derive(Debug, Clone, PartialEq)]
pub struct InitialHistory {
    n: usize,
    dim: usize,
    kind: HistoryKind,
}

fn check_flat(field: &str, a: &[f64], len: usize) -> Result<()> {
    if a.len() != len {
        return Err(Error::invalid(
            field,
            format!("expected {len} coordinates, got {}", a.len()),
        ));
    }
    if a.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid(field, "coordinates must be finite"));
    }
    Ok(())
}

impl InitialHistory {
    pub fn constant(n: usize, dim: usize, x0: Vec<f64>, v0: Vec<f64>) -> Result<Self> {
        check_flat("x", &x0, n * dim)?;
        check_flat("v", &v0, n * dim)?;
        Ok(InitialHistory {
            n,
            dim,
            kind: HistoryKind::Constant { x0, v0 },
        })
    }

    pub fn straight_line(n: usize, dim: usize, x0: Vec<f64>, v0: Vec<f64>) -> Result<Self> {
        check_flat("x", &x0, n * dim)?;
        check_flat("v", &v0, n * dim)?;
        Ok(InitialHistory {
            n,
            dim,
            kind: HistoryKind::StraightLine { x0, v0 },
        })
    }

    /// Sampled curves: `times` strictly increasing and ending at 0.
    pub fn sampled(
        n: usize,
        dim: usize,
        times: Vec<f64>,
        x: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != x.len() || times.len() != v.len() {
            return Err(Error::invalid(
                "times",
                "need one x and one v frame per sample time",
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "times",
                "sample times must be strictly increasing",
            ));
        }
        if *times.last().unwrap() != 0.0 {
            return Err(Error::invalid("times", "the last sample time must be 0"));
        }
        for (k, (xk, vk)) in x.iter().zip(&v).enumerate() {
            check_flat(&format!("x[{k}]"), xk, n * dim)?;
            check_flat(&format!("v[{k}]"), vk, n * dim)?;
        }
        Ok(InitialHistory {
            n,
            dim,
            kind: HistoryKind::Sampled { times, x, v },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &HistoryKind {
        &self.kind
    }

    /// Earliest time the data are defined on without clamping.
    pub fn earliest(&self) -> f64 {
        match &self.kind {
            HistoryKind::Sampled { times, .. } => times[0],
            _ => f64::NEG_INFINITY,
        }
    }

    /// State of the prescribed trajectories at time s ≤ 0.
    pub fn state_at(&self, s: f64) -> ParticleState {
        let (x, v) = match &self.kind {
            HistoryKind::Constant { x0, v0 } => (x0.clone(), v0.clone()),
            HistoryKind::StraightLine { x0, v0 } => {
                let x = x0.iter().zip(v0).map(|(p, q)| p + s * q).collect();
                (x, v0.clone())
            }
            HistoryKind::Sampled { times, x, v } => {
                if s <= times[0] {
                    (x[0].clone(), v[0].clone())
                } else if s >= *times.last().unwrap() {
                    (x.last().unwrap().clone(), v.last().unwrap().clone())
                } else {
                    let k = times.partition_point(|&t| t <= s) - 1;
                    let theta = (s - times[k]) / (times[k + 1] - times[k]);
                    (lerp(&x[k], &x[k + 1], theta), lerp(&v[k], &v[k + 1], theta))
                }
            }
        };
        ParticleState::from_parts(s, self.n, self.dim, x, v)
    }

    /// Applies `f(agent, x, v)` to every stored sample of every agent.
    pub fn map_agents<F: FnMut(usize, &mut [f64], &mut [f64])>(&self, mut f: F) -> Result<Self> {
        let d = self.dim;
        let mut apply = |x: &mut Vec<f64>, v: &mut Vec<f64>| {
            for i in 0..self.n {
                f(i, &mut x[i * d..(i + 1) * d], &mut v[i * d..(i + 1) * d]);
            }
        };
        let mut out = self.clone();
        match &mut out.kind {
            HistoryKind::Constant { x0, v0 } | HistoryKind::StraightLine { x0, v0 } => {
                apply(x0, v0)
            }
            HistoryKind::Sampled { x, v, .. } => {
                for (xk, vk) in x.iter_mut().zip(v.iter_mut()) {
                    apply(xk, vk);
                }
            }
        }
        match &out.kind {
            HistoryKind::Constant { x0, v0 } | HistoryKind::StraightLine { x0, v0 } => {
                check_flat("x", x0, self.n * d)?;
                check_flat("v", v0, self.n * d)?;
            }
            HistoryKind::Sampled { x, v, .. } => {
                for (xk, vk) in x.iter().zip(v) {
                    check_flat("x", xk, self.n * d)?;
                    check_flat("v", vk, self.n * d)?;
                }
            }
        }
        Ok(out)
    }
}

#[inline]
fn lerp(a: &[f64], b: &[f64], theta: f64) -> Vec<f64> {
    // a + θ(b − a) returns a exactly when a == b
    a.iter().zip(b).map(|(p, q)| p + theta * (q - p)).collect()
}

/// Sliding window of committed states on the uniform grid `k Δt`, covering
/// at least [t − τ₀, t] where t is the newest node.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    dt: f64,
    span: f64,
    first_index: i64,
    nodes: VecDeque<ParticleState>,
    interpolation: Interpolation,
}

/// Tolerance (in grid units) for recognizing a query time as a node.
const NODE_SNAP: f64 = 1e-9;

impl HistoryBuffer {
    /// Samples the initial history on the nodes −KΔt, …, 0 with KΔt ≥ τ₀.
    pub fn seed(
        initial: &InitialHistory,
        dt: f64,
        tau0: f64,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(
                "dt",
                format!("must be positive and finite, got {dt}"),
            ));
        }
        if !(tau0 > 0.0 && tau0.is_finite()) {
            return Err(Error::invalid(
                "tau",
                format!("tau0 must be positive and finite, got {tau0}"),
            ));
        }
        let k_max = (tau0 / dt - NODE_SNAP).ceil() as i64;
        let nodes = (-k_max..=0)
            .map(|k| {
                let mut s = initial.state_at(k as f64 * dt);
                s.t = k as f64 * dt;
                s
            })
            .collect();
        Ok(HistoryBuffer {
            dt,
            span: tau0,
            first_index: -k_max,
            nodes,
            interpolation,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ParticleState> {
        self.nodes.iter()
    }

    pub fn latest(&self) -> &ParticleState {
        self.nodes.back().expect("history buffer is never empty")
    }

    /// Grid index of the newest node.
    pub fn latest_index(&self) -> i64 {
        self.first_index + self.nodes.len() as i64 - 1
    }

    pub fn latest_time(&self) -> f64 {
        self.latest_index() as f64 * self.dt
    }

    pub fn earliest_time(&self) -> f64 {
        self.first_index as f64 * self.dt
    }

    /// Grid index of the oldest node.
    pub fn earliest_index(&self) -> i64 {
        self.first_index
    }

    /// Appends the state at the next grid time and evicts nodes older than
    /// t − τ₀ − Δt.
    pub fn push(&mut self, mut state: ParticleState) {
        let index = self.latest_index() + 1;
        state.t = index as f64 * self.dt;
        let horizon = state.t - self.span - self.dt;
        self.nodes.push_back(state);
        while self.nodes.len() > 2
            && ((self.first_index + 1) as f64 * self.dt) < horizon - NODE_SNAP * self.dt
        {
            self.nodes.pop_front();
            self.first_index += 1;
        }
    }

    /// State at time s, exact at grid nodes and interpolated in between.
    pub fn query(&self, s: f64) -> Result<Cow<'_, ParticleState>> {
        let earliest = self.earliest_time();
        let latest = self.latest_time();
        if s < earliest - NODE_SNAP * self.dt {
            return Err(Error::HistoryUnderflow {
                required: s,
                earliest,
            });
        }
        if s > latest + NODE_SNAP * self.dt {
            return Err(Error::HistoryOverflow {
                requested: s,
                latest,
            });
        }
        let u = s / self.dt - self.first_index as f64;
        let nearest = u.round();
        if (u - nearest).abs() <= NODE_SNAP {
            let k = (nearest as usize).min(self.nodes.len() - 1);
            return Ok(Cow::Borrowed(&self.nodes[k]));
        }
        let k = u.floor() as usize;
        let theta = u - k as f64;
        let a = &self.nodes[k];
        let b = &self.nodes[k + 1];
        let state = match self.interpolation {
            Interpolation::Linear => ParticleState::from_parts(
                s,
                a.n(),
                a.dim(),
                lerp(&a.x, &b.x, theta),
                lerp(&a.v, &b.v, theta),
            ),
            Interpolation::Cubic if self.nodes.len() >= 4 => {
                let start = k.saturating_sub(1).min(self.nodes.len() - 4);
                let st = [
                    &self.nodes[start],
                    &self.nodes[start + 1],
                    &self.nodes[start + 2],
                    &self.nodes[start + 3],
                ];
                let w = u - start as f64;
                let x = newton_cubic(st.map(|n| n.x.as_slice()), w);
                let v = newton_cubic(st.map(|n| n.v.as_slice()), w);
                ParticleState::from_parts(s, a.n(), a.dim(), x, v)
            }
            Interpolation::Cubic => ParticleState::from_parts(
                s,
                a.n(),
                a.dim(),
                lerp(&a.x, &b.x, theta),
                lerp(&a.v, &b.v, theta),
            ),
        };
        Ok(Cow::Owned(state))
    }
}

/// Cubic through four equispaced samples at 0, 1, 2, 3 evaluated at `w`,
/// in Newton forward-difference form (constant data stay exactly constant).
fn newton_cubic(f: [&[f64]; 4], w: f64) -> Vec<f64> {
    let c1 = w;
    let c2 = w * (w - 1.0) / 2.0;
    let c3 = w * (w - 1.0) * (w - 2.0) / 6.0;
    (0..f[0].len())
        .map(|j| {
            let (f0, f1, f2, f3) = (f[0][j], f[1][j], f[2][j], f[3][j]);
            let d1 = f1 - f0;
            let d2 = f2 - 2.0 * f1 + f0;
            let d3 = f3 - 3.0 * f2 + 3.0 * f1 - f0;
            f0 + c1 * d1 + c2 * d2 + c3 * d3
        })
        .collect()
}
