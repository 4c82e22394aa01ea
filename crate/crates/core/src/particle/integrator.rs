use std::borrow::Cow;

use rayon::prelude::*;

use super::history::{HistoryBuffer, InitialHistory, Interpolation};
use super::record::TrajectoryRecord;
use super::weights::MIN_DENOMINATOR;
use super::{dist, ParticleState};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::quadrature::grid_trapezoid;

/// Agents above which the per-agent force loop is split across threads.
const PARALLEL_AGENTS: usize = 24;

/// Everything needed for one deterministic run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    model: ModelSpec,
    dt: f64,
    t_end: f64,
    initial: InitialHistory,
    seed: u64,
    record_every: usize,
    interpolation: Interpolation,
}

impl SimConfig {
    /// Validates the step size (Δt ≤ τ_min/4 where τ_min is the shortest lag
    /// the force reads), the horizon and the shape of the initial data.
    pub fn new(model: ModelSpec, dt: f64, t_end: f64, initial: InitialHistory) -> Result<Self> {
        let cfg = SimConfig {
            model,
            dt,
            t_end,
            initial,
            seed: 0,
            record_every: 1,
            interpolation: Interpolation::Linear,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(
                "dt",
                format!("must be positive and finite, got {}", self.dt),
            ));
        }
        let max_dt = self.model.min_lag() / 4.0;
        if self.dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "dt",
                format!(
                    "step {} exceeds the method-of-steps limit tau_min/4 = {max_dt}",
                    self.dt
                ),
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid(
                "t_end",
                format!("must be positive and finite, got {}", self.t_end),
            ));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be >= 1"));
        }
        if self.initial.n() != self.model.n() || self.initial.dim() != self.model.dim() {
            return Err(Error::invalid(
                "initial",
                format!(
                    "initial data have N = {}, d = {} but the model has N = {}, d = {}",
                    self.initial.n(),
                    self.initial.dim(),
                    self.model.n(),
                    self.model.dim()
                ),
            ));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_record_every(mut self, record_every: usize) -> Result<Self> {
        self.record_every = record_every;
        self.validate()?;
        Ok(self)
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn with_initial(mut self, initial: InitialHistory) -> Result<Self> {
        if initial.n() != self.model.n() {
            self.model = self.model.with_n(initial.n())?;
        }
        self.initial = initial;
        self.validate()?;
        Ok(self)
    }

    pub fn with_t_end(mut self, t_end: f64) -> Result<Self> {
        self.t_end = t_end;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn initial(&self) -> &InitialHistory {
        &self.initial
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn record_every(&self) -> usize {
        self.record_every
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Number of integrator steps needed to reach `t_end`.
    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt - 1e-9).ceil() as u64
    }

    /// History buffer sampled from the initial data on [−τ₀, 0].
    pub fn seed_history(&self) -> Result<HistoryBuffer> {
        HistoryBuffer::seed(
            &self.initial,
            self.dt,
            self.model.tau0(),
            self.interpolation,
        )
    }
}

/// Where a quadrature point of the delay window reads its state from.
enum Source<'a> {
    History(Cow<'a, ParticleState>),
    Current,
}

/// Quadrature of the delay window at time `t` plus the normalizer 1/h(t).
fn delay_window<'a>(
    model: &ModelSpec,
    buffer: &'a HistoryBuffer,
    t: f64,
) -> Result<(Vec<(f64, Source<'a>)>, f64)> {
    if let Some(lag) = model.kernel.dirac_lag() {
        let s = t - lag;
        return Ok((vec![(1.0, Source::History(buffer.query(s)?))], 1.0));
    }
    let dt = buffer.dt();
    let lo = t - model.delay.at(t);
    let mut points = Vec::new();
    for (s, w) in grid_trapezoid(lo, t, 0.0, dt) {
        let weight = w * model.kernel.density(t - s);
        let src = if s >= t - 1e-9 * dt {
            Source::Current
        } else {
            Source::History(buffer.query(s)?)
        };
        points.push((weight, src));
    }
    Ok((points, 1.0 / model.h(t)))
}

/// Acceleration of agent `i`, accumulated into `out` (length d).
#[allow(clippy::too_many_arguments)]
fn agent_acceleration(
    model: &ModelSpec,
    points: &[(f64, Source<'_>)],
    inv_h: f64,
    i: usize,
    cur_x: &[f64],
    cur_v: &[f64],
    v_i: &[f64],
    t: f64,
    out: &mut [f64],
) -> Result<()> {
    let d = model.dim();
    let n = model.n();
    out.iter_mut().for_each(|c| *c = 0.0);
    if n < 2 {
        return Ok(());
    }
    let x_i = &cur_x[i * d..(i + 1) * d];
    let mut num = vec![0.0; d];
    for (weight, src) in points {
        let (xs, vs) = match src {
            Source::History(state) => (state.x.as_slice(), state.v.as_slice()),
            Source::Current => (cur_x, cur_v),
        };
        num.iter_mut().for_each(|c| *c = 0.0);
        let mut den = 0.0;
        for k in (0..n).filter(|&k| k != i) {
            let psi = model.psi.eval_unchecked(dist(&xs[k * d..(k + 1) * d], x_i));
            den += psi;
            for (c, (vk, vi)) in num.iter_mut().zip(vs[k * d..(k + 1) * d].iter().zip(v_i)) {
                *c += psi * (vk - vi);
            }
        }
        if den < MIN_DENOMINATOR {
            return Err(Error::WeightUnderflow { agent: i, s: t });
        }
        let scale = weight / den;
        for (o, c) in out.iter_mut().zip(&num) {
            *o += scale * c;
        }
    }
    out.iter_mut().for_each(|c| *c *= inv_h);
    Ok(())
}

/// Velocity right-hand side for all agents at stage time `t ≥ latest node`,
/// given the stage state (`cur_x`, `cur_v`) at `t`.
fn accelerations(
    model: &ModelSpec,
    buffer: &HistoryBuffer,
    t: f64,
    cur_x: &[f64],
    cur_v: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let d = model.dim();
    let (points, inv_h) = delay_window(model, buffer, t)?;
    let body = |(i, acc): (usize, &mut [f64])| {
        agent_acceleration(
            model,
            &points,
            inv_h,
            i,
            cur_x,
            cur_v,
            &cur_v[i * d..(i + 1) * d],
            t,
            acc,
        )
    };
    if model.n() >= PARALLEL_AGENTS {
        out.par_chunks_mut(d).enumerate().try_for_each(body)
    } else {
        out.chunks_mut(d).enumerate().try_for_each(body)
    }
}

/// dv_i/dt at time t = newest node of `history`, with the own velocity v_i(t)
/// supplied explicitly. The delay integral runs over [t − τ(t), t] by
/// composite trapezoid on the history grid (point evaluation at t − τ̄ for the
/// Dirac kernel).
pub fn rhs_velocity(
    i: usize,
    t: f64,
    v_i: &[f64],
    history: &HistoryBuffer,
    model: &ModelSpec,
) -> Result<Vec<f64>> {
    let latest = history.latest();
    if (t - history.latest_time()).abs() > 1e-9 * history.dt() {
        return Err(Error::HistoryOverflow {
            requested: t,
            latest: history.latest_time(),
        });
    }
    if i >= model.n() || v_i.len() != model.dim() {
        return Err(Error::invalid(
            "i",
            "agent index or velocity dimension out of range",
        ));
    }
    let earliest_needed = match model.kernel.dirac_lag() {
        Some(lag) => t - lag,
        None => t - model.delay.at(t),
    };
    if earliest_needed < history.earliest_time() - 1e-9 * history.dt() {
        return Err(Error::HistoryUnderflow {
            required: earliest_needed,
            earliest: history.earliest_time(),
        });
    }
    let (points, inv_h) = delay_window(model, history, t)?;
    let mut out = vec![0.0; model.dim()];
    agent_acceleration(
        model, &points, inv_h, i, &latest.x, &latest.v, v_i, t, &mut out,
    )?;
    Ok(out)
}

/// Advances the history by one classical RK4 step of size Δt (the buffer's
/// grid step). Delayed reads inside the stages hit committed history only.
pub fn step(history: &mut HistoryBuffer, model: &ModelSpec) -> Result<()> {
    let dt = history.dt();
    if dt > model.min_lag() / 4.0 * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "dt",
            "step exceeds the method-of-steps limit tau_min/4",
        ));
    }
    if history.span() < model.tau0() {
        return Err(Error::invalid(
            "history",
            "buffer span is shorter than tau0",
        ));
    }
    let index = history.latest_index();
    let t = index as f64 * dt;
    let t_half = (index as f64 + 0.5) * dt;
    let t_next = (index + 1) as f64 * dt;
    let y = history.latest();
    let (x, v) = (&y.x, &y.v);
    let len = x.len();

    let axpy = |base: &[f64], a: f64, dir: &[f64]| -> Vec<f64> {
        base.iter().zip(dir).map(|(b, d)| b + a * d).collect()
    };

    let mut k1 = vec![0.0; len];
    accelerations(model, history, t, x, v, &mut k1)?;

    let x2 = axpy(x, 0.5 * dt, v);
    let v2 = axpy(v, 0.5 * dt, &k1);
    let mut k2 = vec![0.0; len];
    accelerations(model, history, t_half, &x2, &v2, &mut k2)?;

    let x3 = axpy(x, 0.5 * dt, &v2);
    let v3 = axpy(v, 0.5 * dt, &k2);
    let mut k3 = vec![0.0; len];
    accelerations(model, history, t_half, &x3, &v3, &mut k3)?;

    let x4 = axpy(x, dt, &v3);
    let v4 = axpy(v, dt, &k3);
    let mut k4 = vec![0.0; len];
    accelerations(model, history, t_next, &x4, &v4, &mut k4)?;

    let sixth = dt / 6.0;
    let x_new: Vec<f64> = (0..len)
        .map(|j| x[j] + sixth * (v[j] + 2.0 * v2[j] + 2.0 * v3[j] + v4[j]))
        .collect();
    let v_new: Vec<f64> = (0..len)
        .map(|j| v[j] + sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect();
    let next = ParticleState::from_parts(t_next, model.n(), model.dim(), x_new, v_new);
    if !next.is_finite() {
        return Err(Error::NonFinite { t: t_next });
    }
    history.push(next);
    Ok(())
}

/// A run in progress: the model plus its sliding history.
#[derive(Debug, Clone)]
pub struct Simulation {
    model: ModelSpec,
    history: HistoryBuffer,
    steps: u64,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        Ok(Simulation {
            model: *config.model(),
            history: config.seed_history()?,
            steps: 0,
        })
    }

    pub fn step(&mut self) -> Result<()> {
        step(&mut self.history, &self.model)?;
        self.steps += 1;
        Ok(())
    }

    pub fn state(&self) -> &ParticleState {
        self.history.latest()
    }

    pub fn time(&self) -> f64 {
        self.history.latest_time()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn history(&self) -> &HistoryBuffer {
        &self.history
    }
}

/// Seeds the history, steps to `t_end` and records every `record_every`-th
/// state. History frames on [−τ₀, 0] are recorded at the same stride.
pub fn simulate(config: &SimConfig) -> Result<TrajectoryRecord> {
    let mut sim = Simulation::new(config)?;
    let model = config.model();
    let stride = config.record_every();
    let dt = config.dt();
    let delta = dt * stride as f64;
    let back = (model.tau0() / delta - 1e-9).ceil() as i64;

    let mut frames =
        Vec::with_capacity(back as usize + (config.steps() / stride as u64) as usize + 1);
    for j in -back..0 {
        let s = (j * stride as i64) as f64 * dt;
        let mut frame = config.initial().state_at(s);
        frame.t = s;
        frames.push(frame);
    }
    frames.push(sim.state().clone());
    for k in 1..=config.steps() {
        sim.step()?;
        if k % stride as u64 == 0 {
            frames.push(sim.state().clone());
        }
    }
    Ok(TrajectoryRecord::new(
        model.n(),
        model.dim(),
        dt,
        stride,
        -back,
        model.tau0(),
        frames,
    ))
}
