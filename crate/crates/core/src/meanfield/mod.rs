//! Empirical-measure solutions of the delayed Vlasov alignment equation,
//! exact 1-Wasserstein distances and the stability / mean-field experiments.
//!
//! Empirical measures built from particle trajectories are exact
//! measure-valued solutions of the kinetic equation, so every kinetic
//! quantity here is computed from particle runs.

mod assignment;
mod experiments;
mod kinetic;
mod sampling;
mod wasserstein;

pub use assignment::solve_assignment;
pub use experiments::{
    mean_field_experiment, stability_experiment, write_stability_csv, ConvergenceRow,
    ConvergenceTable, Perturbation, StabilityRow, StabilityTable,
};
pub use kinetic::{kinetic_flocking_check, KineticReport};
pub use sampling::{nested_initial_state, NestedSampler};
pub use wasserstein::{wasserstein1, wasserstein1_weighted, LCM_LIMIT};

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::particle::{norm, simulate, ParticleState, SimConfig};

/// Equal-weight atoms (x_i, v_i) in phase space ℝ^d × ℝ^d.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    x: Vec<f64>,
    v: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if x.is_empty() || x.len() != v.len() || x.len() % dim != 0 {
            return Err(Error::invalid(
                "atoms",
                format!("need a nonempty list of {dim}-dimensional (x, v) pairs"),
            ));
        }
        if x.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { t: f64::NAN });
        }
        Ok(EmpiricalMeasure { dim, x, v })
    }

    /// The measure (1/N) Σ δ_{(x_i, v_i)} of a particle state.
    pub fn from_state(state: &ParticleState) -> Self {
        EmpiricalMeasure {
            dim: state.dim(),
            x: state.x.clone(),
            v: state.v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    /// R_X[f] = max |x| over the support.
    pub fn position_radius(&self) -> f64 {
        (0..self.len())
            .map(|i| norm(self.position(i)))
            .fold(0.0, f64::max)
    }

    /// R_V[f] = max |v| over the support.
    pub fn velocity_radius(&self) -> f64 {
        (0..self.len())
            .map(|i| norm(self.velocity(i)))
            .fold(0.0, f64::max)
    }

    /// Support diameters (d_X[f], d_V[f]).
    pub fn diameters(&self) -> (f64, f64) {
        crate::diagnostics::diameters(&ParticleState::from_parts(
            0.0,
            self.len(),
            self.dim,
            self.x.clone(),
            self.v.clone(),
        ))
    }

    /// CSV atom list `x_1..x_d,v_1..v_d`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|k| format!("x_{k}")).collect();
        header.extend((1..=self.dim).map(|k| format!("v_{k}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .position(i)
                .iter()
                .chain(self.velocity(i))
                .map(|c| fmt_f64(*c))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Snapshots f_t of an empirical solution on the recording grid, history included.
#[derive(Debug, Clone)]
pub struct KineticRun {
    times: Vec<f64>,
    snapshots: Vec<EmpiricalMeasure>,
    zero: usize,
    delta: f64,
    first_index: i64,
    config: SimConfig,
}

/// Support radii at one snapshot: instantaneous values and running maxima
/// over [−τ₀, t].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportRadii {
    pub t: f64,
    pub r_x: f64,
    pub r_v: f64,
    pub r_x_running: f64,
    pub r_v_running: f64,
}

impl KineticRun {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[EmpiricalMeasure] {
        &self.snapshots
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Recording step δ.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub(crate) fn first_index(&self) -> i64 {
        self.first_index
    }

    /// Index of the t = 0 snapshot.
    pub fn zero_position(&self) -> usize {
        self.zero
    }

    pub fn final_measure(&self) -> &EmpiricalMeasure {
        self.snapshots
            .last()
            .expect("runs always hold the t = 0 snapshot")
    }

    /// Support radii for every snapshot with t ≥ 0; the running maxima
    /// include the history.
    pub fn support_radii(&self) -> Vec<SupportRadii> {
        let mut r_x_running: f64 = 0.0;
        let mut r_v_running: f64 = 0.0;
        let mut out = Vec::with_capacity(self.snapshots.len() - self.zero);
        for (j, (t, f)) in self.times.iter().zip(&self.snapshots).enumerate() {
            let (r_x, r_v) = (f.position_radius(), f.velocity_radius());
            r_x_running = r_x_running.max(r_x);
            r_v_running = r_v_running.max(r_v);
            if j >= self.zero {
                out.push(SupportRadii {
                    t: *t,
                    r_x,
                    r_v,
                    r_x_running,
                    r_v_running,
                });
            }
        }
        out
    }
}

/// Runs the particle system and wraps each recorded state as the empirical
/// measure f_t^N (atoms are the particle states bit for bit).
pub fn empirical_solution(config: &SimConfig) -> Result<KineticRun> {
    if config.model().n() < 2 {
        return Err(Error::invalid(
            "n",
            "an empirical solution needs N >= 2 atoms",
        ));
    }
    let record = simulate(config)?;
    let times = record.frames().iter().map(|f| f.t).collect();
    let snapshots = record
        .frames()
        .iter()
        .map(EmpiricalMeasure::from_state)
        .collect();
    Ok(KineticRun {
        times,
        snapshots,
        zero: record.zero_position(),
        delta: record.delta(),
        first_index: record.first_index(),
        config: config.clone(),
    })
}
