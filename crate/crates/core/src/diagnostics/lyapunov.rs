use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diameters;
use super::flocking::kernel_integral;
use super::series::Series;
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::ModelSpec;
use crate::particle::{ParticleState, TrajectoryRecord};

/// Diameter profiles over the whole record (history included) and R_v from
/// the recorded history frames.
pub(crate) struct RecordProfile {
    pub d_x: Series,
    pub d_v: Series,
    pub r_v: f64,
    zero: usize,
}

impl RecordProfile {
    pub(crate) fn new(record: &TrajectoryRecord) -> Result<Self> {
        let (d_x, d_v): (Vec<f64>, Vec<f64>) = record.frames().iter().map(diameters).unzip();
        let zero = record.zero_position();
        let r_v = record.frames()[..=zero]
            .iter()
            .map(ParticleState::max_speed)
            .fold(0.0, f64::max);
        Ok(RecordProfile {
            d_x: Series::new(record.first_index(), record.delta(), d_x)?,
            d_v: Series::new(record.first_index(), record.delta(), d_v)?,
            r_v,
            zero,
        })
    }

    fn lyapunov(&self, t: f64, model: &ModelSpec) -> Result<f64> {
        let delta = self.d_x.delta();
        let tau = model.delay.at(t);
        let shift = self.r_v * model.tau0();
        let (d_x, d_v) = (&self.d_x, &self.d_v);
        let head = model.h(t) * d_v.value_at(t)?;
        let spread = model.beta_n()
            * kernel_integral(&model.kernel, tau, delta, |s| {
                Ok(model
                    .psi
                    .integral(d_x.value_at(-s)? + shift, d_x.value_at(t - s)? + shift)?
                    .abs())
            })?;
        let memory = kernel_integral(&model.kernel, tau, delta, |s| d_v.integral(t - s, t))?;
        Ok(head + spread + memory)
    }
}

/// L(t) = h(t)d_V(t) + β_N ∫₀^{τ(t)} α(s) |∫_{d_X(−s)+R_vτ₀}^{d_X(t−s)+R_vτ₀} ψ| ds
///        + ∫₀^{τ(t)} α(s) ∫_{−s}^0 d_V(t+z) dz ds,
/// with all integrals by trapezoid on the recording grid.
pub fn lyapunov(t: f64, trajectory: &TrajectoryRecord, model: &ModelSpec) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain {
            what: "lyapunov time",
            expected: ">= 0",
            value: t,
        });
    }
    RecordProfile::new(trajectory)?.lyapunov(t, model)
}

/// Worst violations of the two discrete Dini inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiniResiduals {
    /// max_k (|Δd_X/δ| − d_V)₊
    pub position: f64,
    /// max_k (Δd_V/δ − [(1/h)∫α(t−s)(1 − β_Nψ(d_X(s)+R_vτ₀))d_V(s)ds − d_V])₊
    pub velocity: f64,
}

/// Rounding allowance, in units of machine epsilon times coordinate size.
const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

/// Forward-difference check of D⁺d_X ≤ d_V and of the velocity-diameter
/// inequality at every recorded t_k ≥ 0 with a successor. Quotients are
/// credited with a rounding allowance of 64ε·(coordinate scale)/δ.
pub fn verify_dini_inequalities(
    trajectory: &TrajectoryRecord,
    model: &ModelSpec,
) -> Result<DiniResiduals> {
    let forward = trajectory.forward().len();
    if forward < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: forward,
        });
    }
    let prof = RecordProfile::new(trajectory)?;
    let delta = trajectory.delta();
    let shift = prof.r_v * model.tau0();
    let beta = model.beta_n();
    let (dx, dv) = (prof.d_x.values(), prof.d_v.values());
    let (d_x, d_v) = (&prof.d_x, &prof.d_v);
    let frames = trajectory.frames();
    let scale_x = |k: usize| frames[k].x.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let scale_v = |k: usize| frames[k].v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    (prof.zero..dx.len() - 1)
        .into_par_iter()
        .map(|k| {
            let t = prof.d_x.time(k);
            // A difference quotient cannot resolve changes below the rounding
            // error of the coordinates it is built from.
            let slack_x = ROUNDOFF * (scale_x(k) + scale_x(k + 1)) / delta;
            let slack_v = ROUNDOFF * (scale_v(k) + scale_v(k + 1)) / delta;
            let position = ((dx[k + 1] - dx[k]).abs() / delta - dv[k] - slack_x).max(0.0);
            let window = kernel_integral(&model.kernel, model.delay.at(t), delta, |s| {
                let contraction =
                    1.0 - beta * model.psi.eval_unchecked(d_x.value_at(t - s)? + shift);
                Ok(contraction * d_v.value_at(t - s)?)
            })?;
            let bound = window / model.h(t) - dv[k];
            let velocity = ((dv[k + 1] - dv[k]) / delta - bound - slack_v).max(0.0);
            Ok(DiniResiduals { position, velocity })
        })
        .try_reduce(
            || DiniResiduals {
                position: 0.0,
                velocity: 0.0,
            },
            |a, b| {
                Ok(DiniResiduals {
                    position: a.position.max(b.position),
                    velocity: a.velocity.max(b.velocity),
                })
            },
        )
}

/// One row of the per-frame diagnostics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    #[serde(rename = "d_X")]
    pub d_x: f64,
    #[serde(rename = "d_V")]
    pub d_v: f64,
    pub max_speed: f64,
    pub lyapunov: f64,
}

/// Diameters, max speed and L(t) at every recorded t ≥ 0.
pub fn diagnostics_table(
    trajectory: &TrajectoryRecord,
    model: &ModelSpec,
) -> Result<Vec<DiagnosticsRow>> {
    let prof = RecordProfile::new(trajectory)?;
    let frames = trajectory.frames();
    (prof.zero..frames.len())
        .into_par_iter()
        .map(|j| {
            let t = prof.d_x.time(j);
            Ok(DiagnosticsRow {
                t,
                d_x: prof.d_x.values()[j],
                d_v: prof.d_v.values()[j],
                max_speed: frames[j].max_speed(),
                lyapunov: prof.lyapunov(t, model)?,
            })
        })
        .collect()
}

impl DiagnosticsRow {
    /// Writes `t,d_X,d_V,max_speed,lyapunov` with full double precision.
    pub fn write_csv<W: Write>(rows: &[DiagnosticsRow], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "d_X", "d_V", "max_speed", "lyapunov"])?;
        for r in rows {
            w.write_record([r.t, r.d_x, r.d_v, r.max_speed, r.lyapunov].map(fmt_f64))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Vec<DiagnosticsRow>> {
        let mut r = csv::Reader::from_reader(reader);
        r.deserialize()
            .map(|row| row.map_err(Error::from))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::flocking_condition;
    use crate::kernels::{DelayFunction, DelayKernel, InfluenceFunction};
    use crate::particle::{
        random_initial_state, simulate, InitialHistory, ParticleState, SimConfig,
    };

    fn heavy_tail(n: usize, seed: u64, t_end: f64, every: usize) -> (ModelSpec, SimConfig) {
        let m = ModelSpec::new(
            InfluenceFunction::cucker_smale(0.25).unwrap(),
            DelayKernel::constant(1.0).unwrap(),
            DelayFunction::constant(0.2).unwrap(),
            n,
            2,
        )
        .unwrap();
        let (x, v) = random_initial_state(n, 2, 2.0, 1.0, seed).unwrap();
        let init = InitialHistory::straight_line(n, 2, x, v).unwrap();
        let cfg = SimConfig::new(m, 0.0125, t_end, init)
            .unwrap()
            .with_record_every(every)
            .unwrap();
        (m, cfg)
    }

    #[test]
    fn lyapunov_at_zero_equals_condition_lhs() {
        let (m, cfg) = heavy_tail(6, 4, 0.5, 1);
        let rec = simulate(&cfg).unwrap();
        let report = flocking_condition(&cfg.seed_history().unwrap(), &m).unwrap();
        let l0 = lyapunov(0.0, &rec, &m).unwrap();
        assert!(
            (l0 - report.lhs).abs() <= 1e-13 * report.lhs.max(1.0),
            "{l0} vs {}",
            report.lhs
        );
    }

    #[test]
    fn flocked_trajectory_has_zero_lyapunov_and_residuals() {
        let m = ModelSpec::new(
            InfluenceFunction::exponential(),
            DelayKernel::exponential_decay(1.0).unwrap(),
            DelayFunction::constant(0.2).unwrap(),
            4,
            2,
        )
        .unwrap();
        let (x, _) = random_initial_state(4, 2, 2.0, 1.0, 1).unwrap();
        let init = InitialHistory::straight_line(4, 2, x, [0.5, 0.25].repeat(4)).unwrap();
        let rec = simulate(&SimConfig::new(m, 0.025, 1.0, init).unwrap()).unwrap();
        for row in diagnostics_table(&rec, &m).unwrap() {
            assert!(row.lyapunov.abs() <= 1e-12);
        }
        let r = verify_dini_inequalities(&rec, &m).unwrap();
        assert!(r.position <= 1e-9 && r.velocity <= 1e-9);
    }

    #[test]
    fn lyapunov_decreases_on_heavy_tail_run() {
        let (m, cfg) = heavy_tail(8, 7, 3.0, 2);
        let rec = simulate(&cfg).unwrap();
        let rows = diagnostics_table(&rec, &m).unwrap();
        let l0 = rows[0].lyapunov;
        for w in rows.windows(2) {
            assert!(w[1].lyapunov <= w[0].lyapunov + 1e-3 * l0);
        }
    }

    #[test]
    fn tight_position_inequality_converges_at_first_order() {
        // Two agents x = ±(t + t²/2), v = ±(1 + t): D⁺d_X = d_V exactly, and the
        // forward quotient overshoots by exactly δ.
        let m = ModelSpec::new(
            InfluenceFunction::exponential(),
            DelayKernel::constant(1.0).unwrap(),
            DelayFunction::constant(0.2).unwrap(),
            2,
            1,
        )
        .unwrap();
        let record = |delta: f64| {
            let back = (0.2 / delta).ceil() as i64;
            let frames = (-back..=(1.0 / delta) as i64)
                .map(|j| {
                    let t = j as f64 * delta;
                    let (x, v) = if t < 0.0 {
                        (t, 1.0)
                    } else {
                        (t + 0.5 * t * t, 1.0 + t)
                    };
                    ParticleState::new(t, 2, 1, vec![-x, x], vec![-v, v]).unwrap()
                })
                .collect();
            TrajectoryRecord::new(2, 1, delta, 1, -back, 0.2, frames)
        };
        for delta in [0.1, 0.05, 0.025] {
            let r = verify_dini_inequalities(&record(delta), &m).unwrap();
            assert!(
                (r.position - delta).abs() <= 1e-9,
                "{} vs {delta}",
                r.position
            );
        }
    }

    #[test]
    fn too_few_samples() {
        let (m, cfg) = heavy_tail(3, 1, 0.0125, 1);
        let rec = simulate(&cfg).unwrap();
        assert!(matches!(
            verify_dini_inequalities(&rec, &m),
            Err(Error::InsufficientSamples { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let (m, cfg) = heavy_tail(4, 2, 0.5, 4);
        let rows = diagnostics_table(&simulate(&cfg).unwrap(), &m).unwrap();
        let mut buf = Vec::new();
        DiagnosticsRow::write_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("t,d_X,d_V,max_speed,lyapunov\n"));
        let back = DiagnosticsRow::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }
}
