use std::io::Write;

use super::ParticleState;
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// States recorded on the uniform grid t_j = j·δ, δ = `stride`·Δt, starting
/// at j = `first_index` ≤ 0 so that the history [−τ₀, 0] is included.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    n: usize,
    dim: usize,
    dt: f64,
    stride: usize,
    first_index: i64,
    tau0: f64,
    frames: Vec<ParticleState>,
}

impl TrajectoryRecord {
    pub(crate) fn new(
        n: usize,
        dim: usize,
        dt: f64,
        stride: usize,
        first_index: i64,
        tau0: f64,
        frames: Vec<ParticleState>,
    ) -> Self {
        TrajectoryRecord {
            n,
            dim,
            dt,
            stride,
            first_index,
            tau0,
            frames,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Integrator step Δt.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Spacing δ between recorded frames.
    pub fn delta(&self) -> f64 {
        self.dt * self.stride as f64
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    /// Grid index of the first frame (≤ 0).
    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    pub fn frames(&self) -> &[ParticleState] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Position of the t = 0 frame in `frames()`.
    pub fn zero_position(&self) -> usize {
        (-self.first_index) as usize
    }

    /// Frames with t ≥ 0.
    pub fn forward(&self) -> &[ParticleState] {
        &self.frames[self.zero_position()..]
    }

    pub fn initial_state(&self) -> &ParticleState {
        &self.frames[self.zero_position()]
    }

    pub fn final_state(&self) -> &ParticleState {
        self.frames
            .last()
            .expect("a record always holds the t = 0 frame")
    }

    /// Frame nearest to time `t`, if `t` lies within the recorded range.
    pub fn frame_at(&self, t: f64) -> Option<&ParticleState> {
        let j = (t / self.delta()).round() as i64 - self.first_index;
        if j < 0 {
            return None;
        }
        self.frames.get(j as usize)
    }

    /// Keeps every `factor`-th frame of the grid (aligned so t = 0 stays).
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("factor", "must be >= 1"));
        }
        let f = factor as i64;
        let first = self.first_index.div_euclid(f) + i64::from(self.first_index.rem_euclid(f) != 0);
        let frames = self
            .frames
            .iter()
            .enumerate()
            .filter(|(j, _)| (*j as i64 + self.first_index).rem_euclid(f) == 0)
            .map(|(_, s)| s.clone())
            .collect();
        Ok(TrajectoryRecord {
            stride: self.stride * factor,
            first_index: first,
            frames,
            ..self.clone_header()
        })
    }

    fn clone_header(&self) -> Self {
        TrajectoryRecord {
            frames: Vec::new(),
            ..*self
        }
    }

    /// Long-format CSV: `t,i,x_1..x_d,v_1..v_d`, one row per agent and frame.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string(), "i".to_string()];
        header.extend((1..=self.dim).map(|k| format!("x_{k}")));
        header.extend((1..=self.dim).map(|k| format!("v_{k}")));
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(2 + 2 * self.dim);
        for frame in &self.frames {
            for i in 0..self.n {
                row.clear();
                row.push(fmt_f64(frame.t));
                row.push(i.to_string());
                row.extend(frame.position(i).iter().map(|c| fmt_f64(*c)));
                row.extend(frame.velocity(i).iter().map(|c| fmt_f64(*c)));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
