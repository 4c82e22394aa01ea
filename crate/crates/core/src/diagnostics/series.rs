use crate::error::{Error, Result};
use crate::quadrature::grid_trapezoid;

const SNAP: f64 = 1e-9;

/// Scalar samples on the uniform grid t_j = (first + j)·δ, linearly
/// interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    first: i64,
    delta: f64,
    values: Vec<f64>,
}

impl Series {
    pub fn new(first: i64, delta: f64, values: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(
                "delta",
                "grid step must be positive and finite",
            ));
        }
        if values.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        Ok(Series {
            first,
            delta,
            values,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self, j: usize) -> f64 {
        (self.first + j as i64) as f64 * self.delta
    }

    pub fn start(&self) -> f64 {
        self.time(0)
    }

    pub fn end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    pub fn value_at(&self, t: f64) -> Result<f64> {
        let u = t / self.delta - self.first as f64;
        let last = (self.values.len() - 1) as f64;
        if u < -SNAP {
            return Err(Error::HistoryUnderflow {
                required: t,
                earliest: self.start(),
            });
        }
        if u > last + SNAP {
            return Err(Error::HistoryOverflow {
                requested: t,
                latest: self.end(),
            });
        }
        let u = u.clamp(0.0, last);
        let j = u.floor();
        let frac = u - j;
        let j = j as usize;
        if frac < SNAP || j + 1 >= self.values.len() {
            return Ok(self.values[j]);
        }
        if frac > 1.0 - SNAP {
            return Ok(self.values[j + 1]);
        }
        let (a, b) = (self.values[j], self.values[j + 1]);
        Ok(a + frac * (b - a))
    }

    /// ∫_a^b of the interpolant by trapezoid on the grid nodes.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if b < a {
            return Ok(-self.integral(b, a)?);
        }
        grid_trapezoid(a, b, 0.0, self.delta)
            .into_iter()
            .try_fold(0.0, |acc, (s, w)| Ok(acc + w * self.value_at(s)?))
    }

    /// Maximum over samples with t in [a, b].
    pub fn max_on(&self, a: f64, b: f64) -> f64 {
        (0..self.values.len())
            .filter(|&j| {
                let t = self.time(j);
                t >= a - SNAP * self.delta && t <= b + SNAP * self.delta
            })
            .map(|j| self.values[j])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
