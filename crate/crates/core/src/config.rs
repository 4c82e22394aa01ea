//! JSON run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DelayFunction, DelayKernel, InfluenceFunction};
use crate::meanfield::NestedSampler;
use crate::model::ModelSpec;
use crate::particle::{
    random_initial_state, InitialHistory, InitialShape, Interpolation, SimConfig,
};

/// How the initial history is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Positions uniform in [−L/2, L/2]^d, velocities uniform in the ball of radius R.
    Random {
        box_side: f64,
        speed_radius: f64,
        #[serde(default)]
        shape: InitialShape,
    },
    /// Same law as `random`, drawn from a nested quasi-random sequence.
    Nested {
        box_side: f64,
        speed_radius: f64,
        #[serde(default)]
        shape: InitialShape,
    },
    /// Time-zero state given per agent, continued backwards by `shape`.
    Explicit {
        x: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        #[serde(default)]
        shape: InitialShape,
    },
    /// Full trajectories on [−τ₀, 0]: one flattened N·d row per sample time.
    Sampled {
        times: Vec<f64>,
        x: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
}

fn default_record_every() -> usize {
    1
}

fn default_velocity_weight() -> f64 {
    1.0
}

/// Contents of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub dim: usize,
    pub psi: InfluenceFunction,
    pub alpha: DelayKernel,
    pub tau: DelayFunction,
    /// Step size; defaults to (minimal lag)/16.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub seed: u64,
    pub initial: InitialSpec,
    #[serde(default)]
    pub interpolation: Interpolation,
    #[serde(default = "default_velocity_weight")]
    pub w1_velocity_weight: f64,
}

impl RunConfig {
    /// Parses a config; schema errors carry the dotted path of the offending field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::invalid(
                if path == "." {
                    "config".to_string()
                } else {
                    path
                },
                inner.to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::invalid(
                    "dt",
                    format!("must be positive and finite, got {dt}"),
                ));
            }
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid(
                    "t_end",
                    format!("must be positive and finite, got {t}"),
                ));
            }
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be >= 1"));
        }
        if !(self.w1_velocity_weight >= 0.0 && self.w1_velocity_weight.is_finite()) {
            return Err(Error::invalid(
                "w1_velocity_weight",
                "must be finite and >= 0",
            ));
        }
        self.model()?;
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn model(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.psi, self.alpha, self.tau, self.n, self.dim)
    }

    pub fn dt(&self) -> Result<f64> {
        Ok(self.dt.unwrap_or(self.model()?.min_lag() / 16.0))
    }

    /// Sampler for the `random` and `nested` initial kinds, seeded with `seed`.
    pub fn sampler(&self) -> Option<NestedSampler> {
        match self.initial {
            InitialSpec::Random {
                box_side,
                speed_radius,
                shape,
            }
            | InitialSpec::Nested {
                box_side,
                speed_radius,
                shape,
            } => Some(NestedSampler {
                box_side,
                speed_radius,
                seed: self.seed,
                shape,
            }),
            _ => None,
        }
    }

    pub fn initial_history(&self) -> Result<InitialHistory> {
        let (n, dim) = (self.n, self.dim);
        match &self.initial {
            InitialSpec::Random {
                box_side,
                speed_radius,
                shape,
            } => {
                let (x, v) = random_initial_state(n, dim, *box_side, *speed_radius, self.seed)
                    .map_err(|e| prefix("initial", e))?;
                shape.build(n, dim, x, v)
            }
            InitialSpec::Nested { .. } => self
                .sampler()
                .expect("nested kind has a sampler")
                .initial_history(n, dim)
                .map_err(|e| prefix("initial", e)),
            InitialSpec::Explicit { x, v, shape } => {
                let x = flatten_agents("initial.x", x, n, dim)?;
                let v = flatten_agents("initial.v", v, n, dim)?;
                shape.build(n, dim, x, v)
            }
            InitialSpec::Sampled { times, x, v } => {
                InitialHistory::sampled(n, dim, times.clone(), x.clone(), v.clone())
                    .map_err(|e| prefix("initial", e))
            }
        }
    }

    /// Simulation setup up to `t_end` (falls back to the file's `t_end`).
    pub fn sim_config(&self, t_end: Option<f64>) -> Result<SimConfig> {
        let t_end = t_end.or(self.t_end).ok_or_else(|| {
            Error::invalid(
                "t_end",
                "missing field `t_end` (required for time integration)",
            )
        })?;
        Ok(
            SimConfig::new(self.model()?, self.dt()?, t_end, self.initial_history()?)?
                .with_seed(self.seed)
                .with_record_every(self.record_every)?
                .with_interpolation(self.interpolation),
        )
    }

    /// Setup for runs that only look at the initial history.
    pub fn history_config(&self) -> Result<SimConfig> {
        self.sim_config(Some(self.t_end.unwrap_or(self.dt()?)))
    }
}

fn prefix(path: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => {
            Error::invalid(format!("{path}.{field}"), reason)
        }
        other => other,
    }
}

fn flatten_agents(field: &str, rows: &[Vec<f64>], n: usize, dim: usize) -> Result<Vec<f64>> {
    if rows.len() != n {
        return Err(Error::invalid(
            field,
            format!("expected {n} agents, got {}", rows.len()),
        ));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != dim) {
        return Err(Error::invalid(
            format!("{field}[{i}]"),
            format!("expected {dim} components, got {}", rows[i].len()),
        ));
    }
    Ok(rows.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "n": 4, "dim": 2,
        "psi": {"family": "cucker_smale", "params": {"beta": 0.25}},
        "alpha": {"family": "constant", "params": {"c": 1.0}},
        "tau": {"family": "constant_delay", "params": {"tau": 0.2}},
        "t_end": 1.0,
        "initial": {"kind": "random", "box_side": 2.0, "speed_radius": 1.0}
    }"#;

    #[test]
    fn defaults() {
        let c = RunConfig::from_json_str(BASE).unwrap();
        assert_eq!(c.record_every, 1);
        assert_eq!(c.w1_velocity_weight, 1.0);
        assert_eq!(c.dt().unwrap(), 0.2 / 16.0);
        let s = c.sim_config(None).unwrap();
        assert_eq!(s.initial().n(), 4);
    }

    #[test]
    fn missing_field_names_it() {
        let text = BASE.replace(
            r#""psi": {"family": "cucker_smale", "params": {"beta": 0.25}},"#,
            "",
        );
        let msg = RunConfig::from_json_str(&text).unwrap_err().to_string();
        assert!(msg.contains("psi"), "{msg}");
    }

    #[test]
    fn nested_errors_carry_paths() {
        let text = BASE.replace(r#""beta": 0.25"#, r#""beta": "x""#);
        let msg = RunConfig::from_json_str(&text).unwrap_err().to_string();
        assert!(msg.contains("psi.params.beta"), "{msg}");
        let text = BASE.replace(r#""t_end": 1.0"#, r#""t_end": 1.0, "bogus": 1"#);
        assert!(RunConfig::from_json_str(&text)
            .unwrap_err()
            .to_string()
            .contains("bogus"));
        let text = BASE.replace(r#""beta": 0.25"#, r#""beta": -1"#);
        let msg = RunConfig::from_json_str(&text).unwrap_err().to_string();
        assert!(msg.contains("psi") && msg.contains("beta"), "{msg}");
    }

    #[test]
    fn explicit_initial_shape_checked() {
        let text = BASE.replace(
            r#"{"kind": "random", "box_side": 2.0, "speed_radius": 1.0}"#,
            r#"{"kind": "explicit", "x": [[0,0],[1,0],[0,1],[1]], "v": [[0,0],[0,0],[0,0],[0,0]]}"#,
        );
        let c = RunConfig::from_json_str(&text).unwrap();
        let msg = c.initial_history().unwrap_err().to_string();
        assert!(msg.contains("initial.x[3]"), "{msg}");
    }

    #[test]
    fn t_end_required_for_integration() {
        let text = BASE.replace(r#""t_end": 1.0,"#, "");
        let c = RunConfig::from_json_str(&text).unwrap();
        assert!(c
            .sim_config(None)
            .unwrap_err()
            .to_string()
            .contains("t_end"));
        assert!(c.history_config().is_ok());
    }
}
