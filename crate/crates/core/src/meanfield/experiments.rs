use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::NestedSampler;
use super::wasserstein::wasserstein1_weighted;
use super::{empirical_solution, KineticRun};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::particle::{norm, InitialHistory, SimConfig};

/// Map applied to the initial data of the second run in a stability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    None,
    /// Shift every position by `shift` along the whole history.
    Translate {
        shift: Vec<f64>,
    },
    /// Add `delta` to the velocity of one agent along the whole history.
    VelocityKick {
        agent: usize,
        delta: Vec<f64>,
    },
    /// Add an independent random vector of norm `magnitude` to every velocity.
    RandomVelocity {
        magnitude: f64,
        seed: u64,
    },
}

impl Perturbation {
    /// Size of the perturbation (reported as `epsilon`).
    pub fn magnitude(&self) -> f64 {
        match self {
            Perturbation::None => 0.0,
            Perturbation::Translate { shift } => norm(shift),
            Perturbation::VelocityKick { delta, .. } => norm(delta),
            Perturbation::RandomVelocity { magnitude, .. } => *magnitude,
        }
    }

    pub fn apply(&self, initial: &InitialHistory) -> Result<InitialHistory> {
        let dim = initial.dim();
        let check_len = |name: &str, v: &[f64]| {
            if v.len() == dim {
                Ok(())
            } else {
                Err(Error::invalid(
                    format!("perturbation.{name}"),
                    format!("expected {dim} components, got {}", v.len()),
                ))
            }
        };
        match self {
            Perturbation::None => Ok(initial.clone()),
            Perturbation::Translate { shift } => {
                check_len("shift", shift)?;
                initial.map_agents(|_, x, _| x.iter_mut().zip(shift).for_each(|(c, s)| *c += s))
            }
            Perturbation::VelocityKick { agent, delta } => {
                check_len("delta", delta)?;
                if *agent >= initial.n() {
                    return Err(Error::invalid(
                        "perturbation.agent",
                        format!("no agent {agent} among {}", initial.n()),
                    ));
                }
                initial.map_agents(|i, _, v| {
                    if i == *agent {
                        v.iter_mut().zip(delta).for_each(|(c, d)| *c += d);
                    }
                })
            }
            Perturbation::RandomVelocity { magnitude, seed } => {
                if !(*magnitude >= 0.0 && magnitude.is_finite()) {
                    return Err(Error::invalid(
                        "perturbation.magnitude",
                        "must be finite and >= 0",
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let kicks: Vec<Vec<f64>> = (0..initial.n())
                    .map(|_| loop {
                        let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let r = norm(&g);
                        if r > 1e-3 && r <= 1.0 {
                            break g.iter().map(|c| magnitude * c / r).collect();
                        }
                    })
                    .collect();
                initial.map_agents(|i, _, v| v.iter_mut().zip(&kicks[i]).for_each(|(c, k)| *c += k))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub t: f64,
    pub w1: f64,
}

/// W1(f¹_t, f²_t) over [0, T] and the ratio sup_t W1(f_t) / max_s W1(g_s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub epsilon: f64,
    pub rows: Vec<StabilityRow>,
    pub initial_w1: f64,
    pub sup_w1: f64,
    /// Empirical C(T); defined as 1 when both runs coincide.
    pub ratio: f64,
}

impl StabilityTable {
    /// CSV with columns `epsilon,t,w1,ratio`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epsilon", "t", "w1", "ratio"])?;
        for r in &self.rows {
            w.write_record([self.epsilon, r.t, r.w1, self.ratio].map(fmt_f64))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Several stability tables in one CSV with columns `trial,epsilon,t,w1,ratio`.
pub fn write_stability_csv<W: Write>(tables: &[StabilityTable], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["trial", "epsilon", "t", "w1", "ratio"])?;
    for (k, table) in tables.iter().enumerate() {
        for r in &table.rows {
            let mut rec = vec![k.to_string()];
            rec.extend([table.epsilon, r.t, r.w1, table.ratio].map(fmt_f64));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// W1 between matching snapshots of two runs on the same recording grid.
fn pairwise_w1(a: &KineticRun, b: &KineticRun, velocity_weight: f64) -> Result<Vec<(f64, f64)>> {
    a.times()
        .par_iter()
        .zip(a.snapshots().par_iter().zip(b.snapshots().par_iter()))
        .map(|(t, (fa, fb))| Ok((*t, wasserstein1_weighted(fa, fb, velocity_weight)?)))
        .collect()
}

fn ratio_of(t_sup: f64, sup: f64, initial: f64) -> Result<f64> {
    if initial > 0.0 {
        Ok(sup / initial)
    } else if sup == 0.0 {
        Ok(1.0)
    } else {
        Err(Error::Determinism { t: t_sup, w1: sup })
    }
}

/// Runs `config` and its perturbed copy to `horizon` and tracks their W1
/// distance (phase-space cost with velocity weight `velocity_weight`).
pub fn stability_experiment(
    config: &SimConfig,
    perturbation: &Perturbation,
    horizon: f64,
    velocity_weight: f64,
) -> Result<StabilityTable> {
    let base = config.clone().with_t_end(horizon)?;
    let other = base
        .clone()
        .with_initial(perturbation.apply(config.initial())?)?;
    let (a, b) = rayon::join(|| empirical_solution(&base), || empirical_solution(&other));
    let (a, b) = (a?, b?);
    let dist = pairwise_w1(&a, &b, velocity_weight)?;
    let zero = a.zero_position();
    let initial_w1 = dist[..=zero].iter().map(|p| p.1).fold(0.0, f64::max);
    let rows: Vec<StabilityRow> = dist[zero..]
        .iter()
        .map(|&(t, w1)| StabilityRow { t, w1 })
        .collect();
    let (t_sup, sup_w1) =
        rows.iter().fold(
            (0.0, 0.0),
            |acc, r| if r.w1 > acc.1 { (r.t, r.w1) } else { acc },
        );
    let ratio = ratio_of(t_sup, sup_w1, initial_w1)?;
    Ok(StabilityTable {
        epsilon: perturbation.magnitude(),
        rows,
        initial_w1,
        sup_w1,
        ratio,
    })
}

/// One Cauchy pair (N, N_next) of the mean-field experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_next")]
    pub n_next: usize,
    pub t: f64,
    /// W1(f^N_T, f^{N_next}_T)
    pub w1: f64,
    /// max_{s ∈ [−τ₀, 0]} W1(g^N_s, g^{N_next}_s)
    pub w1_initial: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Largest observed ratio W1(f_T) / max_s W1(g_s) over the pairs.
    pub empirical_c: f64,
}

impl ConvergenceTable {
    /// CSV with columns `N,N_next,t,w1,w1_initial,ratio`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["N", "N_next", "t", "w1", "w1_initial", "ratio"])?;
        for r in &self.rows {
            let mut rec = vec![r.n.to_string(), r.n_next.to_string()];
            rec.extend([r.t, r.w1, r.w1_initial, r.ratio].map(fmt_f64));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the base model for every N in `n_list` from nested samples of the
/// same g and reports W1 between consecutive entries at the horizon.
pub fn mean_field_experiment(
    base: &SimConfig,
    sampler: &NestedSampler,
    n_list: &[usize],
    horizon: f64,
    velocity_weight: f64,
) -> Result<ConvergenceTable> {
    if n_list.len() < 2 {
        return Err(Error::invalid("N", "need at least two agent counts"));
    }
    if n_list.iter().any(|&n| n < 2) || n_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(
            "N",
            "agent counts must be >= 2 and nondecreasing",
        ));
    }
    let dim = base.model().dim();
    let base = base.clone().with_t_end(horizon)?;
    let mut distinct: Vec<usize> = n_list.to_vec();
    distinct.dedup();
    let runs: BTreeMap<usize, KineticRun> = distinct
        .par_iter()
        .map(|&n| {
            let cfg = base
                .clone()
                .with_initial(sampler.initial_history(n, dim)?)?;
            Ok((n, empirical_solution(&cfg)?))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(n_list.len() - 1);
    for pair in n_list.windows(2) {
        let (a, b) = (&runs[&pair[0]], &runs[&pair[1]]);
        let zero = a.zero_position();
        let initial: Vec<f64> = a.snapshots()[..=zero]
            .par_iter()
            .zip(b.snapshots()[..=zero].par_iter())
            .map(|(fa, fb)| wasserstein1_weighted(fa, fb, velocity_weight))
            .collect::<Result<_>>()?;
        let w1_initial = initial.into_iter().fold(0.0, f64::max);
        let t = *a.times().last().expect("nonempty run");
        let w1 = wasserstein1_weighted(a.final_measure(), b.final_measure(), velocity_weight)?;
        rows.push(ConvergenceRow {
            n: pair[0],
            n_next: pair[1],
            t,
            w1,
            w1_initial,
            ratio: ratio_of(t, w1, w1_initial)?,
        });
    }
    let empirical_c = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(ConvergenceTable { rows, empirical_c })
}
