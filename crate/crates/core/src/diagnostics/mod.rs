//! Diameters, the flocking condition, the Lyapunov functional, discrete
//! Dini residuals and decay-rate fits.

mod fit;
pub(crate) mod flocking;
mod lyapunov;
mod series;

pub use fit::{fit_decay_rate, fit_decay_rate_all};
pub use flocking::{flocking_condition, FlockingReport};
pub use lyapunov::{
    diagnostics_table, lyapunov, verify_dini_inequalities, DiagnosticsRow, DiniResiduals,
};
pub use series::Series;

use crate::particle::{dist, HistoryBuffer, ParticleState};

/// (d_X, d_V): maximal pairwise distance of positions and of velocities.
pub fn diameters(state: &ParticleState) -> (f64, f64) {
    let n = state.n();
    let mut dx: f64 = 0.0;
    let mut dv: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            dx = dx.max(dist(state.position(i), state.position(j)));
            dv = dv.max(dist(state.velocity(i), state.velocity(j)));
        }
    }
    (dx, dv)
}

/// R_v = max over s ∈ [−τ₀, 0] and agents of |v_i(s)|, taken over the buffer
/// nodes plus the interpolated state at −τ₀ when that is not a node.
pub fn max_speed(history: &HistoryBuffer) -> f64 {
    let tau0 = history.span();
    let snap = 1e-9 * history.dt();
    let mut r = history
        .nodes()
        .filter(|s| s.t >= -tau0 - snap && s.t <= snap)
        .map(ParticleState::max_speed)
        .fold(0.0, f64::max);
    if let Ok(edge) = history.query(-tau0) {
        r = r.max(edge.max_speed());
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::{random_initial_state, InitialHistory, Interpolation};

    #[test]
    fn diameter_examples() {
        let one = ParticleState::new(0.0, 1, 2, vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(diameters(&one), (0.0, 0.0));
        let two = ParticleState::new(
            0.0,
            2,
            2,
            vec![0.0, 0.0, 3.0, 4.0],
            vec![1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        assert_eq!(diameters(&two), (5.0, 0.0));
    }

    #[test]
    fn diameters_match_brute_force() {
        let (x, v) = random_initial_state(5, 3, 2.0, 1.0, 17).unwrap();
        let s = ParticleState::new(0.0, 5, 3, x.clone(), v.clone()).unwrap();
        let mut bx: f64 = 0.0;
        let mut bv: f64 = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let mut sx = 0.0;
                let mut sv = 0.0;
                for k in 0..3 {
                    sx += (x[3 * i + k] - x[3 * j + k]).powi(2);
                    sv += (v[3 * i + k] - v[3 * j + k]).powi(2);
                }
                bx = bx.max(sx.sqrt());
                bv = bv.max(sv.sqrt());
            }
        }
        let (dx, dv) = diameters(&s);
        assert!((dx - bx).abs() <= 1e-15);
        assert!((dv - bv).abs() <= 1e-15);
    }

    #[test]
    fn max_speed_examples() {
        let c = InitialHistory::constant(2, 2, vec![0.0; 4], vec![3.0, 4.0, 3.0, 4.0]).unwrap();
        let b = HistoryBuffer::seed(&c, 0.1, 0.45, Interpolation::Linear).unwrap();
        assert!((max_speed(&b) - 5.0).abs() < 1e-15);
        let z = InitialHistory::constant(2, 2, vec![0.0; 4], vec![0.0; 4]).unwrap();
        let b = HistoryBuffer::seed(&z, 0.1, 0.45, Interpolation::Linear).unwrap();
        assert_eq!(max_speed(&b), 0.0);
        let (x, v) = random_initial_state(6, 2, 1.0, 1.0, 3).unwrap();
        let s0 = ParticleState::new(0.0, 6, 2, x.clone(), v.clone()).unwrap();
        let line = InitialHistory::straight_line(6, 2, x, v).unwrap();
        let b = HistoryBuffer::seed(&line, 0.1, 0.45, Interpolation::Linear).unwrap();
        assert!((max_speed(&b) - s0.max_speed()).abs() < 1e-15);
    }
}
