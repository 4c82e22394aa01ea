use delayflock::kernels::{lambert_w0, InfluenceFunction, Tail};
use delayflock::meanfield::{solve_assignment, wasserstein1, EmpiricalMeasure};
use delayflock::particle::normalized_weights;
use proptest::prelude::*;

fn influence() -> impl Strategy<Value = InfluenceFunction> {
    prop_oneof![
        (0.0..3.0f64).prop_map(|b| InfluenceFunction::cucker_smale(b).unwrap()),
        (0.0..4.0f64).prop_map(|p| InfluenceFunction::power_tail(p).unwrap()),
        Just(InfluenceFunction::exponential()),
        Just(InfluenceFunction::constant()),
    ]
}

fn measure(max_atoms: usize, dim: usize) -> impl Strategy<Value = EmpiricalMeasure> {
    (1..=max_atoms).prop_flat_map(move |n| {
        (
            prop::collection::vec(-3.0..3.0f64, n * dim),
            prop::collection::vec(-3.0..3.0f64, n * dim),
        )
            .prop_map(move |(x, v)| EmpiricalMeasure::new(dim, x, v).unwrap())
    })
}

fn phase_distance(a: &EmpiricalMeasure, i: usize, b: &EmpiricalMeasure, j: usize) -> f64 {
    let dx = a
        .position(i)
        .iter()
        .zip(b.position(j))
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>();
    let dv = a
        .velocity(i)
        .iter()
        .zip(b.velocity(j))
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>();
    (dx + dv).sqrt()
}

/// Minimum over all permutations by Heap's algorithm.
fn brute_force_min(n: usize, cost: impl Fn(usize, usize) -> f64) -> f64 {
    let mut perm: Vec<usize> = (0..n).collect();
    let total = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost(i, j)).sum::<f64>();
    let mut best = total(&perm);
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(total(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

fn translated(m: &EmpiricalMeasure, shift: &[f64]) -> EmpiricalMeasure {
    let d = m.dim();
    let x = (0..m.len()).flat_map(|i| {
        m.position(i)
            .iter()
            .zip(shift)
            .map(|(a, s)| a + s)
            .collect::<Vec<_>>()
    });
    let v = (0..m.len()).flat_map(|i| m.velocity(i).to_vec());
    EmpiricalMeasure::new(d, x.collect(), v.collect()).unwrap()
}

proptest! {
    #[test]
    fn psi_is_nonincreasing_and_bounded(psi in influence(), a in 0.0..50.0f64, b in 0.0..50.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (p_lo, p_hi) = (psi.evaluate(lo).unwrap(), psi.evaluate(hi).unwrap());
        prop_assert!(p_hi <= p_lo);
        prop_assert!(p_lo <= 1.0 && p_hi > 0.0);
        prop_assert_eq!(psi.evaluate(0.0).unwrap(), 1.0);
    }

    #[test]
    fn tail_is_nonincreasing_and_consistent(psi in influence(), a in 0.0..20.0f64, gap in 0.0..20.0f64) {
        let b = a + gap;
        match (psi.tail_integral(a).unwrap(), psi.tail_integral(b).unwrap()) {
            (Tail::Finite(ta), Tail::Finite(tb)) => {
                prop_assert!(psi.is_integrable());
                prop_assert!(tb <= ta + 1e-12);
                let seg = psi.integral(a, b).unwrap();
                prop_assert!(((ta - tb) - seg).abs() <= 1e-8 * (1.0 + seg), "{} vs {}", ta - tb, seg);
            }
            (Tail::Infinite, Tail::Infinite) => prop_assert!(!psi.is_integrable()),
            other => prop_assert!(false, "mixed tails {:?}", other),
        }
    }

    #[test]
    fn weights_are_a_probability_vector(
        psi in influence(),
        dim in 1usize..4,
        seed_x in prop::collection::vec(-50.0..50.0f64, 2 * 3..=32 * 3),
        now in prop::collection::vec(-50.0..50.0f64, 3),
        i_frac in 0.0..1.0f64,
    ) {
        let n = seed_x.len() / 3;
        let x = &seed_x[..n * dim];
        let i = ((n as f64 * i_frac) as usize).min(n - 1);
        let w = normalized_weights(x, &now[..dim], i, &psi).unwrap();
        prop_assert_eq!(w.phi[i], 0.0);
        prop_assert!(w.phi.iter().all(|&p| p >= 0.0));
        prop_assert!((w.phi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn lambert_round_trip(z in 0.0..1e6f64) {
        let w = lambert_w0(z).unwrap();
        prop_assert!((w * w.exp() - z).abs() <= 1e-12 * z.max(1.0));
    }

    #[test]
    fn assignment_matches_brute_force(n in 1usize..=6, costs in prop::collection::vec(0.0..10.0f64, 36)) {
        let cost = |i: usize, j: usize| costs[i * 6 + j];
        let (assign, total) = solve_assignment(n, cost);
        let mut seen = assign.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let recomputed: f64 = assign.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
        prop_assert!((recomputed - total).abs() <= 1e-12);
        prop_assert!((total - brute_force_min(n, cost)).abs() <= 1e-12);
    }

    #[test]
    fn w1_equals_mean_brute_force_cost(
        (a, b) in (1usize..=6, 1usize..=3).prop_flat_map(|(n, d)| (measure_n(n, d), measure_n(n, d)))
    ) {
        let n = a.len();
        let w = wasserstein1(&a, &b).unwrap();
        let brute = brute_force_min(n, |i, j| phase_distance(&a, i, &b, j)) / n as f64;
        prop_assert!((w - brute).abs() <= 1e-12, "{} vs {}", w, brute);
    }

    #[test]
    fn w1_metric_axioms(
        (a, b, c) in (1usize..=3).prop_flat_map(|d| (measure(5, d), measure(5, d), measure(5, d)))
    ) {
        let ab = wasserstein1(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
        prop_assert!((ab - wasserstein1(&b, &a).unwrap()).abs() <= 1e-12);
        let ac = wasserstein1(&a, &c).unwrap();
        let cb = wasserstein1(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn w1_translation_equivariance(
        (a, b, shift) in (1usize..=3).prop_flat_map(|d| (measure(5, d), measure(5, d), prop::collection::vec(-5.0..5.0f64, d)))
    ) {
        let norm = shift.iter().map(|c| c * c).sum::<f64>().sqrt();
        let moved = translated(&a, &shift);
        prop_assert!((wasserstein1(&a, &moved).unwrap() - norm).abs() <= 1e-12 * (1.0 + norm));
        let both = wasserstein1(&moved, &translated(&b, &shift)).unwrap();
        prop_assert!((both - wasserstein1(&a, &b).unwrap()).abs() <= 1e-10);
    }
}

fn measure_n(n: usize, dim: usize) -> impl Strategy<Value = EmpiricalMeasure> {
    (
        prop::collection::vec(-3.0..3.0f64, n * dim),
        prop::collection::vec(-3.0..3.0f64, n * dim),
    )
        .prop_map(move |(x, v)| EmpiricalMeasure::new(dim, x, v).unwrap())
}
