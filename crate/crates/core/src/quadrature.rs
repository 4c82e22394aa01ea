//! Small quadrature helpers shared by the integrator and the diagnostics.

/// Relative tolerance (in units of the grid step) for snapping an endpoint
/// onto a grid node.
const SNAP: f64 = 1e-9;

/// Composite trapezoid nodes and weights over `[lo, hi]` on the uniform grid
/// `origin + j * step`.
///
/// Interior nodes are the grid points strictly inside the interval; the two
/// endpoints are always nodes, so partial cells at either end are handled by
/// the caller evaluating the integrand there (usually by interpolation).
pub fn grid_trapezoid(lo: f64, hi: f64, origin: f64, step: f64) -> Vec<(f64, f64)> {
    debug_assert!(step > 0.0);
    if hi <= lo {
        return Vec::new();
    }
    let mut nodes = Vec::with_capacity(((hi - lo) / step) as usize + 3);
    nodes.push(lo);
    let first = ((lo - origin) / step + SNAP).floor() as i64 + 1;
    let mut j = first;
    loop {
        let s = origin + j as f64 * step;
        if s >= hi - SNAP * step {
            break;
        }
        // Endpoint already sits on (or within SNAP of) this node.
        if s > lo + SNAP * step {
            nodes.push(s);
        }
        j += 1;
    }
    nodes.push(hi);

    let mut out: Vec<(f64, f64)> = nodes.iter().map(|&s| (s, 0.0)).collect();
    for k in 0..nodes.len() - 1 {
        let half = 0.5 * (nodes[k + 1] - nodes[k]);
        out[k].1 += half;
        out[k + 1].1 += half;
    }
    out
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_weights_sum_to_length() {
        for &(lo, hi) in &[(0.0, 1.0), (-0.37, 0.0), (0.05, 0.93), (-1.0, -0.5)] {
            let w: f64 = grid_trapezoid(lo, hi, 0.0, 0.1).iter().map(|p| p.1).sum();
            assert!((w - (hi - lo)).abs() < 1e-14);
        }
    }

    #[test]
    fn endpoint_on_grid_is_not_duplicated() {
        let nodes = grid_trapezoid(-0.5, 0.0, 0.0, 0.125);
        assert_eq!(nodes.len(), 5);
        assert!(nodes.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let integral: f64 = grid_trapezoid(0.03, 0.71, 0.0, 0.1)
            .iter()
            .map(|&(s, w)| w * (2.0 * s + 1.0))
            .sum();
        let exact = (0.71f64.powi(2) + 0.71) - (0.03f64.powi(2) + 0.03);
        assert!((integral - exact).abs() < 1e-14);
    }

    #[test]
    fn simpson_matches_closed_form() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
    }
}
