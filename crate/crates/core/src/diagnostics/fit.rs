/// Samples below this fraction of the window maximum count as machine zero.
const ZERO_FRACTION: f64 = 1e-10;

/// Least-squares slope of −ln d_V(t) against t over samples with
/// t ∈ [t_a, t_b]. Non-positive, non-finite and machine-zero samples are
/// dropped; `None` when fewer than two distinct times remain.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Option<f64> {
    let (t_a, t_b) = window;
    let inside: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, d)| t >= t_a && t <= t_b && d.is_finite() && t.is_finite())
        .collect();
    let peak = inside.iter().map(|&(_, d)| d).fold(0.0, f64::max);
    let floor = ZERO_FRACTION * peak;
    let pts: Vec<(f64, f64)> = inside
        .into_iter()
        .filter(|&(_, d)| d > 0.0 && d > floor)
        .map(|(t, d)| (t, -d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let y_mean = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut sty, mut stt) = (0.0, 0.0);
    for &(t, y) in &pts {
        sty += (t - t_mean) * (y - y_mean);
        stt += (t - t_mean) * (t - t_mean);
    }
    if stt <= 0.0 {
        return None;
    }
    Some(sty / stt)
}

/// [`fit_decay_rate`] over the whole series.
pub fn fit_decay_rate_all(series: &[(f64, f64)]) -> Option<f64> {
    fit_decay_rate(series, (f64::NEG_INFINITY, f64::INFINITY))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let s: Vec<(f64, f64)> = (0..200)
            .map(|k| (k as f64 * 0.1, 3.0 * (-0.7 * k as f64 * 0.1).exp()))
            .collect();
        assert!((fit_decay_rate_all(&s).unwrap() - 0.7).abs() <= 1e-10);
        assert!((fit_decay_rate(&s, (2.0, 5.0)).unwrap() - 0.7).abs() <= 1e-10);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let s: Vec<(f64, f64)> = (0..50).map(|k| (k as f64, 0.3)).collect();
        assert!(fit_decay_rate_all(&s).unwrap().abs() <= 1e-14);
    }

    #[test]
    fn machine_zero_tail_is_excluded() {
        let mut s: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, (-(k as f64)).exp())).collect();
        s.extend((20..40).map(|k| (k as f64, 1e-300)));
        s.push((40.0, 0.0));
        assert!((fit_decay_rate_all(&s).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn empty_window_is_none() {
        let s = [(0.0, 1.0), (1.0, 0.5)];
        assert!(fit_decay_rate(&s, (5.0, 6.0)).is_none());
        assert!(fit_decay_rate_all(&[(0.0, 0.0), (1.0, 0.0)]).is_none());
    }
}
