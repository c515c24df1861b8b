//! Small shared numerical helpers: regression, quadrature, and empirical
//! distribution distances.

/// Least-squares slope of `y` against `x` for the given sample points.
///
/// Degenerate inputs (fewer than two points, or zero variance in `x`)
/// return NaN rather than a fabricated slope.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    sxy / sxx
}

/// Trapezoid-rule integral of uniformly spaced samples over `[a, b]`.
pub fn trapezoid(values: &[f64], a: f64, b: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => (b - a) * values[0],
        n => {
            let h = (b - a) / (n as f64 - 1.0);
            let interior: f64 = values[1..n - 1].iter().sum();
            h * (0.5 * values[0] + interior + 0.5 * values[n - 1])
        }
    }
}

/// Two-sided Kolmogorov–Smirnov statistic of a sample against the
/// uniform distribution on `[0, 1]`.
pub fn ks_uniform(sample: &[f64]) -> f64 {
    if sample.is_empty() {
        return f64::NAN;
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let lo = i as f64 / n;
        let hi = (i as f64 + 1.0) / n;
        worst = worst.max((x - lo).abs()).max((hi - x).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_recovers_exact_lines() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 * i as f64 - 2.0)).collect();
        assert!((least_squares_slope(&pts) - 3.0).abs() < 1e-12);
        assert!(least_squares_slope(&pts[..1]).is_nan());
        assert!(least_squares_slope(&[(1.0, 0.0), (1.0, 5.0)]).is_nan());
    }

    #[test]
    fn trapezoid_is_exact_for_linear_integrands()  {
        let values: Vec<f64> = (0..=10).map(|i| 2.0 * i as f64 / 10.0 + 1.0).collect();
        // ∫₀¹ (2x+1) dx = 2
        assert!((trapezoid(&values, 0.0, 1.0) - 2.0).abs() < 1e-14);
        assert_eq!(trapezoid(&[], 0.0, 1.0), 0.0);
        assert!((trapezoid(&[3.0], 0.0, 2.0) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn ks_statistic_on_known_samples() {
        // a perfectly spread sample achieves the 1/(2n) floor
        let sample: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_uniform(&sample) - 0.005).abs() < 1e-12);
        // a point mass at 0 has statistic 1
        assert!((ks_uniform(&[0.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}
