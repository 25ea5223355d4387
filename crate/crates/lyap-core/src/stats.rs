//! Small statistics toolbox: moments, correlation, two-sample
//! Kolmogorov-Smirnov, weighted line fits, and jackknife resampling.

use alloc::vec::Vec;

#[allow(unused_imports)] // test builds resolve f64 math through std instead
use num_traits::Float;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::nan();
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn stderr_of_mean(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Pearson correlation together with the large-sample standard error
/// `(1 - r^2) / sqrt(n)` of the estimate.
pub fn correlation(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 3 {
        return (0.0, f64::infinity());
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return (0.0, f64::infinity());
    }
    let r = sxy / (sxx * syy).sqrt();
    (r, (1.0 - r * r) / (n as f64).sqrt())
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut sa: Vec<f64> = a.to_vec();
    let mut sb: Vec<f64> = b.to_vec();
    sa.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Critical value of the two-sample KS statistic at level `alpha`:
/// `c(alpha) * sqrt((n+m)/(n m))` with `c(alpha) = sqrt(-ln(alpha/2)/2)`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Weighted least-squares line `y = intercept + slope * x`.
///
/// Weights are inverse-variance style: points with `w = 0` are ignored.
pub fn weighted_line_fit(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert_eq!(xs.len(), ws.len());
    let sw: f64 = ws.iter().sum();
    assert!(sw > 0.0, "need positive total weight");
    let mx = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
    }
    assert!(sxx > 0.0, "need at least two distinct x values");
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Jackknife standard error of a statistic given its leave-one-out values.
pub fn jackknife_stderr(loo: &[f64]) -> f64 {
    let n = loo.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(loo);
    let s: f64 = loo.iter().map(|v| (v - m) * (v - m)).sum();
    ((n as f64 - 1.0) / n as f64 * s).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn moments_basics() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn correlation_of_identical_series_is_one() {
        let xs = vec![1.0, 2.0, 3.0, 5.0, 8.0];
        let (r, _) = correlation(&xs, &xs);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..500).map(|i| i as f64 + 250.0).collect();
        assert!(ks_two_sample(&a, &b) > 0.4);
        assert!(ks_two_sample(&a, &a) == 0.0);
    }

    #[test]
    fn ks_critical_value_formula() {
        // c(0.001) = sqrt(ln(2000)/2)
        let c = ks_critical(1e-3, 10_000, 10_000);
        let expect = (2000.0f64.ln() / 2.0).sqrt() * (2.0f64 / 10_000.0).sqrt();
        assert!((c - expect).abs() < 1e-12);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let ws = vec![1.0; 10];
        let (slope, intercept) = weighted_line_fit(&xs, &ys, &ws);
        assert!((slope + 2.0).abs() < 1e-12);
        assert!((intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jackknife_matches_classic_formula_for_mean() {
        let xs = vec![2.0, 4.0, 6.0, 10.0];
        let n = xs.len() as f64;
        let total: f64 = xs.iter().sum();
        let loo: Vec<f64> = xs.iter().map(|x| (total - x) / (n - 1.0)).collect();
        let se = jackknife_stderr(&loo);
        assert!((se - stderr_of_mean(&xs)).abs() < 1e-12);
    }
}
