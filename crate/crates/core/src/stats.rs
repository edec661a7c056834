//! Small statistical helpers shared by the Monte Carlo diagnostics.

use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided standard normal quantile for a confidence level in `(0, 1)`.
pub fn normal_quantile(confidence: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + 0.5 * confidence)
}

pub fn normal_cdf(x: f64, mean: f64, std_dev: f64) -> f64 {
    if std_dev == 0.0 {
        return if x >= mean { 1.0 } else { 0.0 };
    }
    Normal::new(mean, std_dev).map(|n| n.cdf(x)).unwrap_or(f64::NAN)
}

/// Wilson score interval for `successes` out of `trials` at two-sided
/// normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if xs.iter().all(|&x| x == xs[0]) {
        // constant samples: avoid rounding noise in the summed mean
        return (xs[0], 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n - F|` against a
/// continuous CDF. Sorts `samples` in place.
pub fn ks_statistic<F>(samples: &mut [f64], cdf: F) -> f64
where
    F: Fn(f64) -> f64,
{
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    })
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and a
/// point mass at `point`.
pub fn ks_point_mass(samples: &[f64], point: f64) -> f64 {
    let n = samples.len() as f64;
    let below = samples.iter().filter(|&&x| x < point).count() as f64;
    let above = samples.iter().filter(|&&x| x > point).count() as f64;
    (below / n).max(above / n)
}

/// Asymptotic critical value of the one-sample KS statistic at level 1%.
pub fn ks_critical_99(samples: usize) -> f64 {
    1.628 / (samples as f64).sqrt()
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    least_squares(&lx, &ly).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(25, 100, 1.96);
        assert!(lo < 0.25 && 0.25 < hi);
        assert_eq!(wilson_interval(0, 50, 1.96).0, 0.0);
        assert_eq!(wilson_interval(50, 50, 1.96).1, 1.0);
    }

    #[test]
    fn wilson_matches_hand_computation() {
        // p = 0.5, n = 100, z = 2: center 0.5, half = 2·sqrt(0.0025 + 0.0001)/1.04
        let (lo, hi) = wilson_interval(50, 100, 2.0);
        let half = 2.0 * (0.0025f64 + 0.0001).sqrt() / 1.04;
        assert!((lo - (0.5 - half)).abs() < 1e-15);
        assert!((hi - (0.5 + half)).abs() < 1e-15);
    }

    #[test]
    fn quantiles() {
        assert!((normal_quantile(0.95) - 1.959963984540054).abs() < 1e-9);
        assert!((normal_quantile(0.99) - 2.5758293035489004).abs() < 1e-9);
    }

    #[test]
    fn ks_of_two_point_law_against_normal() {
        // ±1 with equal mass against N(0,1): the gap just below 1 is Φ(1) - 1/2.
        let mut xs: Vec<f64> = (0..10_000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let d = ks_statistic(&mut xs, |x| normal_cdf(x, 0.0, 1.0));
        assert!((d - (normal_cdf(1.0, 0.0, 1.0) - 0.5)).abs() < 1e-12, "{d}");
    }

    #[test]
    fn ks_point_mass_counts_off_point_samples() {
        assert_eq!(ks_point_mass(&[1.0, 1.0, 1.0, 1.0], 1.0), 0.0);
        assert_eq!(ks_point_mass(&[0.5, 1.0, 2.0, 3.0], 1.0), 0.5);
    }

    #[test]
    fn slopes() {
        let xs = [1.0f64, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
        assert!((log_log_slope(&xs, &ys) + 1.5).abs() < 1e-12);
        let (m, c) = least_squares(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((m - 2.0).abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
    }
}
