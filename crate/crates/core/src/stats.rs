//! Small statistics toolkit shared by tests and the harness.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of the two-sample statistic `d`.
pub fn ks_pvalue(d: f64, n: usize, m: usize) -> f64 {
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Standard error of the mean.
pub fn std_error(x: &[f64]) -> f64 {
    let m = mean(x);
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0).max(1.0);
    (var / x.len() as f64).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Percentile bootstrap interval for a statistic of one sample.
pub fn bootstrap_band(x: &[f64], stat: &dyn Fn(&[f64]) -> f64, resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let mut rng = rng_from_seed(seed);
    let mut values: Vec<f64> = (0..resamples)
        .map(|_| {
            let s: Vec<f64> = (0..x.len()).map(|_| x[rng.random_range(0..x.len())]).collect();
            stat(&s)
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let lo = ((1.0 - level) / 2.0 * resamples as f64).floor() as usize;
    let hi = (((1.0 + level) / 2.0 * resamples as f64).ceil() as usize).min(resamples) - 1;
    (values[lo.min(resamples - 1)], values[hi])
}

/// Verdict on a sequence that should not increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub values: Vec<f64>,
    pub inversions: usize,
    pub allowed: usize,
    pub pass: bool,
}

pub fn nonincreasing_verdict(values: &[f64], allowed: usize) -> TrendVerdict {
    let inversions = values.windows(2).filter(|w| w[1] > w[0]).count();
    TrendVerdict { values: values.to_vec(), inversions, allowed, pass: inversions <= allowed }
}

/// Least-squares line `y = a + b x`, returned as `(a, b)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ks_basic() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_relative_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_relative_eq!(ks_statistic(&[1.0, 3.0], &[2.0, 4.0]), 0.5);
        assert!(ks_pvalue(0.0, 100, 100) > 0.99);
        assert!(ks_pvalue(0.5, 100, 100) < 1e-8);
        // 5% critical value for n = m = 1000 is about 0.0607
        assert_relative_eq!(ks_pvalue(0.0607, 1000, 1000), 0.05, epsilon = 0.005);
    }

    #[test]
    fn trend_counts_inversions() {
        assert!(nonincreasing_verdict(&[3.0, 2.0, 2.5, 1.0], 1).pass);
        assert!(!nonincreasing_verdict(&[1.0, 2.0, 3.0], 1).pass);
    }

    #[test]
    fn median_and_fit() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (a, b) = least_squares(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert_relative_eq!(a, 1.0);
        assert_relative_eq!(b, 2.0);
    }

    #[test]
    fn bootstrap_contains_mean() {
        let x: Vec<f64> = (0..200).map(|i| (i % 10) as f64).collect();
        let (lo, hi) = bootstrap_band(&x, &mean, 500, 0.95, 1);
        assert!(lo < 4.5 && 4.5 < hi);
    }
}
