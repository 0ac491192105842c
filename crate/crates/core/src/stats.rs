//! Small statistics helpers for Monte Carlo validation.

use rand::Rng;

use crate::rng::StreamRng;

/// Kolmogorov–Smirnov statistic `sup |F_n(x) − F(x)|` of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic p-value of the one-sample KS statistic `d` for `n` samples,
/// with the Stephens small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_survival(lambda)
}

/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} exp(−2 j² λ²)`.
fn kolmogorov_survival(lambda: f64) -> f64 {
    // Below 0.2 the series converges slowly and 1 − Q < 1e-12.
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Bootstrap standard error of a ratio of sums over blocks.
///
/// Each block contributes a numerator vector and a denominator; replicates
/// resample whole blocks with replacement and form `Σ num / Σ den`.
pub fn block_bootstrap_ratio(
    numerators: &[Vec<f64>],
    denominators: &[f64],
    replicates: usize,
    rng: &mut StreamRng,
) -> Vec<f64> {
    let n = numerators.len();
    let width = numerators.first().map_or(0, Vec::len);
    if n < 2 {
        return vec![0.0; width];
    }
    let mut sum = vec![0.0; width];
    let mut sum_sq = vec![0.0; width];
    for _ in 0..replicates {
        let mut num = vec![0.0; width];
        let mut den = 0.0;
        for _ in 0..n {
            let b = rng.random_range(0..n);
            for (acc, x) in num.iter_mut().zip(&numerators[b]) {
                *acc += x;
            }
            den += denominators[b];
        }
        for i in 0..width {
            let ratio = num[i] / den;
            sum[i] += ratio;
            sum_sq[i] += ratio * ratio;
        }
    }
    let r = replicates as f64;
    sum.iter()
        .zip(&sum_sq)
        .map(|(s, q)| {
            let mean = s / r;
            (q / r - mean * mean).max(0.0).sqrt() * (r / (r - 1.0)).sqrt()
        })
        .collect()
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
