//! Order-independent Monte Carlo aggregation.

use serde::{Deserialize, Serialize};

/// Pairwise (tree) summation over a slice in its given order.
///
/// The reduction tree depends only on the slice length, so results do not
/// change with the number of worker threads that produced the inputs.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Self { mean, stderr: 0.0 }
    }

    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN };
        }
        if xs.iter().all(|x| x.to_bits() == xs[0].to_bits()) {
            return Self::exact(xs[0]);
        }
        let mean = pairwise_sum(xs) / n as f64;
        if n == 1 {
            return Self { mean, stderr: f64::NAN };
        }
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Self { mean, stderr: (var / n as f64).sqrt() }
    }

    /// `|mean - target| <= k * stderr`, accepting exact equality.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = pairwise_sum(xs) / n as f64;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    (pairwise_sum(&dev) / (n - 1) as f64).sqrt()
}

/// Root mean square.
pub fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    (pairwise_sum(&sq) / xs.len() as f64).sqrt()
}

/// Per-component mean and standard error of equal-length vectors.
pub fn vector_estimate(samples: &[Vec<f64>]) -> Vec<Estimate> {
    let dim = samples.first().map_or(0, Vec::len);
    (0..dim)
        .map(|j| {
            let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            Estimate::from_samples(&col)
        })
        .collect()
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}
