use rand::Rng;
use serde::{Deserialize, Serialize};

use super::parallel::rng_for_stream;

/// Fixed-point accumulator whose sum does not depend on the order of
/// additions, so partial tallies merge exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactSum {
    units: i128,
}

impl ExactSum {
    /// Resolution `2^-40`; values up to about `1.5e14` are representable.
    const SCALE: f64 = (1u64 << 40) as f64;

    pub fn add(&mut self, v: f64) {
        self.units += (v * Self::SCALE).round() as i128;
    }

    pub fn merge(&mut self, other: &ExactSum) {
        self.units += other.units;
    }

    pub fn value(&self) -> f64 {
        self.units as f64 / Self::SCALE
    }
}

/// Sample quantile with linear interpolation; `sorted` must be ascending.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: &[f64]) -> f64 {
    quantile(&sorted(values), 0.5)
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if n == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Half-width of the normal-approximation 95% interval for a proportion.
pub fn binomial_halfwidth(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    1.959_963_984_540_054 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// usable points.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Standard deviation of the mean of `values` over `resamples` bootstrap
/// resamples drawn from a stream determined by `seed`.
pub fn bootstrap_se(values: &[f64], resamples: usize, seed: u64) -> f64 {
    let n = values.len();
    if n < 2 || resamples < 2 {
        return f64::NAN;
    }
    let mut rng = rng_for_stream(seed, u64::MAX);
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    mean_and_se(&means).1 * (resamples as f64).sqrt()
}
