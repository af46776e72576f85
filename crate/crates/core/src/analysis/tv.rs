use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bin edges on the real line. The two unbounded cells below the first and
/// above the last edge are part of every histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    edges: Vec<f64>,
}

impl Binning {
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter("bin edges must be finite and strictly increasing".into()));
        }
        Ok(Self { edges })
    }

    /// `bins` equal cells covering `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::InvalidParameter(format!("cannot split [{lo}, {hi}] into {bins} bins")));
        }
        let h = (hi - lo) / bins as f64;
        Self::from_edges((0..=bins).map(|i| lo + h * i as f64).collect())
    }

    /// `bins` equal cells covering the range of all samples.
    pub fn spanning(samples: &[&[f64]], bins: usize) -> Result<Self> {
        let (lo, hi) = samples
            .iter()
            .flat_map(|s| s.iter())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Precondition("cannot bin an empty or non-finite sample".into()));
        }
        let pad = if hi > lo { 1e-9 * (hi - lo) } else { 0.5 };
        Self::uniform(lo - pad, hi + pad, bins)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Number of cells including the two unbounded ones.
    pub fn cells(&self) -> usize {
        self.edges.len() + 1
    }

    /// Cell index of `v`; cells are closed on the left.
    pub fn cell(&self, v: f64) -> usize {
        self.edges.partition_point(|e| *e <= v)
    }

    pub fn counts(&self, samples: &[f64]) -> Vec<u64> {
        let mut counts = vec![0u64; self.cells()];
        for v in samples {
            counts[self.cell(*v)] += 1;
        }
        counts
    }

    pub fn probabilities(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Err(Error::Precondition("empty sample".into()));
        }
        let n = samples.len() as f64;
        Ok(self.counts(samples).into_iter().map(|c| c as f64 / n).collect())
    }
}

/// Half the L1 distance between two probability vectors.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Total variation between the histograms of two samples on common bins.
pub fn empirical_tv(a: &[f64], b: &[f64], bins: &Binning) -> Result<f64> {
    Ok(tv_distance(&bins.probabilities(a)?, &bins.probabilities(b)?).clamp(0.0, 1.0))
}

/// Total variation between the histogram of a sample and exact cell masses.
pub fn tv_against(samples: &[f64], masses: &[f64], bins: &Binning) -> Result<f64> {
    if masses.len() != bins.cells() {
        return Err(Error::InvalidParameter(format!(
            "{} masses for {} cells",
            masses.len(),
            bins.cells()
        )));
    }
    Ok(tv_distance(&bins.probabilities(samples)?, masses).clamp(0.0, 1.0))
}
