use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::quad;
use crate::error::{Error, Result};

/// Point mass of a jump intensity measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Vec<f64>,
    /// Intensity (expected number of marks per unit time).
    pub weight: f64,
}

/// One-dimensional mark density shapes, normalized to unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DensityShape {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
    Laplace { location: f64, scale: f64 },
}

impl DensityShape {
    pub fn pdf(&self, u: f64) -> f64 {
        match *self {
            DensityShape::Uniform { lo, hi } => {
                if (lo..=hi).contains(&u) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            DensityShape::Gaussian { mean, sd } => {
                let z = (u - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            DensityShape::Laplace { location, scale } => (-(u - location).abs() / scale).exp() / (2.0 * scale),
        }
    }

    /// Interval carrying all but a negligible part of the mass.
    fn support(&self) -> (f64, f64) {
        match *self {
            DensityShape::Uniform { lo, hi } => (lo, hi),
            DensityShape::Gaussian { mean, sd } => (mean - 9.0 * sd, mean + 9.0 * sd),
            DensityShape::Laplace { location, scale } => (location - 40.0 * scale, location + 40.0 * scale),
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            DensityShape::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
            DensityShape::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            DensityShape::Laplace { location, scale } => location.is_finite() && scale.is_finite() && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid jump density {self:?}")))
        }
    }
}

/// Absolutely continuous part of a one-dimensional jump measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpDensity {
    /// Total intensity.
    pub rate: f64,
    #[serde(flatten)]
    pub shape: DensityShape,
}

/// Finite-intensity jump measure on `R^dim`: atoms plus an optional
/// one-dimensional density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpMeasure {
    pub dim: usize,
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<JumpDensity>,
}

impl JumpMeasure {
    pub fn none(dim: usize) -> Self {
        Self {
            dim,
            atoms: Vec::new(),
            density: None,
        }
    }

    pub fn single_atom(location: Vec<f64>, weight: f64) -> Self {
        Self {
            dim: location.len(),
            atoms: vec![Atom { location, weight }],
            density: None,
        }
    }

    pub fn total_rate(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum::<f64>() + self.density.map_or(0.0, |d| d.rate)
    }

    pub fn is_zero(&self) -> bool {
        self.total_rate() == 0.0
    }

    pub fn check(&self) -> Result<()> {
        for atom in &self.atoms {
            if atom.location.len() != self.dim {
                return Err(Error::InvalidParameter(format!(
                    "jump atom {:?} does not have dimension {}",
                    atom.location, self.dim
                )));
            }
            if !(atom.weight.is_finite() && atom.weight >= 0.0) || atom.location.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("invalid jump atom {atom:?}")));
            }
        }
        if let Some(density) = &self.density {
            if self.dim != 1 {
                return Err(Error::InvalidParameter(
                    "jump densities are supported for one-dimensional marks only".into(),
                ));
            }
            if !(density.rate.is_finite() && density.rate >= 0.0) {
                return Err(Error::InvalidParameter(format!("invalid jump density rate {}", density.rate)));
            }
            density.shape.check()?;
        }
        Ok(())
    }

    /// Mass of atoms sitting exactly on the sphere `|u| = rho`.
    pub fn mass_on_sphere(&self, rho: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| (norm(&a.location) - rho).abs() <= 1e-12 * rho.max(1.0))
            .map(|a| a.weight)
            .sum()
    }

    /// `int min(|u|^2, 1) nu(du)` and `int (|u|^2 1_{|u|<=1} + |u|^p 1_{|u|>1}) nu(du)`.
    pub fn moments(&self, p: f64) -> Result<(f64, f64)> {
        let mut small = 0.0;
        let mut mixed = 0.0;
        for atom in &self.atoms {
            let r = norm(&atom.location);
            small += atom.weight * (r * r).min(1.0);
            mixed += atom.weight * if r <= 1.0 { r * r } else { r.powf(p) };
        }
        if let Some(density) = &self.density {
            let (lo, hi) = density.shape.support();
            let pdf = |u: f64| density.rate * density.shape.pdf(u);
            small += quad::integrate(|u| (u * u).min(1.0) * pdf(u), lo, hi, &quad::Tolerance::default())?.value;
            mixed += quad::integrate(
                |u| {
                    let r = u.abs();
                    (if r <= 1.0 { r * r } else { r.powf(p) }) * pdf(u)
                },
                lo,
                hi,
                &quad::Tolerance::default(),
            )?
            .value;
        }
        Ok((small, mixed))
    }

    /// Builds sampling tables and the truncated first moment used by the
    /// compensator.
    pub fn compile(&self, rho: f64) -> Result<CompiledJumps> {
        self.check()?;
        let mut cumulative = Vec::with_capacity(self.atoms.len());
        let mut acc = 0.0;
        let mut small_mean = vec![0.0; self.dim];
        for atom in &self.atoms {
            acc += atom.weight;
            cumulative.push(acc);
            if norm(&atom.location) <= rho {
                for (m, l) in small_mean.iter_mut().zip(&atom.location) {
                    *m += atom.weight * l;
                }
            }
        }
        let density = match &self.density {
            Some(d) if d.rate > 0.0 => {
                let (lo, hi) = d.shape.support();
                let (a, b) = (lo.max(-rho), hi.min(rho));
                if b > a {
                    small_mean[0] +=
                        quad::integrate(|u| d.rate * u * d.shape.pdf(u), a, b, &quad::Tolerance::default())?.value;
                }
                Some((d.rate, InverseCdfTable::build(&d.shape)))
            }
            _ => None,
        };
        Ok(CompiledJumps {
            dim: self.dim,
            atom_rate: acc,
            cumulative,
            locations: self.atoms.iter().map(|a| a.location.clone()).collect(),
            density,
            small_mean,
        })
    }
}

impl JumpMeasure {
    /// Finite atomic approximation: the atoms themselves plus `nodes`
    /// equal-weight quantile midpoints of the density part.
    pub fn discretize(&self, nodes: usize) -> Vec<Atom> {
        let mut out = self.atoms.clone();
        if let Some(d) = &self.density {
            if d.rate > 0.0 && nodes > 0 {
                let table = InverseCdfTable::build(&d.shape);
                let w = d.rate / nodes as f64;
                for i in 0..nodes {
                    let p = (i as f64 + 0.5) / nodes as f64;
                    out.push(Atom {
                        location: vec![table.quantile(p)],
                        weight: w,
                    });
                }
            }
        }
        out
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Piecewise-linear inverse of a tabulated CDF.
#[derive(Debug, Clone)]
struct InverseCdfTable {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdfTable {
    const NODES: usize = 4097;

    fn build(shape: &DensityShape) -> Self {
        let (lo, hi) = shape.support();
        let h = (hi - lo) / (Self::NODES - 1) as f64;
        let grid: Vec<f64> = (0..Self::NODES).map(|i| lo + h * i as f64).collect();
        let mut cdf = Vec::with_capacity(Self::NODES);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in grid.windows(2) {
            // Simpson on each cell.
            let mid = 0.5 * (w[0] + w[1]);
            acc += h / 6.0 * (shape.pdf(w[0]) + 4.0 * shape.pdf(mid) + shape.pdf(w[1]));
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Self { grid, cdf }
    }

    fn quantile(&self, p: f64) -> f64 {
        let idx = self.cdf.partition_point(|c| *c < p).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let (g0, g1) = (self.grid[idx - 1], self.grid[idx]);
        if c1 > c0 {
            g0 + (p - c0) / (c1 - c0) * (g1 - g0)
        } else {
            g0
        }
    }
}

/// Sampling form of a [`JumpMeasure`].
#[derive(Debug, Clone)]
pub struct CompiledJumps {
    pub dim: usize,
    atom_rate: f64,
    cumulative: Vec<f64>,
    locations: Vec<Vec<f64>>,
    density: Option<(f64, InverseCdfTable)>,
    /// `int u 1_{|u| <= rho} nu(du)`.
    pub small_mean: Vec<f64>,
}

impl CompiledJumps {
    pub fn total_rate(&self) -> f64 {
        self.atom_rate + self.density.as_ref().map_or(0.0, |(r, _)| *r)
    }

    /// Draws a mark from the normalized measure into `out`.
    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let total = self.total_rate();
        let u = rng.gen::<f64>() * total;
        if u < self.atom_rate || self.density.is_none() {
            let idx = self.cumulative.partition_point(|c| *c <= u).min(self.locations.len() - 1);
            out.copy_from_slice(&self.locations[idx]);
        } else if let Some((_, table)) = &self.density {
            out[0] = table.quantile(rng.gen::<f64>());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn truncated_mean_respects_cutoff() {
        let m = JumpMeasure {
            dim: 1,
            atoms: vec![
                Atom { location: vec![0.3], weight: 2.0 },
                Atom { location: vec![1.0], weight: 1.0 },
            ],
            density: None,
        };
        let c = m.compile(0.5).unwrap();
        assert!((c.small_mean[0] - 0.6).abs() < 1e-15);
        assert_eq!(c.total_rate(), 3.0);
        assert_eq!(m.mass_on_sphere(0.3), 2.0);
        assert_eq!(m.mass_on_sphere(0.5), 0.0);
    }

    #[test]
    fn density_marks_follow_the_shape() {
        let m = JumpMeasure {
            dim: 1,
            atoms: vec![],
            density: Some(JumpDensity {
                rate: 3.0,
                shape: DensityShape::Uniform { lo: -1.0, hi: 2.0 },
            }),
        };
        let c = m.compile(1.0).unwrap();
        // int_{-1}^{1} u * 3 * (1/3) du = 0
        assert!(c.small_mean[0].abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut out = [0.0];
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            c.sample_mark(&mut rng, &mut out);
            assert!((-1.0..=2.0).contains(&out[0]));
            sum += out[0];
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn atom_selection_is_weighted() {
        let m = JumpMeasure {
            dim: 1,
            atoms: vec![
                Atom { location: vec![-1.0], weight: 1.0 },
                Atom { location: vec![1.0], weight: 3.0 },
            ],
            density: None,
        };
        let c = m.compile(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut out = [0.0];
        let hits = (0..40_000)
            .filter(|_| {
                c.sample_mark(&mut rng, &mut out);
                out[0] > 0.0
            })
            .count();
        assert!((hits as f64 / 40_000.0 - 0.75).abs() < 0.01);
    }
}
