use serde::{Deserialize, Serialize};

use super::ladder::{check_ladder, ConvergenceLadder};
use super::parallel::{map_indexed, worker_count};
use super::table::{cell, Table};
use crate::analysis::{empirical_tv, invariant_density, tv_against, Binning};
use crate::coeffs::{Regime, Side, SmallNoiseModel};
use crate::error::{Error, Result};
use crate::sim::{rng_for, FrozenStepper};

/// Fraction of the longest horizon discarded before occupation is counted.
pub const OCCUPATION_BURN_IN: f64 = 0.1;

/// Half-range of the histogram in units of the decay width of each side.
const RANGE_WIDTHS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicitySettings {
    pub dt: f64,
    pub bins: usize,
    pub workers: Option<usize>,
}

impl Default for ErgodicitySettings {
    fn default() -> Self {
        Self {
            dt: 5e-3,
            bins: 64,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityResult {
    pub y0: (f64, f64),
    /// TV between the two terminal samples.
    pub two_sample: ConvergenceLadder,
    /// TV of the first sample against the exact bin masses.
    pub first_vs_exact: ConvergenceLadder,
    pub second_vs_exact: ConvergenceLadder,
    /// Fraction of steps with `y > 0` after burn-in, over all paths.
    pub occupation_fraction: f64,
    pub mass_plus: f64,
    pub relaxation_time: f64,
}

impl ErgodicityResult {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "T",
            "n_paths",
            "tv_two_sample",
            "tv_first_vs_exact",
            "tv_second_vs_exact",
            "occupation_fraction",
            "mass_plus",
            "relaxation_time",
        ]);
        for i in 0..self.two_sample.len() {
            t.push(vec![
                cell(self.two_sample.values[i]),
                cell(self.two_sample.counts[i]),
                cell(self.two_sample.estimates[i]),
                cell(self.first_vs_exact.estimates[i]),
                cell(self.second_vs_exact.estimates[i]),
                cell(self.occupation_fraction),
                cell(self.mass_plus),
                cell(self.relaxation_time),
            ]);
        }
        t
    }
}

/// Convergence of the frozen fast equation at `x` to its stationary law,
/// from two initial values, along an increasing horizon ladder.
pub fn run_frozen_ergodicity(
    x: &[f64],
    model: &SmallNoiseModel,
    horizons: &[f64],
    n_paths: u64,
    y0: (f64, f64),
    seed0: u64,
    settings: &ErgodicitySettings,
) -> Result<ErgodicityResult> {
    check_ladder("T", horizons)?;
    if horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("horizon ladder must increase".into()));
    }
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be positive".into()));
    }
    if !(settings.dt > 0.0) || settings.bins == 0 {
        return Err(Error::InvalidParameter("need dt > 0 and at least one bin".into()));
    }
    let params = model.frozen_params(x)?;
    let density = invariant_density(&params)?;
    let stepper = FrozenStepper::new(&params, Regime::Attractive)?;
    let dt = settings.dt;
    let marks: Vec<u64> = horizons.iter().map(|t| (t / dt).round().max(1.0) as u64).collect();
    let total = *marks.last().expect("ladder is non-empty");
    let burn = (OCCUPATION_BURN_IN * total as f64).round() as u64;
    let workers = worker_count(settings.workers);
    let marks = &marks;
    let stepper = &stepper;
    let run_group = |g: u64, start: f64| {
        map_indexed(0..n_paths, workers, move |i| {
            let mut rng = rng_for(seed0.wrapping_add(g * n_paths + i));
            let mut y = start;
            let mut done = 0;
            let mut terminal = Vec::with_capacity(marks.len());
            let mut positive = 0;
            for &m in marks {
                if m > done && done < burn {
                    let upto = burn.min(m);
                    y = stepper.run(y, dt, upto - done, &mut rng)?.0;
                    done = upto;
                }
                if m > done {
                    let (v, p) = stepper.run(y, dt, m - done, &mut rng)?;
                    y = v;
                    positive += p;
                    done = m;
                }
                terminal.push(y);
            }
            Ok((terminal, positive))
        })
    };
    let first = run_group(0, y0.0)?;
    let second = run_group(1, y0.1)?;
    let lo = -RANGE_WIDTHS * density.width(Side::Minus);
    let hi = RANGE_WIDTHS * density.width(Side::Plus);
    let binning = Binning::uniform(lo, hi, settings.bins)?;
    let masses = density.bin_masses(&binning)?;
    let mut tv2 = Vec::new();
    let mut tva = Vec::new();
    let mut tvb = Vec::new();
    for r in 0..horizons.len() {
        let a: Vec<f64> = first.iter().map(|p| p.0[r]).collect();
        let b: Vec<f64> = second.iter().map(|p| p.0[r]).collect();
        tv2.push(empirical_tv(&a, &b, &binning)?);
        tva.push(tv_against(&a, &masses, &binning)?);
        tvb.push(tv_against(&b, &masses, &binning)?);
    }
    let positive: u64 = first.iter().chain(&second).map(|p| p.1).sum();
    let counted = 2 * n_paths * (total - burn);
    // Rough statistical floor of a histogram TV: sum_i sqrt(p_i / n) / 2.
    let floor: f64 = masses.iter().map(|p| (p / n_paths as f64).sqrt()).sum::<f64>() * 0.5;
    let n = horizons.len();
    let counts = vec![n_paths; n];
    Ok(ErgodicityResult {
        y0,
        two_sample: ConvergenceLadder::new("T", "tv_two_sample", horizons.to_vec(), tv2, vec![floor; n], counts.clone())?,
        first_vs_exact: ConvergenceLadder::new("T", "tv_vs_exact", horizons.to_vec(), tva, vec![floor; n], counts.clone())?,
        second_vs_exact: ConvergenceLadder::new("T", "tv_vs_exact", horizons.to_vec(), tvb, vec![floor; n], counts)?,
        occupation_fraction: positive as f64 / counted as f64,
        mass_plus: density.mass_plus,
        relaxation_time: density.relaxation_time(),
    })
}
