use serde::{Deserialize, Serialize};

use super::ladder::{check_ladder, ConvergenceLadder};
use super::selection::exit_tally;
use super::table::{cell, opt_cell, Table};
use super::RunOptions;
use crate::analysis::exit_time_bound;
use crate::coeffs::SmallNoiseModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeScaling {
    pub eps: f64,
    /// Mean exit time per delta rung.
    pub ladder: ConvergenceLadder,
    /// Upper bound from the exit-time functional per rung.
    pub bounds: Vec<f64>,
    pub capped: Vec<u64>,
}

impl ExitTimeScaling {
    /// Whether each rung's mean lies below its bound plus `k` standard errors.
    pub fn below_bound(&self, k: f64) -> Vec<bool> {
        (0..self.ladder.len())
            .map(|i| self.ladder.estimates[i] <= self.bounds[i] + k * self.ladder.errors[i])
            .collect()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "eps", "delta", "n_paths", "n_capped", "mean_exit_time", "standard_error", "bound", "slope",
        ]);
        for i in 0..self.ladder.len() {
            t.push(vec![
                cell(self.eps),
                cell(self.ladder.values[i]),
                cell(self.ladder.counts[i]),
                cell(self.capped[i]),
                cell(self.ladder.estimates[i]),
                cell(self.ladder.errors[i]),
                cell(self.bounds[i]),
                opt_cell(self.ladder.slope),
            ]);
        }
        t
    }
}

/// Mean exit time from `(-delta, delta)` along a delta ladder, its log-log
/// slope, and the functional bound at each rung.
pub fn run_exit_time_scaling(
    model: &SmallNoiseModel,
    eps: f64,
    deltas: &[f64],
    n_paths: u64,
    seed0: u64,
    opts: &RunOptions,
) -> Result<ExitTimeScaling> {
    check_ladder("delta", deltas)?;
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be positive".into()));
    }
    let p = model.frozen_params(&model.x0)?;
    let phi_min = p.phi_plus.min(p.phi_minus);
    let beta_min = p.beta_plus.abs().min(p.beta_minus.abs());
    let beta_max = p.beta_plus.abs().max(p.beta_minus.abs());
    let mut means = Vec::new();
    let mut errors = Vec::new();
    let mut counts = Vec::new();
    let mut bounds = Vec::new();
    let mut capped = Vec::new();
    for (r, &delta) in deltas.iter().enumerate() {
        // Disjoint seed blocks per rung.
        let seed = seed0.wrapping_add(r as u64 * n_paths);
        let tally = exit_tally(model, eps, delta, 0..n_paths, seed, opts)?;
        if tally.exited() < 2 {
            return Err(Error::Precondition(format!("fewer than two paths exited at delta = {delta}")));
        }
        means.push(tally.mean_time());
        errors.push(tally.time_sd() / (tally.exited() as f64).sqrt());
        counts.push(tally.exited());
        capped.push(tally.n_capped);
        bounds.push(exit_time_bound(delta, phi_min, beta_min, beta_max, eps, model.gamma.value())?);
    }
    Ok(ExitTimeScaling {
        eps,
        ladder: ConvergenceLadder::new("delta", "mean_exit_time", deltas.to_vec(), means, errors, counts)?,
        bounds,
        capped,
    })
}
